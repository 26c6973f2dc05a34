use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use logitron::bench::{run_benchmark, BenchConfig, ReferenceTable};
use logitron::classifier::Classifier;
use logitron::dataio::{load_csv, load_features, read_index_file, DataError, LabelColumn, LoadOptions, SdKind};
use logitron::loss::{evaluate, hinge_q, hinge_q_grad, perceptron, Family, LossSpec};
use logitron::modelsel::{fit_best, grid_search, CVResult};
use logitron::{Dataset, GridConfig, Submodel, TrainOptions};

use crate::{BenchArgs, CvArgs, DataArgs, GridArgs, LossCurveArgs, PredictArgs, SpecArgs, TrainArgs, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn load_options(label_col: &str, no_header: bool, impute: bool) -> LoadOptions {
    LoadOptions {
        label: label_col.parse().unwrap_or(LabelColumn::Last),
        has_header: !no_header,
        impute_mean: impute,
        ..LoadOptions::default()
    }
}

fn load(a: &DataArgs) -> Result<Dataset> {
    load_csv(&a.data, &load_options(&a.label_col, a.no_header, a.impute))
        .with_context(|| format!("loading {}", a.data.display()))
}

/// A file, or standard output for `None`.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn train_options(no_standardize: bool) -> TrainOptions {
    TrainOptions { standardize: !no_standardize, sd_kind: SdKind::Population, ..TrainOptions::default() }
}

fn infer_family(alpha: f64) -> Family {
    if alpha == 0.0 {
        Family::HingeZero
    } else if alpha == 1.0 {
        Family::LogisticOne
    } else if alpha < 1.0 {
        Family::HMinus
    } else {
        Family::HPlus
    }
}

/// `c_alpha = -1` below alpha = 1, `+1` above it, and `c = 1` for the logistic families.
fn default_margin(family: Family) -> f64 {
    match family {
        Family::HMinus | Family::HingeZero => -1.0,
        Family::HPlus | Family::LMinus | Family::LPlus | Family::LogisticOne => 1.0,
    }
}

fn grid_config(spec: &SpecArgs, grid: &GridArgs, seed: u64) -> Result<GridConfig> {
    if grid.lambda_exp_min > grid.lambda_exp_max {
        return Err(usage(format!(
            "--lambda-exp-min {} exceeds --lambda-exp-max {}",
            grid.lambda_exp_min, grid.lambda_exp_max
        )));
    }
    let mut cfg = match (spec.model, spec.alpha) {
        (Some(m), _) => GridConfig::for_submodel(m, seed),
        (None, Some(a)) => {
            let family = infer_family(a);
            GridConfig::single(family, a, default_margin(family), seed)
        }
        (None, None) => return Err(usage("give --model or --alpha")),
    };
    if let Some(a) = spec.alpha {
        cfg.alphas = vec![a];
    }
    if let Some(m) = spec.margin {
        cfg.margins = vec![m];
    }
    cfg.lambda_exponents = (grid.lambda_exp_min..=grid.lambda_exp_max).collect();
    cfg.folds = grid.folds;
    cfg.stratified = grid.stratified;
    Ok(cfg)
}

fn direct_spec(spec: &SpecArgs) -> Result<LossSpec> {
    let (family, alpha, margin) = match (spec.model, spec.alpha) {
        (m, Some(a)) => {
            let family = m.map(|m| m.family()).unwrap_or_else(|| infer_family(a));
            (family, a, spec.margin.unwrap_or_else(|| default_margin(family)))
        }
        (Some(m), None) => {
            let (alphas, margins) = (m.default_alphas(), m.default_margins());
            let margin = match spec.margin {
                Some(x) => x,
                None if margins.len() == 1 => margins[0],
                None => return Err(usage(format!("{m} has several margins; give --margin or use --cv"))),
            };
            if alphas.len() != 1 {
                return Err(usage(format!("{m} has several alphas; give --alpha or use --cv")));
            }
            (m.family(), alphas[0], margin)
        }
        (None, None) => return Err(usage("give --model or --alpha")),
    };
    LossSpec::resolve(family, alpha, margin).map_err(|e| usage(e.to_string()))
}

fn print_summary(clf: &Classifier, d: &Dataset) -> Result<()> {
    let spec = clf.spec();
    println!(
        "loss {} alpha={} margin={} c={} lambda={:e}",
        spec.family(),
        spec.alpha(),
        spec.margin(),
        spec.c(),
        clf.lambda()
    );
    println!("train accuracy {:.2}%", 100.0 * clf.accuracy(d)?);
    let names: Vec<String> = match clf {
        Classifier::Binary { catalog, .. } => vec![format!("{} vs {}", catalog[0], catalog[1])],
        Classifier::Ova(o) => o.catalog().iter().map(|c| format!("{c} vs rest")).collect(),
    };
    for (name, b) in names.iter().zip(clf.binaries()) {
        if let Some(r) = b.report() {
            println!(
                "  {name}: {} iterations, objective {:.6e}, gradient {:.2e}, {}",
                r.iterations,
                r.objective,
                r.grad_norm,
                if r.converged { "converged" } else { "not converged" }
            );
        }
    }
    Ok(())
}

fn print_choice(cv: &CVResult) {
    let c = cv.best_cell();
    println!(
        "selected alpha={} margin={} lambda=2^{} (cv accuracy {:.2}%)",
        c.alpha,
        c.margin,
        c.lambda_exponent,
        100.0 * cv.best_accuracy()
    );
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let d = load(&a.data)?;
    let opts = train_options(a.no_standardize);
    let clf = if a.cv {
        let cfg = grid_config(&a.spec, &a.grid, a.seed)?;
        let cv = grid_search(&d, &cfg, &opts)?;
        print_choice(&cv);
        if let Some(path) = &a.cv_out {
            cv.write_csv(sink(Some(path))?).with_context(|| format!("writing {}", path.display()))?;
        }
        fit_best(&d, &cv, &opts)?
    } else {
        let lambda = a.lambda.ok_or_else(|| usage("direct training needs --lambda (or use --cv)"))?;
        Classifier::train(&d, &direct_spec(&a.spec)?, lambda, &opts)?
    };
    clf.save(&a.out)?;
    print_summary(&clf, &d)?;
    println!("model written to {}", a.out.display());
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let clf = Classifier::load(&a.model_file).with_context(|| format!("loading {}", a.model_file.display()))?;
    let (x, truth) = if a.label_col == "none" {
        (load_features(&a.data, !a.no_header, b',')?, None)
    } else {
        match load_csv(&a.data, &load_options(&a.label_col, a.no_header, false)) {
            Ok(d) => (d.features().to_owned(), Some(d)),
            Err(DataError::Empty) => (ndarray::Array2::zeros((0, clf.n_features())), None),
            Err(e) => return Err(e).with_context(|| format!("loading {}", a.data.display())),
        }
    };
    let pred = if x.nrows() == 0 { Vec::new() } else { clf.predict(x.view())? };

    let mut out = sink(a.out.as_deref())?;
    let mut header = vec!["label".to_string()];
    if a.margins {
        header.extend(clf.catalog().iter().map(|c| format!("score_{c}")));
    }
    writeln!(out, "{}", header.join(","))?;
    for (i, &p) in pred.iter().enumerate() {
        write!(out, "{}", clf.catalog()[p])?;
        if a.margins {
            for s in clf.scores(x.row(i))? {
                write!(out, ",{s:e}")?;
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    if let Some(d) = truth {
        eprintln!("accuracy {:.2}% on {} rows", 100.0 * clf.accuracy(&d)?, d.n_samples());
    }
    Ok(())
}

pub fn cv(a: &CvArgs) -> Result<()> {
    let d = load(&a.data)?;
    let cfg = grid_config(&a.spec, &a.grid, a.seed)?;
    let cv = grid_search(&d, &cfg, &train_options(a.no_standardize))?;
    let mut out = sink(a.out.as_deref())?;
    cv.write_csv(&mut out)?;
    out.flush()?;
    drop(out);
    if a.out.is_some() {
        print_choice(&cv);
    } else {
        eprintln!(
            "selected alpha={} margin={} lambda=2^{} (cv accuracy {:.2}%)",
            cv.best_cell().alpha,
            cv.best_cell().margin,
            cv.best_cell().lambda_exponent,
            100.0 * cv.best_accuracy()
        );
    }
    Ok(())
}

fn parse_splits(items: &[String]) -> Result<BTreeMap<String, Vec<usize>>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, path) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--split {item:?}: expected NAME=FILE")))?;
        out.insert(name.to_string(), read_index_file(path)?);
    }
    Ok(out)
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    if a.grid.lambda_exp_min > a.grid.lambda_exp_max {
        return Err(usage("--lambda-exp-min exceeds --lambda-exp-max"));
    }
    let opts = load_options(&a.label_col, a.no_header, a.impute);
    let mut datasets = Vec::new();
    for path in &a.data {
        match load_csv(path, &opts) {
            Ok(d) => datasets.push(d),
            Err(e) => log::warn!("skipping {}: {e}", path.display()),
        }
    }
    if datasets.is_empty() {
        return Err(DataError::Config("no dataset could be loaded".into()).into());
    }
    let models: Vec<Submodel> = if a.model.is_empty() { Submodel::ALL.to_vec() } else { a.model.clone() };
    let cfg = BenchConfig {
        repetitions: a.reps,
        seed: a.seed,
        train_fraction: a.train_fraction,
        lambda_exponents: (a.grid.lambda_exp_min..=a.grid.lambda_exp_max).collect(),
        folds: a.grid.folds,
        stratified: a.grid.stratified,
        train: train_options(a.no_standardize),
        splits: parse_splits(&a.split)?,
    };
    let mut report = run_benchmark(&datasets, &models, &cfg)?;
    for f in &report.failures {
        log::warn!("{} / {} (repetition {}): {}", f.dataset, f.model, f.repetition, f.message);
    }
    if !report.excluded.is_empty() {
        log::warn!("excluded from ranks and means: {}", report.excluded.join(", "));
    }
    if let Some(path) = &a.reference {
        report = report.with_reference(&ReferenceTable::load(path)?)?;
    }
    print!("{}", report.to_text());
    if let Some(path) = &a.out {
        let mut out = sink(Some(path))?;
        report.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        Some(_) | None => "inf".to_string(),
    }
}

pub fn losscurve(a: &LossCurveArgs) -> Result<()> {
    if a.points < 2 {
        return Err(usage("--points must be at least 2"));
    }
    if !(a.z_min.is_finite() && a.z_max.is_finite() && a.z_min < a.z_max) {
        return Err(usage("need finite --z-min < --z-max"));
    }
    let mut curves: Vec<(String, LossSpec)> = Vec::new();
    if let Some(alpha) = a.alpha {
        let family = infer_family(alpha);
        let margin = a.margin.unwrap_or_else(|| default_margin(family));
        let spec = LossSpec::resolve(family, alpha, margin).map_err(|e| usage(e.to_string()))?;
        curves.push((format!("alpha={alpha};margin={margin}"), spec));
    }
    let models: Vec<Submodel> = if a.model.is_empty() && a.alpha.is_none() {
        Submodel::ALL.to_vec()
    } else {
        a.model.clone()
    };
    for m in models {
        for spec in m.specs() {
            curves.push((format!("{m};alpha={};margin={}", spec.alpha(), spec.margin()), spec));
        }
    }
    let zs: Vec<f64> = (0..a.points)
        .map(|i| a.z_min + (a.z_max - a.z_min) * i as f64 / (a.points - 1) as f64)
        .collect();

    let mut out = sink(a.out.as_deref())?;
    writeln!(out, "curve,z,value,derivative")?;
    for (id, spec) in &curves {
        for &z in &zs {
            let e = evaluate(spec, z)?;
            writeln!(out, "{id},{z},{:e},{:e}", e.value, e.grad)?;
        }
    }
    if !a.no_baselines {
        let logistic = LossSpec::logistic();
        for &z in &zs {
            let e = evaluate(&logistic, z)?;
            writeln!(out, "logistic,{z},{:e},{:e}", e.value, e.grad)?;
        }
        for &z in &zs {
            let g = if z <= 0.0 { -1.0 } else { 0.0 };
            writeln!(out, "perceptron,{z},{:e},{g:e}", perceptron(z))?;
        }
        for &q in &a.hinge_orders {
            for &z in &zs {
                let v = hinge_q(q, z).map_err(|e| usage(e.to_string()))?;
                let g = hinge_q_grad(q, z)?;
                writeln!(out, "hinge_q={q},{z},{},{}", fmt_opt(v.finite()), fmt_opt(g.finite()))?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
