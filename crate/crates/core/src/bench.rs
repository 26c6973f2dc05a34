//! Benchmark runs over datasets x submodels with the usual reporting
//! statistics: test accuracy averaged over repetitions, Friedman mean ranks
//! and racc (accuracy minus a per-dataset reference).
//!
//! Repetition `r` of a run seeded with `s` uses seed `s + r` both for the
//! train/test split and for the cross-validation folds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::TrainOptions;
use crate::dataio::{split_train_test, DataError, Dataset, SplitSpec};
use crate::modelsel::{fit_best, grid_search, GridConfig, Submodel, DEFAULT_FOLDS, DEFAULT_LAMBDA_EXPONENTS};
use crate::ErrorKind;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("incomplete accuracy table; missing cells: {}", format_gaps(.0))]
    IncompleteTable(Vec<(String, String)>),
    #[error("no reference accuracy for dataset {0:?}")]
    MissingReference(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("reference table parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
}

impl BenchError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            BenchError::Config(_) => ErrorKind::Config,
            BenchError::Data(e) => e.kind(),
            BenchError::IncompleteTable(_) => ErrorKind::Other,
            _ => ErrorKind::Data,
        }
    }
}

fn format_gaps(gaps: &[(String, String)]) -> String {
    gaps.iter().map(|(d, m)| format!("{d}/{m}")).collect::<Vec<_>>().join(", ")
}

/// Dataset x model grid of accuracies (percent), possibly with gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTable {
    datasets: Vec<String>,
    models: Vec<String>,
    cells: Vec<Vec<Option<f64>>>,
}

impl AccuracyTable {
    pub fn empty(datasets: Vec<String>, models: Vec<String>) -> Self {
        let cells = vec![vec![None; models.len()]; datasets.len()];
        AccuracyTable { datasets, models, cells }
    }

    pub fn from_rows(datasets: Vec<String>, models: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, BenchError> {
        if rows.len() != datasets.len() || rows.iter().any(|r| r.len() != models.len()) {
            return Err(BenchError::Config(format!(
                "table of {} rows does not match {} datasets x {} models",
                rows.len(),
                datasets.len(),
                models.len()
            )));
        }
        let cells = rows.into_iter().map(|r| r.into_iter().map(Some).collect()).collect();
        Ok(AccuracyTable { datasets, models, cells })
    }

    pub fn datasets(&self) -> &[String] {
        &self.datasets
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn get(&self, dataset: usize, model: usize) -> Option<f64> {
        self.cells[dataset][model]
    }

    pub fn set(&mut self, dataset: usize, model: usize, value: Option<f64>) {
        self.cells[dataset][model] = value;
    }

    pub fn row(&self, dataset: usize) -> &[Option<f64>] {
        &self.cells[dataset]
    }

    /// Rows with no missing cell.
    pub fn complete_rows(&self) -> Vec<usize> {
        (0..self.datasets.len()).filter(|&i| self.cells[i].iter().all(Option::is_some)).collect()
    }

    pub fn gaps(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, row) in self.cells.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if c.is_none() {
                    out.push((self.datasets[i].clone(), self.models[j].clone()));
                }
            }
        }
        out
    }

    /// The same table restricted to `rows`.
    pub fn subset(&self, rows: &[usize]) -> AccuracyTable {
        AccuracyTable {
            datasets: rows.iter().map(|&i| self.datasets[i].clone()).collect(),
            models: self.models.clone(),
            cells: rows.iter().map(|&i| self.cells[i].clone()).collect(),
        }
    }

    /// Column means over complete rows.
    pub fn column_means(&self) -> Vec<Option<f64>> {
        let rows = self.complete_rows();
        (0..self.models.len())
            .map(|j| {
                (!rows.is_empty()).then(|| {
                    rows.iter().map(|&i| self.cells[i][j].expect("complete")).sum::<f64>() / rows.len() as f64
                })
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["dataset".to_string()];
        header.extend(self.models.iter().cloned());
        out.write_record(&header)?;
        for (i, d) in self.datasets.iter().enumerate() {
            let mut rec = vec![d.clone()];
            rec.extend(self.cells[i].iter().map(|c| c.map(|v| format!("{v:.4}")).unwrap_or_default()));
            out.write_record(&rec)?;
        }
        out.flush()
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<(String, Vec<String>)> = self
            .datasets
            .iter()
            .zip(&self.cells)
            .map(|(d, r)| (d.clone(), r.iter().map(|c| c.map(|v| format!("{v:.2}")).unwrap_or("-".into())).collect()))
            .collect();
        aligned(&self.models, &rows)
    }
}

fn aligned(models: &[String], rows: &[(String, Vec<String>)]) -> String {
    let first = rows.iter().map(|(d, _)| d.len()).max().unwrap_or(0).max("dataset".len());
    let widths: Vec<usize> = models
        .iter()
        .enumerate()
        .map(|(j, m)| rows.iter().map(|(_, r)| r[j].len()).max().unwrap_or(0).max(m.len()))
        .collect();
    let mut s = String::new();
    let _ = write!(s, "{:<first$}", "dataset");
    for (m, w) in models.iter().zip(&widths) {
        let _ = write!(s, "  {m:>w$}");
    }
    s.push('\n');
    for (d, r) in rows {
        let _ = write!(s, "{d:<first$}");
        for (v, w) in r.iter().zip(&widths) {
            let _ = write!(s, "  {v:>w$}");
        }
        s.push('\n');
    }
    s
}

/// Ranks of `values`, 1 for the largest, tied entries sharing the mean of their positions.
pub fn rank_descending(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Per-model mean rank over all datasets; every cell must be present.
pub fn friedman_mean_ranks(table: &AccuracyTable) -> Result<Vec<f64>, BenchError> {
    let gaps = table.gaps();
    if !gaps.is_empty() {
        return Err(BenchError::IncompleteTable(gaps));
    }
    let m = table.models.len();
    let mut sums = vec![0.0; m];
    for row in &table.cells {
        let values: Vec<f64> = row.iter().map(|c| c.expect("complete")).collect();
        for (s, r) in sums.iter_mut().zip(rank_descending(&values)) {
            *s += r;
        }
    }
    let n = table.datasets.len().max(1) as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Per-dataset reference accuracies, read from a `dataset,accuracy` CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceTable {
    entries: BTreeMap<String, f64>,
}

impl ReferenceTable {
    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Self {
        ReferenceTable { entries: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect() }
    }

    pub fn get(&self, dataset: &str) -> Option<f64> {
        self.entries.get(dataset).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A header line is optional and recognised by a non-numeric second field.
    pub fn read<R: Read>(r: R) -> Result<Self, BenchError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
        let mut entries = BTreeMap::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| BenchError::Parse { line: i + 1, message: e.to_string() })?;
            if rec.len() < 2 {
                return Err(BenchError::Parse { line: i + 1, message: "expected dataset,accuracy".into() });
            }
            match rec[1].parse::<f64>() {
                Ok(v) => {
                    entries.insert(rec[0].to_string(), v);
                }
                Err(_) if i == 0 => continue,
                Err(e) => return Err(BenchError::Parse { line: i + 1, message: format!("{:?}: {e}", &rec[1]) }),
            }
        }
        Ok(ReferenceTable { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| {
            if e.kind() == io::ErrorKind::NotFound {
                BenchError::Data(DataError::MissingFile(path.to_path_buf()))
            } else {
                BenchError::Io { path: path.to_path_buf(), source: e }
            }
        })?;
        ReferenceTable::read(BufReader::new(f))
    }
}

/// `accuracy - reference` in percentage points, cellwise. Gaps stay gaps.
pub fn racc(table: &AccuracyTable, reference: &ReferenceTable) -> Result<AccuracyTable, BenchError> {
    let mut out = AccuracyTable::empty(table.datasets.clone(), table.models.clone());
    for (i, d) in table.datasets.iter().enumerate() {
        let r = reference.get(d).ok_or_else(|| BenchError::MissingReference(d.clone()))?;
        for j in 0..table.models.len() {
            out.cells[i][j] = table.cells[i][j].map(|a| a - r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub lambda_exponents: Vec<i32>,
    pub folds: usize,
    pub stratified: bool,
    pub train: TrainOptions,
    /// Fixed training rows per dataset name; these override the fractional split.
    pub splits: BTreeMap<String, Vec<usize>>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 5,
            seed: 0,
            train_fraction: 0.5,
            lambda_exponents: DEFAULT_LAMBDA_EXPONENTS.collect(),
            folds: DEFAULT_FOLDS,
            stratified: false,
            train: TrainOptions::default(),
            splits: BTreeMap::new(),
        }
    }
}

/// The cell chosen by cross-validation in one repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub dataset: String,
    pub model: String,
    pub repetition: usize,
    pub alpha: f64,
    pub margin: f64,
    pub lambda_exponent: i32,
    pub cv_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub dataset: String,
    pub model: String,
    pub repetition: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    /// Test accuracy in percent, averaged over repetitions.
    pub accuracy: AccuracyTable,
    pub per_repetition: Vec<AccuracyTable>,
    pub selections: Vec<Selection>,
    pub failures: Vec<Failure>,
    /// Datasets with a result for every model; ranks and means use only these.
    pub included: Vec<String>,
    pub excluded: Vec<String>,
    pub mean_accuracy: Vec<Option<f64>>,
    pub mean_ranks: Option<Vec<f64>>,
    pub racc: Option<AccuracyTable>,
}

impl BenchReport {
    pub fn with_reference(mut self, reference: &ReferenceTable) -> Result<Self, BenchError> {
        self.racc = Some(racc(&self.accuracy, reference)?);
        Ok(self)
    }

    /// Accuracy matrix followed by `mean_accuracy` and `mean_rank` rows. With a
    /// reference attached, `racc_<model>` columns follow the accuracy columns;
    /// their `mean_accuracy` entry averages over the included datasets.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let models = &self.accuracy.models;
        let mut header = vec!["dataset".to_string()];
        header.extend(models.iter().cloned());
        if self.racc.is_some() {
            header.extend(models.iter().map(|m| format!("racc_{m}")));
        }
        out.write_record(&header)?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
        for (i, d) in self.accuracy.datasets.iter().enumerate() {
            let mut rec = vec![d.clone()];
            rec.extend(self.accuracy.cells[i].iter().map(|&c| fmt(c)));
            if let Some(r) = &self.racc {
                rec.extend(r.cells[i].iter().map(|&c| fmt(c)));
            }
            out.write_record(&rec)?;
        }
        let mut rec = vec!["mean_accuracy".to_string()];
        rec.extend(self.mean_accuracy.iter().map(|&c| fmt(c)));
        if let Some(r) = &self.racc {
            let rows: Vec<usize> = (0..r.datasets.len())
                .filter(|&i| self.included.contains(&r.datasets[i]))
                .collect();
            rec.extend(r.subset(&rows).column_means().into_iter().map(fmt));
        }
        out.write_record(&rec)?;
        let mut rec = vec!["mean_rank".to_string()];
        match &self.mean_ranks {
            Some(r) => rec.extend(r.iter().map(|&v| fmt(Some(v)))),
            None => rec.extend(models.iter().map(|_| String::new())),
        }
        if self.racc.is_some() {
            rec.extend(models.iter().map(|_| String::new()));
        }
        out.write_record(&rec)?;
        out.flush()
    }

    pub fn to_text(&self) -> String {
        let mut rows: Vec<(String, Vec<String>)> = self
            .accuracy
            .datasets
            .iter()
            .zip(&self.accuracy.cells)
            .map(|(d, r)| (d.clone(), r.iter().map(|c| c.map(|v| format!("{v:.2}")).unwrap_or("-".into())).collect()))
            .collect();
        rows.push((
            "mean accuracy".into(),
            self.mean_accuracy.iter().map(|c| c.map(|v| format!("{v:.2}")).unwrap_or("-".into())).collect(),
        ));
        if let Some(r) = &self.mean_ranks {
            rows.push(("mean rank".into(), r.iter().map(|v| format!("{v:.2}")).collect()));
        }
        let mut s = aligned(&self.accuracy.models, &rows);
        if !self.excluded.is_empty() {
            let _ = writeln!(s, "excluded from ranks: {}", self.excluded.join(", "));
        }
        if let Some(r) = &self.racc {
            s.push_str("\nracc\n");
            s.push_str(&r.to_text());
        }
        s
    }
}

fn run_cell(
    d: &Dataset,
    model: Submodel,
    rep: usize,
    cfg: &BenchConfig,
) -> Result<Selection, String> {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let split = match cfg.splits.get(d.name()) {
        Some(idx) => SplitSpec::Indices(idx.clone()),
        None => SplitSpec::Fraction(cfg.train_fraction),
    };
    let (train, test) = split_train_test(d, &split, seed).map_err(|e| e.to_string())?;
    let grid = GridConfig {
        lambda_exponents: cfg.lambda_exponents.clone(),
        folds: cfg.folds,
        stratified: cfg.stratified,
        ..GridConfig::for_submodel(model, seed)
    };
    let cv = grid_search(&train, &grid, &cfg.train).map_err(|e| e.to_string())?;
    let clf = fit_best(&train, &cv, &cfg.train).map_err(|e| e.to_string())?;
    let acc = clf.accuracy(&test).map_err(|e| e.to_string())?;
    let best = cv.best_cell();
    Ok(Selection {
        dataset: d.name().to_string(),
        model: model.name().to_string(),
        repetition: rep,
        alpha: best.alpha,
        margin: best.margin,
        lambda_exponent: best.lambda_exponent,
        cv_accuracy: cv.best_accuracy(),
        test_accuracy: 100.0 * acc,
    })
}

/// Splits, cross-validates, refits and tests every (dataset, model, repetition).
/// Failed cells are reported and left out of the aggregates.
pub fn run_benchmark(datasets: &[Dataset], models: &[Submodel], cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if datasets.is_empty() || models.is_empty() {
        return Err(BenchError::Config("need at least one dataset and one model".into()));
    }
    if cfg.repetitions == 0 {
        return Err(BenchError::Config("repetitions must be at least 1".into()));
    }
    let names: Vec<String> = datasets.iter().map(|d| d.name().to_string()).collect();
    let model_names: Vec<String> = models.iter().map(|m| m.name().to_string()).collect();
    let (nd, nm, nr) = (datasets.len(), models.len(), cfg.repetitions);

    let results: Vec<Result<Selection, String>> = (0..nd * nm * nr)
        .into_par_iter()
        .map(|job| {
            let (di, rest) = (job / (nm * nr), job % (nm * nr));
            let (mi, r) = (rest / nr, rest % nr);
            run_cell(&datasets[di], models[mi], r, cfg)
        })
        .collect();

    let mut per_repetition = vec![AccuracyTable::empty(names.clone(), model_names.clone()); nr];
    let mut selections = Vec::new();
    let mut failures = Vec::new();
    for (job, res) in results.into_iter().enumerate() {
        let (di, rest) = (job / (nm * nr), job % (nm * nr));
        let (mi, r) = (rest / nr, rest % nr);
        match res {
            Ok(sel) => {
                per_repetition[r].set(di, mi, Some(sel.test_accuracy));
                selections.push(sel);
            }
            Err(message) => {
                log::warn!("{} / {} / repetition {r} failed: {message}", names[di], model_names[mi]);
                failures.push(Failure {
                    dataset: names[di].clone(),
                    model: model_names[mi].clone(),
                    repetition: r,
                    message,
                });
            }
        }
    }

    let mut accuracy = AccuracyTable::empty(names.clone(), model_names);
    for di in 0..nd {
        for mi in 0..nm {
            let vals: Option<Vec<f64>> = per_repetition.iter().map(|t| t.get(di, mi)).collect();
            accuracy.set(di, mi, vals.map(|v| v.iter().sum::<f64>() / nr as f64));
        }
    }
    let complete = accuracy.complete_rows();
    let included: Vec<String> = complete.iter().map(|&i| names[i].clone()).collect();
    let excluded: Vec<String> = (0..nd).filter(|i| !complete.contains(i)).map(|i| names[i].clone()).collect();
    if !excluded.is_empty() {
        log::warn!("excluded from ranking: {}", excluded.join(", "));
    }
    let mean_accuracy = accuracy.column_means();
    let mean_ranks = if complete.is_empty() { None } else { Some(friedman_mean_ranks(&accuracy.subset(&complete))?) };

    Ok(BenchReport {
        accuracy,
        per_repetition,
        selections,
        failures,
        included,
        excluded,
        mean_accuracy,
        mean_ranks,
        racc: None,
    })
}
