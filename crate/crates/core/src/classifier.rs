//! Binary and one-vs-all classifiers trained with [`crate::optim::minimize`].
//!
//! Every classifier carries the standardisation statistics of its training
//! data and applies them before computing margins. Binary predictions use
//! `sign(f(x))` with `sign(0) = +1`; one-vs-all picks the largest margin and
//! breaks ties towards the lowest catalog index.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;
use thiserror::Error;

use crate::dataio::{DataError, Dataset, SdKind, StandardizationStats};
use crate::loss::{Family, LossSpec};
use crate::optim::{minimize, LinearModel, Objective, OptimError, SolveReport, SolverSettings};
use crate::ErrorKind;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("degenerate training data: {0}")]
    Degenerate(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl ClassifierError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ClassifierError::Optim(e) => e.kind(),
            ClassifierError::Data(e) => e.kind(),
            _ => ErrorKind::Data,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            ClassifierError::Data(DataError::MissingFile(path.to_path_buf()))
        } else {
            ClassifierError::Io { path: path.to_path_buf(), source }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub solver: SolverSettings,
    /// Fit per-feature standardisation on the training rows; off means identity stats.
    pub standardize: bool,
    pub sd_kind: SdKind,
    /// Use one-vs-all even for two classes.
    pub force_ova: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            solver: SolverSettings::default(),
            standardize: true,
            sd_kind: SdKind::Population,
            force_ova: false,
        }
    }
}

impl TrainOptions {
    fn stats_for(&self, x: ArrayView2<'_, f64>) -> StandardizationStats {
        if self.standardize {
            StandardizationStats::fit(x, self.sd_kind)
        } else {
            StandardizationStats::identity(x.ncols())
        }
    }
}

/// `sign(f)` with `sign(0) = +1`.
pub fn sign(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Index of the largest value; the first one wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClassifier {
    model: LinearModel,
    spec: LossSpec,
    lambda: f64,
    stats: StandardizationStats,
    report: Option<SolveReport>,
}

impl BinaryClassifier {
    pub fn from_parts(
        model: LinearModel,
        spec: LossSpec,
        lambda: f64,
        stats: StandardizationStats,
    ) -> Result<Self, ClassifierError> {
        if stats.n_features() != model.dim() {
            return Err(ClassifierError::Shape(format!(
                "{} weights with stats for {} features",
                model.dim(),
                stats.n_features()
            )));
        }
        Ok(BinaryClassifier { model, spec, lambda, stats, report: None })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn stats(&self) -> &StandardizationStats {
        &self.stats
    }

    /// Solver outcome, when this classifier was trained rather than loaded.
    pub fn report(&self) -> Option<&SolveReport> {
        self.report.as_ref()
    }

    pub fn n_features(&self) -> usize {
        self.model.dim()
    }

    /// `f(x)` on raw (unstandardised) features.
    pub fn predict_margin(&self, x: ArrayView1<'_, f64>) -> Result<f64, ClassifierError> {
        let z = self.stats.apply_row(x)?;
        Ok(self.model.decision(z.view()))
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<f64, ClassifierError> {
        Ok(sign(self.predict_margin(x)?))
    }

    pub fn margins(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>, ClassifierError> {
        let z = self.stats.apply(x)?;
        Ok(z.dot(&self.model.w) + self.model.b)
    }
}

fn fit_standardized(
    z: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &LossSpec,
    lambda: f64,
    stats: StandardizationStats,
    solver: &SolverSettings,
) -> Result<BinaryClassifier, ClassifierError> {
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(ClassifierError::Degenerate(format!(
            "all {} training labels are {}",
            y.len(),
            if pos == 0 { "-1" } else { "+1" }
        )));
    }
    let obj = Objective::new(z, y, *spec, lambda)?;
    let (model, report) = minimize(&obj, &LinearModel::zeros(z.ncols()), solver)?;
    Ok(BinaryClassifier { model, spec: *spec, lambda, stats, report: Some(report) })
}

/// Trains on raw features `x` with `+1/-1` targets `y`.
pub fn train_binary_xy(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    spec: &LossSpec,
    lambda: f64,
    opts: &TrainOptions,
) -> Result<BinaryClassifier, ClassifierError> {
    if x.nrows() == 0 {
        return Err(ClassifierError::Degenerate("no training rows".into()));
    }
    let stats = opts.stats_for(x);
    let z = stats.apply(x)?;
    fit_standardized(z.view(), y, spec, lambda, stats, &opts.solver)
}

/// Class `positive` against the rest.
pub fn train_binary(
    d: &Dataset,
    positive: usize,
    spec: &LossSpec,
    lambda: f64,
    opts: &TrainOptions,
) -> Result<BinaryClassifier, ClassifierError> {
    let y = d.binary_targets(positive);
    train_binary_xy(d.features(), y.view(), spec, lambda, opts)
}

/// One binary classifier per catalog class.
#[derive(Debug, Clone, PartialEq)]
pub struct OvaClassifier {
    catalog: Vec<String>,
    models: Vec<BinaryClassifier>,
}

impl OvaClassifier {
    pub fn from_parts(catalog: Vec<String>, models: Vec<BinaryClassifier>) -> Result<Self, ClassifierError> {
        if catalog.len() != models.len() || models.is_empty() {
            return Err(ClassifierError::Shape(format!(
                "{} classes but {} models",
                catalog.len(),
                models.len()
            )));
        }
        let n = models[0].n_features();
        if models.iter().any(|m| m.n_features() != n) {
            return Err(ClassifierError::Shape("models disagree on the feature count".into()));
        }
        Ok(OvaClassifier { catalog, models })
    }

    pub fn catalog(&self) -> &[String] {
        &self.catalog
    }

    pub fn models(&self) -> &[BinaryClassifier] {
        &self.models
    }

    pub fn class_margins(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>, ClassifierError> {
        self.models.iter().map(|m| m.predict_margin(x)).collect()
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<usize, ClassifierError> {
        Ok(argmax_first(&self.class_margins(x)?))
    }
}

/// Class-vs-rest training for every catalog class, sharing `lambda` and the
/// standardisation statistics. Classes are trained in parallel.
pub fn train_ova(
    d: &Dataset,
    spec: &LossSpec,
    lambda: f64,
    opts: &TrainOptions,
) -> Result<OvaClassifier, ClassifierError> {
    if d.n_classes() < 2 {
        return Err(ClassifierError::Degenerate(format!("{} class(es) in the catalog", d.n_classes())));
    }
    if d.n_samples() == 0 {
        return Err(ClassifierError::Degenerate("no training rows".into()));
    }
    let stats = opts.stats_for(d.features());
    let z = stats.apply(d.features())?;
    let models = (0..d.n_classes())
        .into_par_iter()
        .map(|k| {
            let y = d.binary_targets(k);
            fit_standardized(z.view(), y.view(), spec, lambda, stats.clone(), &opts.solver).map_err(|e| match e {
                ClassifierError::Degenerate(msg) => {
                    ClassifierError::Degenerate(format!("class {:?}: {msg}", d.catalog()[k]))
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    OvaClassifier::from_parts(d.catalog().to_vec(), models)
}

pub fn predict_ova(clf: &OvaClassifier, x: ArrayView1<'_, f64>) -> Result<usize, ClassifierError> {
    clf.predict(x)
}

/// A trained model over a label catalog: a single binary model for two
/// classes (catalog entry 0 is the positive class) or one-vs-all otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Binary { catalog: Vec<String>, clf: BinaryClassifier },
    Ova(OvaClassifier),
}

const HEADER: &str = "logitron-model v1";

impl Classifier {
    pub fn train(d: &Dataset, spec: &LossSpec, lambda: f64, opts: &TrainOptions) -> Result<Self, ClassifierError> {
        match d.n_classes() {
            0 | 1 => Err(ClassifierError::Degenerate(format!("{} class(es) in the catalog", d.n_classes()))),
            2 if !opts.force_ova => Ok(Classifier::Binary {
                catalog: d.catalog().to_vec(),
                clf: train_binary(d, 0, spec, lambda, opts)?,
            }),
            _ => Ok(Classifier::Ova(train_ova(d, spec, lambda, opts)?)),
        }
    }

    pub fn catalog(&self) -> &[String] {
        match self {
            Classifier::Binary { catalog, .. } => catalog,
            Classifier::Ova(o) => o.catalog(),
        }
    }

    pub fn binaries(&self) -> &[BinaryClassifier] {
        match self {
            Classifier::Binary { clf, .. } => std::slice::from_ref(clf),
            Classifier::Ova(o) => o.models(),
        }
    }

    fn first(&self) -> &BinaryClassifier {
        &self.binaries()[0]
    }

    pub fn spec(&self) -> &LossSpec {
        self.first().spec()
    }

    pub fn lambda(&self) -> f64 {
        self.first().lambda()
    }

    pub fn stats(&self) -> &StandardizationStats {
        self.first().stats()
    }

    pub fn n_features(&self) -> usize {
        self.first().n_features()
    }

    /// Per-class scores: `(f, -f)` for the binary case, the OVA margins otherwise.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Vec<f64>, ClassifierError> {
        match self {
            Classifier::Binary { clf, .. } => {
                let f = clf.predict_margin(x)?;
                Ok(vec![f, -f])
            }
            Classifier::Ova(o) => o.class_margins(x),
        }
    }

    /// Catalog index of the predicted class.
    pub fn predict_row(&self, x: ArrayView1<'_, f64>) -> Result<usize, ClassifierError> {
        match self {
            Classifier::Binary { clf, .. } => Ok(if clf.predict(x)? > 0.0 { 0 } else { 1 }),
            Classifier::Ova(o) => o.predict(x),
        }
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<usize>, ClassifierError> {
        if x.ncols() != self.n_features() {
            return Err(ClassifierError::Shape(format!(
                "{} features given, model expects {}",
                x.ncols(),
                self.n_features()
            )));
        }
        match self {
            Classifier::Binary { clf, .. } => {
                Ok(clf.margins(x)?.iter().map(|&f| if f >= 0.0 { 0 } else { 1 }).collect())
            }
            Classifier::Ova(o) => {
                let cols: Vec<Array1<f64>> =
                    o.models().iter().map(|m| m.margins(x)).collect::<Result<_, _>>()?;
                Ok((0..x.nrows())
                    .map(|i| argmax_first(&cols.iter().map(|c| c[i]).collect::<Vec<_>>()))
                    .collect())
            }
        }
    }

    /// Fraction of rows whose predicted label string equals the true one.
    pub fn accuracy(&self, d: &Dataset) -> Result<f64, ClassifierError> {
        if d.n_samples() == 0 {
            return Ok(0.0);
        }
        let pred = self.predict(d.features())?;
        let hits = pred
            .iter()
            .enumerate()
            .filter(|&(i, &p)| self.catalog()[p] == d.label_str(i))
            .count();
        Ok(hits as f64 / d.n_samples() as f64)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let spec = self.spec();
        let stats = self.stats();
        writeln!(w, "{HEADER}")?;
        writeln!(w, "kind {}", if matches!(self, Classifier::Binary { .. }) { "binary" } else { "ova" })?;
        writeln!(w, "family {}", spec.family())?;
        writeln!(w, "alpha {:.16e}", spec.alpha())?;
        writeln!(w, "c {:.16e}", spec.c())?;
        writeln!(w, "lambda {:.16e}", self.lambda())?;
        writeln!(w, "features {}", self.n_features())?;
        writeln!(w, "classes {}", self.catalog().len())?;
        for label in self.catalog() {
            writeln!(w, "class {label}")?;
        }
        writeln!(w, "mean{}", join(stats.mean()))?;
        writeln!(w, "scale{}", join(stats.scale()))?;
        for m in self.binaries() {
            writeln!(w, "model {:.16e}{}", m.model().b, join(m.model().w.as_slice().expect("contiguous")))?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| ClassifierError::io(path, e))?;
        self.write_to(BufWriter::new(f)).map_err(|e| ClassifierError::io(path, e))
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, ClassifierError> {
        let lines: Vec<String> = r
            .lines()
            .collect::<Result<_, _>>()
            .map_err(|e| ClassifierError::Format { line: 0, message: e.to_string() })?;
        let mut p = Parser { lines: &lines, pos: 0 };
        if p.next_line()? != HEADER {
            return Err(p.err("missing or unsupported header"));
        }
        let kind = p.field("kind")?.to_string();
        let family: Family = p.field("family")?.parse().map_err(|e: crate::loss::LossError| p.err(&e.to_string()))?;
        let alpha = p.float("alpha")?;
        let c = p.float("c")?;
        let lambda = p.float("lambda")?;
        let n: usize = p.parse_field("features")?;
        let k: usize = p.parse_field("classes")?;
        let mut catalog = Vec::with_capacity(k);
        for _ in 0..k {
            catalog.push(p.field("class")?.to_string());
        }
        let mean = p.floats("mean", n)?;
        let scale = p.floats("scale", n)?;
        let spec = LossSpec::new(family, alpha, c).map_err(|e| p.err(&e.to_string()))?;
        let stats = StandardizationStats::new(mean, scale).map_err(|e| p.err(&e.to_string()))?;
        let count = match kind.as_str() {
            "binary" if k == 2 => 1,
            "ova" if k >= 2 => k,
            _ => return Err(p.err(&format!("kind {kind:?} with {k} classes"))),
        };
        let mut models = Vec::with_capacity(count);
        for _ in 0..count {
            let v = p.floats("model", n + 1)?;
            let model = LinearModel::new(Array1::from(v[1..].to_vec()), v[0]);
            models.push(BinaryClassifier::from_parts(model, spec, lambda, stats.clone())?);
        }
        Ok(if kind == "binary" {
            Classifier::Binary { catalog, clf: models.pop().expect("one model") }
        } else {
            Classifier::Ova(OvaClassifier::from_parts(catalog, models)?)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ClassifierError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| ClassifierError::io(path, e))?;
        Classifier::read_from(BufReader::new(f))
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!(" {x:.16e}")).collect()
}

struct Parser<'a> {
    lines: &'a [String],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ClassifierError {
        ClassifierError::Format { line: self.pos, message: message.to_string() }
    }

    fn next_line(&mut self) -> Result<&'a str, ClassifierError> {
        let lines = self.lines;
        let line = lines.get(self.pos).ok_or_else(|| ClassifierError::Format {
            line: self.pos + 1,
            message: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(line.trim_end_matches('\r'))
    }

    fn field(&mut self, key: &str) -> Result<&'a str, ClassifierError> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ if line == key => Ok(""),
            _ => Err(ClassifierError::Format { line: self.pos, message: format!("expected {key:?}") }),
        }
    }

    fn parse_field<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ClassifierError> {
        let v = self.field(key)?.trim().to_string();
        v.parse().map_err(|_| self.err(&format!("bad value {v:?} for {key}")))
    }

    fn float(&mut self, key: &str) -> Result<f64, ClassifierError> {
        self.parse_field(key)
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>, ClassifierError> {
        let rest = self.field(key)?.to_string();
        let v: Vec<f64> = rest
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| self.err(&format!("{key}: {e}")))?;
        if v.len() != n {
            return Err(self.err(&format!("{key}: expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }
}

/// Margins of `clf` over the rows of a raw feature matrix.
pub fn margins_matrix(clf: &Classifier, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, ClassifierError> {
    let k = clf.catalog().len();
    let mut out = Array2::zeros((x.nrows(), k));
    for (i, row) in x.rows().into_iter().enumerate() {
        for (j, s) in clf.scores(row)?.into_iter().enumerate() {
            out[[i, j]] = s;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn toy(rows: Array2<f64>, labels: &[&str]) -> Dataset {
        Dataset::from_labels("toy", rows, labels).unwrap()
    }

    #[test]
    fn margin_examples() {
        let id = StandardizationStats::identity;
        let c = BinaryClassifier::from_parts(LinearModel::new(array![0.0, 0.0], 0.5), LossSpec::logistic(), 1.0, id(2))
            .unwrap();
        assert_eq!(c.predict_margin(array![7.0, -3.0].view()).unwrap(), 0.5);
        let c = BinaryClassifier::from_parts(LinearModel::new(array![1.0, -1.0], 0.0), LossSpec::logistic(), 1.0, id(2))
            .unwrap();
        assert_eq!(c.predict_margin(array![2.0, 2.0].view()).unwrap(), 0.0);
        assert_eq!(c.predict(array![2.0, 2.0].view()).unwrap(), 1.0);
        let c = BinaryClassifier::from_parts(LinearModel::new(array![3.0], -1.0), LossSpec::logistic(), 1.0, id(1))
            .unwrap();
        assert_eq!(c.predict_margin(array![1.0].view()).unwrap(), 2.0);
        assert!(c.predict_margin(array![1.0, 2.0].view()).is_err());
    }

    #[test]
    fn argmax_tie_rule() {
        assert_eq!(argmax_first(&[0.3, 0.9, -0.2]), 1);
        assert_eq!(argmax_first(&[0.5, 0.5, 0.5]), 0);
        assert_eq!(argmax_first(&[0.1, 0.7, 0.7]), 1);
    }

    #[test]
    fn single_class_is_degenerate() {
        let d = toy(array![[1.0], [2.0]], &["a", "a"]);
        assert!(matches!(
            train_binary(&d, 0, &LossSpec::logistic(), 1.0, &TrainOptions::default()),
            Err(ClassifierError::Degenerate(_))
        ));
        assert!(matches!(
            Classifier::train(&d, &LossSpec::logistic(), 1.0, &TrainOptions::default()),
            Err(ClassifierError::Degenerate(_))
        ));
    }

    #[test]
    fn ova_degenerate_names_class() {
        let d = Dataset::new("t", array![[1.0], [2.0]], vec![0, 1], vec!["a".into(), "b".into(), "ghost".into()])
            .unwrap();
        match train_ova(&d, &LossSpec::logistic(), 1.0, &TrainOptions::default()) {
            Err(ClassifierError::Degenerate(msg)) => assert!(msg.contains("ghost")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_vector_classes() {
        let d = toy(array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], &["a", "b", "c"]);
        let spec = LossSpec::resolve(Family::HMinus, 0.75, -1.0).unwrap();
        let opts = TrainOptions { standardize: false, ..TrainOptions::default() };
        let clf = Classifier::train(&d, &spec, 2f64.powi(-14), &opts).unwrap();
        assert_eq!(clf.predict(d.features()).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn model_file_round_trip() {
        let d = toy(array![[0.0, 1.0], [1.0, 3.0], [2.0, -1.0], [3.0, 0.5], [4.0, 2.0]], &["x", "y", "x", "z", "y"]);
        let spec = LossSpec::resolve(Family::HPlus, 1.5, 0.6).unwrap();
        let clf = Classifier::train(&d, &spec, 0.1, &TrainOptions::default()).unwrap();
        let mut buf = Vec::new();
        clf.write_to(&mut buf).unwrap();
        let back = Classifier::read_from(&buf[..]).unwrap();
        assert_eq!(back.catalog(), clf.catalog());
        assert_eq!(back.spec(), clf.spec());
        assert_eq!(back.lambda(), clf.lambda());
        assert_eq!(back.stats(), clf.stats());
        for (a, b) in back.binaries().iter().zip(clf.binaries()) {
            assert_eq!(a.model(), b.model());
        }
    }

    #[test]
    fn malformed_model_file() {
        assert!(matches!(Classifier::read_from(&b"nope\n"[..]), Err(ClassifierError::Format { .. })));
        assert!(matches!(
            Classifier::read_from(&b"logitron-model v1\nkind binary\n"[..]),
            Err(ClassifierError::Format { .. })
        ));
    }
}
