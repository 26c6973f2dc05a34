//! Datasets, CSV ingestion, standardisation and train/test splits.
//!
//! Labels are kept as strings in a *catalog* ordered by first appearance; the
//! dataset itself stores catalog indices. Standardisation uses the population
//! standard deviation by default and maps constant features to zero.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ErrorKind;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: u64, column: usize, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("label column not found: {0}")]
    LabelColumn(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

impl DataError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            DataError::Config(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            DataError::MissingFile(path.to_path_buf())
        } else {
            DataError::Io { path: path.to_path_buf(), source }
        }
    }
}

/// A labelled feature matrix. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Vec<usize>,
    catalog: Vec<String>,
    feature_names: Vec<String>,
    label_name: String,
}

impl Dataset {
    /// Builds a dataset, checking shapes, finiteness and label range.
    /// Feature names default to `x0, x1, ...`.
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Vec<usize>,
        catalog: Vec<String>,
    ) -> Result<Self, DataError> {
        if features.nrows() != labels.len() {
            return Err(DataError::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(DataError::Config(format!("non-finite feature value {v}")));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= catalog.len()) {
            return Err(DataError::Shape(format!(
                "label index {l} outside a catalog of {} classes",
                catalog.len()
            )));
        }
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            catalog,
            feature_names,
            label_name: "label".to_string(),
        })
    }

    /// Builds a dataset from raw string labels, catalog in first-appearance order.
    pub fn from_labels<S: AsRef<str>>(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: &[S],
    ) -> Result<Self, DataError> {
        let mut catalog: Vec<String> = Vec::new();
        let ids = labels
            .iter()
            .map(|l| intern(&mut catalog, l.as_ref()))
            .collect();
        Dataset::new(name, features, ids, catalog)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self, DataError> {
        if names.len() != self.n_features() {
            return Err(DataError::Shape(format!(
                "{} feature names for {} features",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn catalog(&self) -> &[String] {
        &self.catalog
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.catalog.len()
    }

    pub fn label_str(&self, i: usize) -> &str {
        &self.catalog[self.labels[i]]
    }

    /// Rows `idx`, in that order. The catalog is kept whole even if some
    /// classes no longer occur.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select(Axis(0), idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            catalog: self.catalog.clone(),
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
        }
    }

    /// Same rows and labels with a replaced feature matrix of equal shape.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Dataset, DataError> {
        if features.dim() != self.features.dim() {
            return Err(DataError::Shape(format!(
                "replacement features {:?} differ from {:?}",
                features.dim(),
                self.features.dim()
            )));
        }
        Ok(Dataset { features, ..self.clone() })
    }

    /// `+1` for rows of class `positive`, `-1` otherwise.
    pub fn binary_targets(&self, positive: usize) -> Array1<f64> {
        self.labels
            .iter()
            .map(|&l| if l == positive { 1.0 } else { -1.0 })
            .collect()
    }

    /// Number of rows per catalog class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.catalog.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

fn intern(catalog: &mut Vec<String>, label: &str) -> usize {
    match catalog.iter().position(|c| c == label) {
        Some(i) => i,
        None => {
            catalog.push(label.to_string());
            catalog.len() - 1
        }
    }
}

/// Which column of a CSV file holds the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Last,
    First,
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// `last`, `first`, a zero-based index, or a header name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            "first" => LabelColumn::First,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label: LabelColumn,
    pub has_header: bool,
    /// Replace unparseable or missing feature cells with the column mean.
    pub impute_mean: bool,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { label: LabelColumn::Last, has_header: true, impute_mean: false, delimiter: b',' }
    }
}

fn parse_cell(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a delimited file with one label column and numeric features.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));

    let header: Option<Vec<String>> = if opts.has_header {
        let h = reader.headers().map_err(|e| csv_error(path, e))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut label_idx: Option<usize> = None;
    let mut ncols = 0usize;
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        let li = match label_idx {
            Some(li) => li,
            None => {
                ncols = record.len();
                let li = resolve_label(&opts.label, ncols, header.as_deref())?;
                label_idx = Some(li);
                li
            }
        };
        if record.len() != ncols {
            return Err(DataError::Parse {
                row,
                column: record.len(),
                message: format!("expected {ncols} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if j == li {
                raw_labels.push(cell.to_string());
                continue;
            }
            match parse_cell(cell) {
                Some(v) => cells.push(Some(v)),
                None if opts.impute_mean => cells.push(None),
                None => {
                    return Err(DataError::Parse {
                        row,
                        column: j,
                        message: format!("non-numeric feature value {cell:?}"),
                    })
                }
            }
        }
    }
    if raw_labels.is_empty() {
        return Err(DataError::Empty);
    }
    let li = label_idx.expect("set with the first row");
    let n = ncols - 1;
    let nrows = raw_labels.len();

    let mut features = Array2::<f64>::zeros((nrows, n));
    for j in 0..n {
        let column = (0..nrows).map(|i| cells[i * n + j]);
        let (sum, count) = column.clone().flatten().fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        let fill = if count > 0 { sum / count as f64 } else { 0.0 };
        for (i, v) in column.enumerate() {
            features[[i, j]] = v.unwrap_or(fill);
        }
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut d = Dataset::from_labels(name, features, &raw_labels)?;
    if let Some(h) = header {
        let names = h.iter().enumerate().filter(|&(j, _)| j != li).map(|(_, s)| s.clone()).collect();
        d = d.with_feature_names(names)?.with_label_name(h[li].clone());
    }
    Ok(d)
}

/// Reads an all-numeric file with no label column. An empty file gives a
/// matrix with zero rows (and the header's width, if there is one).
pub fn load_features(path: impl AsRef<Path>, has_header: bool, delimiter: u8) -> Result<Array2<f64>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut ncols = if has_header { reader.headers().map_err(|e| csv_error(path, e))?.len() } else { 0 };
    let mut values = Vec::new();
    let mut nrows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|c| c.is_empty()) {
            continue;
        }
        if nrows == 0 && !has_header {
            ncols = record.len();
        }
        if record.len() != ncols {
            return Err(DataError::Parse {
                row,
                column: record.len(),
                message: format!("expected {ncols} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            values.push(parse_cell(cell).ok_or_else(|| DataError::Parse {
                row,
                column: j,
                message: format!("non-numeric feature value {cell:?}"),
            })?);
        }
        nrows += 1;
    }
    Array2::from_shape_vec((nrows, ncols), values).map_err(|e| DataError::Shape(e.to_string()))
}

fn resolve_label(label: &LabelColumn, ncols: usize, header: Option<&[String]>) -> Result<usize, DataError> {
    if ncols < 2 {
        return Err(DataError::LabelColumn(format!("rows have {ncols} field(s); need features and a label")));
    }
    match label {
        LabelColumn::Last => Ok(ncols - 1),
        LabelColumn::First => Ok(0),
        LabelColumn::Index(i) if *i < ncols => Ok(*i),
        LabelColumn::Index(i) => Err(DataError::LabelColumn(format!("index {i} with {ncols} columns"))),
        LabelColumn::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::LabelColumn(name.clone())),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> DataError {
    let row = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::io(path, source),
        other => DataError::Parse { row, column: 0, message: format!("{other:?}") },
    }
}

/// Writes features then the label column, with a header row.
/// Floats use the shortest representation that reads back bit-identically.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut w = csv::Writer::from_writer(io::BufWriter::new(file));
    let mut header: Vec<&str> = d.feature_names.iter().map(String::as_str).collect();
    header.push(&d.label_name);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for i in 0..d.n_samples() {
        let mut rec: Vec<String> = d.features.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(d.label_str(i).to_string());
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| DataError::io(path, e))
}

/// Divisor used for the per-feature standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdKind {
    #[default]
    Population,
    Sample,
}

/// Per-feature centring and scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl StandardizationStats {
    pub fn new(mean: Vec<f64>, scale: Vec<f64>) -> Result<Self, DataError> {
        if mean.len() != scale.len() {
            return Err(DataError::Shape(format!("{} means, {} scales", mean.len(), scale.len())));
        }
        if mean.iter().any(|m| !m.is_finite()) || scale.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DataError::Config("standardization stats must be finite with positive scales".into()));
        }
        Ok(StandardizationStats { mean, scale })
    }

    /// Zero means, unit scales.
    pub fn identity(n: usize) -> Self {
        StandardizationStats { mean: vec![0.0; n], scale: vec![1.0; n] }
    }

    pub fn fit(x: ArrayView2<'_, f64>, kind: SdKind) -> Self {
        let rows = x.nrows();
        if rows == 0 {
            return Self::identity(x.ncols());
        }
        let divisor = match kind {
            SdKind::Population => rows as f64,
            SdKind::Sample if rows > 1 => (rows - 1) as f64,
            SdKind::Sample => 1.0,
        };
        let mut mean = Vec::with_capacity(x.ncols());
        let mut scale = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let m = col.sum() / rows as f64;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / divisor;
            let sd = var.sqrt();
            mean.push(m);
            // tiny relative spread is rounding noise on a constant column
            scale.push(if sd > 1e-12 * m.abs().max(f64::MIN_POSITIVE) && sd.is_finite() { sd } else { 1.0 });
        }
        StandardizationStats { mean, scale }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn is_identity(&self) -> bool {
        self.mean.iter().all(|&m| m == 0.0) && self.scale.iter().all(|&s| s == 1.0)
    }

    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>, DataError> {
        self.check(x.ncols())?;
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (m, s) = (self.mean[j], self.scale[j]);
            col.mapv_inplace(|v| (v - m) / s);
        }
        Ok(out)
    }

    pub fn apply_row(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>, DataError> {
        self.check(x.len())?;
        Ok(x.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.scale[j]).collect())
    }

    fn check(&self, n: usize) -> Result<(), DataError> {
        if n == self.mean.len() {
            Ok(())
        } else {
            Err(DataError::Shape(format!("{n} features, stats for {}", self.mean.len())))
        }
    }
}

pub fn fit_standardizer(d: &Dataset) -> StandardizationStats {
    StandardizationStats::fit(d.features(), SdKind::Population)
}

pub fn apply_standardizer(stats: &StandardizationStats, d: &Dataset) -> Result<Dataset, DataError> {
    d.with_features(stats.apply(d.features())?)
}

/// How to divide a dataset into training and test rows.
#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Shuffled split; the training side gets `round(N * fraction)` rows, halves rounding up.
    Fraction(f64),
    /// Explicit zero-based training rows; the rest is the test side.
    Indices(Vec<usize>),
}

/// Training-side size for a fractional split.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).round() as usize
}

/// Returns `(train, test)` row indices; train rows are in shuffled order for
/// fractional splits and in file order for explicit ones, test rows ascending.
pub fn split_indices(n: usize, spec: &SplitSpec, seed: u64) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let (train, mut test) = match spec {
        SplitSpec::Fraction(f) => {
            if !(f.is_finite() && *f > 0.0 && *f < 1.0) {
                return Err(DataError::Config(format!("train fraction {f} must lie in (0, 1)")));
            }
            let k = train_size(n, *f);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let test = idx.split_off(k);
            (idx, test)
        }
        SplitSpec::Indices(train) => {
            let mut seen = vec![false; n];
            for &i in train {
                if i >= n {
                    return Err(DataError::Config(format!("split index {i} out of range for {n} rows")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(DataError::Config(format!("split index {i} listed twice")));
                }
            }
            let test = (0..n).filter(|&i| !seen[i]).collect();
            (train.clone(), test)
        }
    };
    if train.is_empty() || test.is_empty() {
        return Err(DataError::Config(format!(
            "split leaves {} training and {} test rows",
            train.len(),
            test.len()
        )));
    }
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(d: &Dataset, spec: &SplitSpec, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let (train, test) = split_indices(d.n_samples(), spec, seed)?;
    Ok((d.select(&train), d.select(&test)))
}

/// One zero-based index per line; blank lines and `#` comments are skipped.
pub fn read_index_file(path: impl AsRef<Path>) -> Result<Vec<usize>, DataError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| DataError::io(path, e))?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v = t.parse::<usize>().map_err(|e| DataError::Parse {
            row: lineno as u64 + 1,
            column: 0,
            message: format!("bad index {t:?}: {e}"),
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_index_file(path: impl AsRef<Path>, idx: &[usize]) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut f = io::BufWriter::new(File::create(path).map_err(|e| DataError::io(path, e))?);
    for i in idx {
        writeln!(f, "{i}").map_err(|e| DataError::io(path, e))?;
    }
    f.flush().map_err(|e| DataError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn catalog_follows_first_appearance() {
        let f = write_tmp("x,y,class\n1,2,a\n3,4,b\n5,6,a\n");
        let d = load_csv(f.path(), &LoadOptions::default()).unwrap();
        assert_eq!(d.n_samples(), 3);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.catalog(), &["a".to_string(), "b".to_string()]);
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.feature_names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(d.label_name(), "class");
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let f = write_tmp("x,y,class\n1,2,a\n3,oops,b\n");
        match load_csv(f.path(), &LoadOptions::default()) {
            Err(DataError::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn impute_uses_column_mean() {
        let f = write_tmp("x,y,class\n1,2,a\n3,?,b\n5,6,a\n");
        let opts = LoadOptions { impute_mean: true, ..LoadOptions::default() };
        let d = load_csv(f.path(), &opts).unwrap();
        assert_eq!(d.features()[[1, 1]], 4.0);
    }

    #[test]
    fn label_column_by_name_and_index() {
        let f = write_tmp("class,x\na,1\nb,2\n");
        let d = load_csv(f.path(), &LoadOptions { label: "class".parse().unwrap(), ..Default::default() }).unwrap();
        assert_eq!(d.features().column(0).to_vec(), vec![1.0, 2.0]);
        let d = load_csv(f.path(), &LoadOptions { label: LabelColumn::Index(0), ..Default::default() }).unwrap();
        assert_eq!(d.n_classes(), 2);
        assert!(matches!(
            load_csv(f.path(), &LoadOptions { label: "nope".parse().unwrap(), ..Default::default() }),
            Err(DataError::LabelColumn(_))
        ));
    }

    #[test]
    fn headerless_files() {
        let f = write_tmp("1,2,a\n3,4,b\n");
        let d = load_csv(f.path(), &LoadOptions { has_header: false, ..Default::default() }).unwrap();
        assert_eq!(d.n_samples(), 2);
    }

    #[test]
    fn missing_and_empty_files() {
        assert!(matches!(
            load_csv("/definitely/not/here.csv", &LoadOptions::default()),
            Err(DataError::MissingFile(_))
        ));
        let f = write_tmp("x,class\n");
        assert!(matches!(load_csv(f.path(), &LoadOptions::default()), Err(DataError::Empty)));
    }

    #[test]
    fn single_row_standardizer() {
        let x = array![[3.0, -1.0, 7.5]];
        let s = StandardizationStats::fit(x.view(), SdKind::Population);
        assert_eq!(s.mean(), &[3.0, -1.0, 7.5]);
        assert_eq!(s.scale(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn population_sd_maps_to_unit() {
        let x = array![[0.0], [2.0]];
        let s = StandardizationStats::fit(x.view(), SdKind::Population);
        assert_eq!(s.mean(), &[1.0]);
        assert_eq!(s.scale(), &[1.0]);
        assert_eq!(s.apply(x.view()).unwrap(), array![[-1.0], [1.0]]);
        let s = StandardizationStats::fit(x.view(), SdKind::Sample);
        assert!((s.scale()[0] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn split_rounding_and_determinism() {
        assert_eq!(train_size(11, 0.5), 6);
        assert_eq!(train_size(120, 0.5), 60);
        let (a, b) = split_indices(11, &SplitSpec::Fraction(0.5), 9).unwrap();
        assert_eq!((a.len(), b.len()), (6, 5));
        assert_eq!(split_indices(11, &SplitSpec::Fraction(0.5), 9).unwrap(), (a, b));
        assert!(split_indices(1, &SplitSpec::Fraction(0.5), 0).is_err());
    }

    #[test]
    fn explicit_split_indices() {
        let (tr, te) = split_indices(5, &SplitSpec::Indices(vec![4, 0]), 0).unwrap();
        assert_eq!(tr, vec![4, 0]);
        assert_eq!(te, vec![1, 2, 3]);
        assert!(split_indices(5, &SplitSpec::Indices(vec![5]), 0).is_err());
        assert!(split_indices(5, &SplitSpec::Indices(vec![1, 1]), 0).is_err());
        assert!(split_indices(2, &SplitSpec::Indices(vec![0, 1]), 0).is_err());
    }

    #[test]
    fn index_file_round_trip() {
        let f = tempfile::NamedTempFile::new().unwrap();
        write_index_file(f.path(), &[3, 1, 4]).unwrap();
        assert_eq!(read_index_file(f.path()).unwrap(), vec![3, 1, 4]);
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new("t", array![[1.0]], vec![0, 1], vec!["a".into()]).is_err());
        assert!(Dataset::new("t", array![[f64::NAN]], vec![0], vec!["a".into()]).is_err());
        assert!(Dataset::new("t", array![[1.0]], vec![1], vec!["a".into()]).is_err());
    }
}
