//! k-fold cross-validated grid search over the submodel parameter grids.
//!
//! A grid is the product `alphas x margins x lambda exponents`, iterated in
//! that order (alpha outermost). The chosen cell has the highest mean fold
//! accuracy; ties go to the smaller `lambda`, then to the earlier cell.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::classifier::{Classifier, ClassifierError, TrainOptions};
use crate::dataio::Dataset;
use crate::loss::{Family, LossSpec};
use crate::ErrorKind;

#[derive(Debug, Error)]
pub enum ModelSelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("every grid cell failed; first failure: {0}")]
    AllCellsInvalid(String),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

impl ModelSelError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ModelSelError::Config(_) => ErrorKind::Config,
            ModelSelError::AllCellsInvalid(_) => ErrorKind::Numeric,
            ModelSelError::Classifier(e) => e.kind(),
        }
    }
}

/// The named submodels with their default parameter grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Submodel {
    HMinus1,
    HMinus2,
    HMinus3,
    HMinus4,
    HPlus1,
    HPlus2,
    HPlus3,
    LMinus,
    LPlus,
    Hinge0,
    Logistic,
}

const H_MARGINS: [f64; 4] = [-1.0, -0.8, -0.6, -0.4];
const HPLUS_MARGINS: [f64; 4] = [1.0, 0.8, 0.6, 0.4];

impl Submodel {
    pub const ALL: [Submodel; 11] = [
        Submodel::HMinus1,
        Submodel::HMinus2,
        Submodel::HMinus3,
        Submodel::HMinus4,
        Submodel::HPlus1,
        Submodel::HPlus2,
        Submodel::HPlus3,
        Submodel::LMinus,
        Submodel::LPlus,
        Submodel::Hinge0,
        Submodel::Logistic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Submodel::HMinus1 => "H-1",
            Submodel::HMinus2 => "H-2",
            Submodel::HMinus3 => "H-3",
            Submodel::HMinus4 => "H-4",
            Submodel::HPlus1 => "H+1",
            Submodel::HPlus2 => "H+2",
            Submodel::HPlus3 => "H+3",
            Submodel::LMinus => "L-",
            Submodel::LPlus => "L+",
            Submodel::Hinge0 => "hinge0",
            Submodel::Logistic => "logistic",
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Submodel::HMinus1 | Submodel::HMinus2 | Submodel::HMinus3 | Submodel::HMinus4 => Family::HMinus,
            Submodel::HPlus1 | Submodel::HPlus2 | Submodel::HPlus3 => Family::HPlus,
            Submodel::LMinus => Family::LMinus,
            Submodel::LPlus => Family::LPlus,
            Submodel::Hinge0 => Family::HingeZero,
            Submodel::Logistic => Family::LogisticOne,
        }
    }

    pub fn default_alphas(&self) -> Vec<f64> {
        match self {
            Submodel::HMinus1 => vec![0.2, 0.4, 0.6, 0.8],
            Submodel::HMinus2 => vec![0.5],
            Submodel::HMinus3 => vec![2.0 / 3.0],
            Submodel::HMinus4 => vec![0.75],
            Submodel::HPlus1 => vec![1.2, 1.4, 1.6, 1.8],
            Submodel::HPlus2 => vec![2.0],
            Submodel::HPlus3 => vec![1.5],
            Submodel::LMinus => vec![0.8, 5.0 / 6.0, 7.0 / 8.0, 11.0 / 12.0],
            Submodel::LPlus => vec![4.0 / 3.0, 5.0 / 4.0, 8.0 / 7.0, 13.0 / 12.0],
            Submodel::Hinge0 => vec![0.0],
            Submodel::Logistic => vec![1.0],
        }
    }

    /// `c_alpha` values for the hinge families, `c` values for the logistic ones.
    pub fn default_margins(&self) -> Vec<f64> {
        match self {
            Submodel::HMinus1 | Submodel::Hinge0 => vec![-1.0],
            Submodel::HMinus2 | Submodel::HMinus3 | Submodel::HMinus4 => H_MARGINS.to_vec(),
            Submodel::HPlus1 => vec![1.0],
            Submodel::HPlus2 | Submodel::HPlus3 => HPLUS_MARGINS.to_vec(),
            Submodel::LMinus | Submodel::LPlus | Submodel::Logistic => vec![1.0],
        }
    }

    /// Every `(alpha, margin)` of the default grid, resolved.
    pub fn specs(&self) -> Vec<LossSpec> {
        let family = self.family();
        let mut out = Vec::new();
        for &a in &self.default_alphas() {
            for &m in &self.default_margins() {
                out.push(LossSpec::resolve(family, a, m).expect("default grids are valid"));
            }
        }
        out
    }
}

impl fmt::Display for Submodel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Submodel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Submodel::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(&lower))
            .or(match lower.as_str() {
                "svm" | "hinge" => Some(Submodel::Hinge0),
                _ => None,
            })
            .ok_or_else(|| {
                let names: Vec<&str> = Submodel::ALL.iter().map(|m| m.name()).collect();
                format!("unknown model {s:?}; expected one of {}", names.join(", "))
            })
    }
}

pub const DEFAULT_LAMBDA_EXPONENTS: std::ops::RangeInclusive<i32> = -14..=5;
pub const DEFAULT_FOLDS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub family: Family,
    pub alphas: Vec<f64>,
    pub margins: Vec<f64>,
    /// `lambda = 2^d` for each `d`.
    pub lambda_exponents: Vec<i32>,
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl GridConfig {
    pub fn for_submodel(m: Submodel, seed: u64) -> Self {
        GridConfig {
            family: m.family(),
            alphas: m.default_alphas(),
            margins: m.default_margins(),
            lambda_exponents: DEFAULT_LAMBDA_EXPONENTS.collect(),
            folds: DEFAULT_FOLDS,
            seed,
            stratified: false,
        }
    }

    /// A single `(alpha, margin)` with the default lambda grid.
    pub fn single(family: Family, alpha: f64, margin: f64, seed: u64) -> Self {
        GridConfig {
            family,
            alphas: vec![alpha],
            margins: vec![margin],
            lambda_exponents: DEFAULT_LAMBDA_EXPONENTS.collect(),
            folds: DEFAULT_FOLDS,
            seed,
            stratified: false,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.alphas.len() * self.margins.len() * self.lambda_exponents.len()
    }

    /// `(alpha, margin, lambda exponent)` in grid order.
    pub fn cells(&self) -> Vec<(f64, f64, i32)> {
        let mut out = Vec::with_capacity(self.n_cells());
        for &a in &self.alphas {
            for &m in &self.margins {
                for &d in &self.lambda_exponents {
                    out.push((a, m, d));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvCell {
    pub alpha: f64,
    pub margin: f64,
    pub lambda_exponent: i32,
    pub lambda: f64,
    pub spec: Option<LossSpec>,
    pub fold_accuracy: Vec<f64>,
    /// `None` when the cell failed on some fold.
    pub mean_accuracy: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CVResult {
    pub cells: Vec<CvCell>,
    pub best: usize,
    pub folds: usize,
}

impl CVResult {
    pub fn best_cell(&self) -> &CvCell {
        &self.cells[self.best]
    }

    pub fn best_spec(&self) -> LossSpec {
        self.best_cell().spec.expect("the best cell is valid")
    }

    pub fn best_lambda(&self) -> f64 {
        self.best_cell().lambda
    }

    pub fn best_accuracy(&self) -> f64 {
        self.best_cell().mean_accuracy.expect("the best cell is valid")
    }

    pub fn invalid_cells(&self) -> impl Iterator<Item = &CvCell> {
        self.cells.iter().filter(|c| c.mean_accuracy.is_none())
    }

    /// One row per cell: parameters, per-fold accuracy, mean, and failure text.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["alpha".to_string(), "margin".into(), "c".into(), "lambda_exp".into(), "lambda".into()];
        header.extend((1..=self.folds).map(|f| format!("fold{f}")));
        header.extend(["mean".to_string(), "best".into(), "error".into()]);
        out.write_record(&header)?;
        for (i, c) in self.cells.iter().enumerate() {
            let mut rec = vec![
                format!("{}", c.alpha),
                format!("{}", c.margin),
                c.spec.map(|s| format!("{}", s.c())).unwrap_or_default(),
                c.lambda_exponent.to_string(),
                format!("{}", c.lambda),
            ];
            for f in 0..self.folds {
                rec.push(c.fold_accuracy.get(f).map(|a| format!("{a}")).unwrap_or_default());
            }
            rec.push(c.mean_accuracy.map(|a| format!("{a}")).unwrap_or_default());
            rec.push(if i == self.best { "1".into() } else { "0".into() });
            rec.push(c.error.clone().unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()
    }
}

/// Seeded shuffle cut into `k` contiguous blocks; the first `n % k` blocks get one extra row.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ModelSelError> {
    if k < 2 {
        return Err(ModelSelError::Config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(ModelSelError::Config(format!("{n} rows cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Like [`kfold_split`] but dealing each class round-robin across folds, so
/// class proportions are as even as possible. Fold sizes still differ by at most one.
pub fn stratified_kfold_split(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>, ModelSelError> {
    let n = labels.len();
    if k < 2 {
        return Err(ModelSelError::Config(format!("need at least 2 folds, got {k}")));
    }
    if n < k {
        return Err(ModelSelError::Config(format!("{n} rows cannot fill {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // stable sort by class keeps the shuffled order within each class
    idx.sort_by_key(|&i| labels[i]);
    let mut out = vec![Vec::new(); k];
    for (j, i) in idx.into_iter().enumerate() {
        out[j % k].push(i);
    }
    Ok(out)
}

/// `(train, validation)` datasets for every fold.
pub fn fold_datasets(d: &Dataset, folds: &[Vec<usize>]) -> Vec<(Dataset, Dataset)> {
    (0..folds.len())
        .map(|f| {
            let train: Vec<usize> =
                folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect();
            (d.select(&train), d.select(&folds[f]))
        })
        .collect()
}

fn validate(cfg: &GridConfig) -> Result<(), ModelSelError> {
    if cfg.alphas.is_empty() || cfg.margins.is_empty() || cfg.lambda_exponents.is_empty() {
        return Err(ModelSelError::Config("every grid axis needs at least one value".into()));
    }
    Ok(())
}

/// Cross-validated search over `cfg`. Cells and folds are trained in
/// parallel; the result does not depend on scheduling.
pub fn grid_search(d: &Dataset, cfg: &GridConfig, opts: &TrainOptions) -> Result<CVResult, ModelSelError> {
    validate(cfg)?;
    let folds = if cfg.stratified {
        stratified_kfold_split(d.labels(), cfg.folds, cfg.seed)?
    } else {
        kfold_split(d.n_samples(), cfg.folds, cfg.seed)?
    };
    grid_search_with_folds(d, cfg, &folds, opts)
}

pub fn grid_search_with_folds(
    d: &Dataset,
    cfg: &GridConfig,
    folds: &[Vec<usize>],
    opts: &TrainOptions,
) -> Result<CVResult, ModelSelError> {
    validate(cfg)?;
    let fold_data = fold_datasets(d, folds);
    let cells = cfg.cells();
    let specs: Vec<Result<LossSpec, String>> = cells
        .iter()
        .map(|&(a, m, _)| LossSpec::resolve(cfg.family, a, m).map_err(|e| e.to_string()))
        .collect();
    let k = fold_data.len();

    let results: Vec<Result<f64, String>> = (0..cells.len() * k)
        .into_par_iter()
        .map(|job| {
            let (ci, f) = (job / k, job % k);
            let spec = specs[ci].as_ref().map_err(Clone::clone)?;
            let lambda = 2f64.powi(cells[ci].2);
            let (train, val) = &fold_data[f];
            let clf = Classifier::train(train, spec, lambda, opts).map_err(|e| e.to_string())?;
            clf.accuracy(val).map_err(|e| e.to_string())
        })
        .collect();

    let mut out = Vec::with_capacity(cells.len());
    for (ci, &(alpha, margin, d_exp)) in cells.iter().enumerate() {
        let fold_res = &results[ci * k..(ci + 1) * k];
        let error = fold_res.iter().find_map(|r| r.as_ref().err().cloned());
        let fold_accuracy: Vec<f64> = fold_res.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let mean_accuracy = error.is_none().then(|| fold_accuracy.iter().sum::<f64>() / k as f64);
        if let Some(e) = &error {
            log::warn!("grid cell alpha={alpha} margin={margin} lambda=2^{d_exp} excluded: {e}");
        }
        out.push(CvCell {
            alpha,
            margin,
            lambda_exponent: d_exp,
            lambda: 2f64.powi(d_exp),
            spec: specs[ci].as_ref().ok().copied(),
            fold_accuracy,
            mean_accuracy,
            error,
        });
    }

    let mut best: Option<usize> = None;
    for (i, c) in out.iter().enumerate() {
        let Some(acc) = c.mean_accuracy else { continue };
        match best {
            None => best = Some(i),
            Some(b) => {
                let (bacc, blam) = (out[b].mean_accuracy.expect("valid"), out[b].lambda);
                if acc > bacc || (acc == bacc && c.lambda < blam) {
                    best = Some(i);
                }
            }
        }
    }
    match best {
        Some(best) => Ok(CVResult { cells: out, best, folds: k }),
        None => Err(ModelSelError::AllCellsInvalid(
            out.iter().find_map(|c| c.error.clone()).unwrap_or_else(|| "no cells".into()),
        )),
    }
}

/// Refits the selected cell on all of `d`.
pub fn fit_best(d: &Dataset, cv: &CVResult, opts: &TrainOptions) -> Result<Classifier, ModelSelError> {
    Ok(Classifier::train(d, &cv.best_spec(), cv.best_lambda(), opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn fold_sizes() {
        let f = kfold_split(8, 4, 1).unwrap();
        assert!(f.iter().all(|v| v.len() == 2));
        let f = kfold_split(10, 4, 1).unwrap();
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), vec![3, 3, 2, 2]);
        assert_eq!(kfold_split(10, 4, 7).unwrap(), kfold_split(10, 4, 7).unwrap());
        assert!(kfold_split(3, 4, 0).is_err());
        assert!(kfold_split(3, 1, 0).is_err());
    }

    #[test]
    fn stratified_balances_classes() {
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 8)).collect();
        let f = stratified_kfold_split(&labels, 4, 3).unwrap();
        for fold in &f {
            assert_eq!(fold.len(), 5);
            assert_eq!(fold.iter().filter(|&&i| labels[i] == 0).count(), 2);
        }
    }

    #[test]
    fn submodel_names_round_trip() {
        for m in Submodel::ALL {
            assert_eq!(m.name().parse::<Submodel>().unwrap(), m);
        }
        assert!("H-9".parse::<Submodel>().is_err());
    }

    #[test]
    fn default_grids_resolve() {
        assert_eq!(Submodel::HMinus2.specs().len(), 4);
        assert_eq!(Submodel::Hinge0.specs(), vec![LossSpec::hinge()]);
        assert_eq!(Submodel::Logistic.specs(), vec![LossSpec::logistic()]);
        let cfg = GridConfig::for_submodel(Submodel::HMinus4, 0);
        assert_eq!(cfg.lambda_exponents.first(), Some(&-14));
        assert_eq!(cfg.lambda_exponents.last(), Some(&5));
        assert_eq!(cfg.folds, 4);
        assert_eq!(cfg.n_cells(), 80);
    }

    #[test]
    fn all_invalid_cells_fail_the_search() {
        let x = Array2::from_shape_vec((4, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let d = Dataset::from_labels("t", x, &["a", "b", "a", "b"]).unwrap();
        let cfg = GridConfig {
            family: Family::HMinus,
            alphas: vec![0.5],
            margins: vec![1.0],
            lambda_exponents: vec![0],
            folds: 2,
            seed: 0,
            stratified: false,
        };
        assert!(matches!(grid_search(&d, &cfg, &TrainOptions::default()), Err(ModelSelError::AllCellsInvalid(_))));
    }
}
