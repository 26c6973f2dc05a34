//! Linear classification with the Logitron family of convex surrogate losses.
//!
//! The crate is organised bottom-up:
//!
//! * [`extmath`]: extended logarithm/exponential and their domains
//! * [`loss`]: Logitron loss values, derivatives and baseline losses
//! * [`optim`]: the l2-regularised empirical risk and an L-BFGS solver
//! * [`classifier`]: binary and one-vs-all models, persistence
//! * [`modelsel`]: k-fold splits and grid search over the submodel grids
//! * [`dataio`]: CSV datasets, standardisation, train/test splits
//! * [`bench`]: multi-dataset benchmark runs, Friedman ranks and racc

pub mod bench;
pub mod classifier;
pub mod dataio;
pub mod extmath;
pub mod loss;
pub mod modelsel;
pub mod optim;

pub use classifier::{Classifier, TrainOptions};
pub use dataio::{Dataset, StandardizationStats};
pub use loss::{Family, LossSpec};
pub use modelsel::{GridConfig, Submodel};
pub use optim::{LinearModel, SolverSettings};

use thiserror::Error;

/// Union of the module errors, for callers that do not care which layer failed.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    ExtMath(#[from] extmath::ExtMathError),
    #[error(transparent)]
    Loss(#[from] loss::LossError),
    #[error(transparent)]
    Optim(#[from] optim::OptimError),
    #[error(transparent)]
    Classifier(#[from] classifier::ClassifierError),
    #[error(transparent)]
    ModelSel(#[from] modelsel::ModelSelError),
    #[error(transparent)]
    Data(#[from] dataio::DataError),
    #[error(transparent)]
    Bench(#[from] bench::BenchError),
}

/// Coarse failure category, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numeric,
    Config,
    Other,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::ExtMath(_) | Error::Loss(_) => ErrorKind::Numeric,
            Error::Optim(e) => e.kind(),
            Error::Classifier(e) => e.kind(),
            Error::ModelSel(e) => e.kind(),
            Error::Data(e) => e.kind(),
            Error::Bench(e) => e.kind(),
        }
    }
}
