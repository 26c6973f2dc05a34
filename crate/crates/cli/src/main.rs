//! `logitron`: train, predict, cross-validate, benchmark and sample loss curves.
//!
//! Exit codes: 0 success, 1 other failure, 2 data problem (missing or
//! malformed input), 3 numerical failure, 64 usage error.

mod commands;
mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use logitron::modelsel::{DEFAULT_FOLDS, DEFAULT_LAMBDA_EXPONENTS};
use logitron::{ErrorKind, Submodel};

#[derive(Debug, Parser)]
#[command(name = "logitron", version, about = "Linear classifiers trained with Logitron losses", args_override_self = true)]
struct Cli {
    /// Read defaults from a `key = value` file; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for cross-validation and benchmarks (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model, directly or after cross-validated selection, and save it.
    Train(TrainArgs),
    /// Predict labels for the rows of a CSV file.
    Predict(PredictArgs),
    /// Run the cross-validation grid and report every cell.
    Cv(CvArgs),
    /// Repeated train/test benchmark over datasets and submodels.
    Bench(BenchArgs),
    /// Sample loss values and derivatives on a grid of margins.
    Losscurve(LossCurveArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Input CSV file.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Label column: `last`, `first`, a zero-based index or a header name.
    #[arg(long, default_value = "last")]
    label_col: String,

    /// The file has no header row.
    #[arg(long)]
    no_header: bool,

    /// Replace missing or non-numeric feature cells with the column mean.
    #[arg(long)]
    impute: bool,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Cross-validation folds.
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,

    /// Smallest `d` in the `lambda = 2^d` grid.
    #[arg(long, default_value_t = *DEFAULT_LAMBDA_EXPONENTS.start(), allow_hyphen_values = true)]
    lambda_exp_min: i32,

    /// Largest `d` in the `lambda = 2^d` grid.
    #[arg(long, default_value_t = *DEFAULT_LAMBDA_EXPONENTS.end(), allow_hyphen_values = true)]
    lambda_exp_max: i32,

    /// Keep class proportions balanced across folds.
    #[arg(long)]
    stratified: bool,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Submodel: H-1..H-4, H+1..H+3, L-, L+, hinge0, logistic.
    #[arg(long)]
    model: Option<Submodel>,

    /// Loss parameter alpha; overrides the submodel's alpha grid.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,

    /// `c_alpha` for the hinge families, `c` for the logistic ones.
    #[arg(long, allow_hyphen_values = true)]
    margin: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    spec: SpecArgs,

    /// Regularisation weight for direct training (ignored with --cv).
    #[arg(long)]
    lambda: Option<f64>,

    /// Select (alpha, margin, lambda) by cross-validation first.
    #[arg(long)]
    cv: bool,

    #[command(flatten)]
    grid: GridArgs,

    /// Fold shuffling seed.
    #[arg(long, env = "LOGITRON_SEED", default_value_t = 0)]
    seed: u64,

    /// Train on raw features.
    #[arg(long)]
    no_standardize: bool,

    /// Model file to write.
    #[arg(long, default_value = "model.txt")]
    out: PathBuf,

    /// Also write the cross-validation cells as CSV.
    #[arg(long, value_name = "FILE")]
    cv_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model_file: PathBuf,

    /// Input CSV file.
    #[arg(long, value_name = "FILE")]
    data: PathBuf,

    /// Label column as for `train`, or `none` when the file has only features.
    #[arg(long, default_value = "last")]
    label_col: String,

    #[arg(long)]
    no_header: bool,

    /// Add one score column per class.
    #[arg(long)]
    margins: bool,

    /// Output CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,

    #[command(flatten)]
    spec: SpecArgs,

    #[command(flatten)]
    grid: GridArgs,

    #[arg(long, env = "LOGITRON_SEED", default_value_t = 0)]
    seed: u64,

    #[arg(long)]
    no_standardize: bool,

    /// Cell table CSV (default: standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Dataset CSV files, comma separated or repeated.
    #[arg(long, value_name = "FILE", value_delimiter = ',', required = true)]
    data: Vec<PathBuf>,

    #[arg(long, default_value = "last")]
    label_col: String,

    #[arg(long)]
    no_header: bool,

    #[arg(long)]
    impute: bool,

    /// Submodels, comma separated or repeated (default: all).
    #[arg(long, value_delimiter = ',')]
    model: Vec<Submodel>,

    /// Repetitions of split, selection and test.
    #[arg(long, default_value_t = 5)]
    reps: usize,

    #[arg(long, env = "LOGITRON_SEED", default_value_t = 0)]
    seed: u64,

    /// Share of each dataset used for training.
    #[arg(long, default_value_t = 0.5)]
    train_fraction: f64,

    #[command(flatten)]
    grid: GridArgs,

    #[arg(long)]
    no_standardize: bool,

    /// Fixed training rows for a dataset, as NAME=FILE with one index per line.
    #[arg(long, value_name = "NAME=FILE")]
    split: Vec<String>,

    /// Reference accuracies (`dataset,accuracy`) for racc.
    #[arg(long, value_name = "FILE")]
    reference: Option<PathBuf>,

    /// Report CSV (the aligned table always goes to standard output).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LossCurveArgs {
    /// Submodels whose default grids to sample, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    model: Vec<Submodel>,

    /// A single explicit alpha (with --margin); the family follows from alpha.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    margin: Option<f64>,

    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    z_min: f64,

    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    z_max: f64,

    /// Samples per curve, endpoints included.
    #[arg(long, default_value_t = 601)]
    points: usize,

    /// Orders of the generalised hinge baselines.
    #[arg(long, value_delimiter = ',', default_value = "1,2", allow_hyphen_values = true)]
    hinge_orders: Vec<f64>,

    /// Leave out the logistic, Perceptron and hinge baselines.
    #[arg(long)]
    no_baselines: bool,

    #[arg(long)]
    out: Option<PathBuf>,
}

/// A command-line mistake, reported with exit code 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_OTHER: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_USAGE: u8 = 64;

fn kind_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numeric => EXIT_NUMERIC,
        ErrorKind::Config => EXIT_USAGE,
        ErrorKind::Other => EXIT_OTHER,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use logitron::{bench, classifier, dataio, extmath, loss, modelsel, optim};
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return EXIT_USAGE;
        }
        if let Some(e) = cause.downcast_ref::<dataio::DataError>() {
            return kind_code(e.kind());
        }
        if let Some(e) = cause.downcast_ref::<classifier::ClassifierError>() {
            return kind_code(e.kind());
        }
        if let Some(e) = cause.downcast_ref::<modelsel::ModelSelError>() {
            return kind_code(e.kind());
        }
        if let Some(e) = cause.downcast_ref::<bench::BenchError>() {
            return kind_code(e.kind());
        }
        if let Some(e) = cause.downcast_ref::<optim::OptimError>() {
            return kind_code(e.kind());
        }
        if let Some(e) = cause.downcast_ref::<logitron::Error>() {
            return kind_code(e.kind());
        }
        if cause.is::<loss::LossError>() || cause.is::<extmath::ExtMathError>() {
            return EXIT_USAGE;
        }
    }
    EXIT_OTHER
}

fn parse(args: Vec<OsString>) -> anyhow::Result<Cli> {
    let cmd = Cli::command();
    let first = cmd.clone().try_get_matches_from(&args)?;
    let matches = match first.get_one::<PathBuf>("config") {
        None => first,
        Some(path) => {
            let entries = config::parse_file(path)?;
            let extra = config::extra_args(&cmd, &first, &entries)?;
            let mut merged = args;
            merged.extend(extra.into_iter().map(OsString::from));
            cmd.try_get_matches_from(merged)?
        }
    };
    Ok(Cli::from_arg_matches(&matches)?)
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().format_timestamp(None).init();
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => match e.downcast::<clap::Error>() {
            Ok(ce) => {
                let _ = ce.print();
                return ExitCode::from(match ce.kind() {
                    clap::error::ErrorKind::DisplayHelp
                    | clap::error::ErrorKind::DisplayVersion
                    | clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                    _ => EXIT_USAGE,
                });
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(exit_code(&e));
            }
        },
    };
    init_logging(cli.verbose);

    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_OTHER);
        }
    }

    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Predict(a) => commands::predict(a),
        Command::Cv(a) => commands::cv(a),
        Command::Bench(a) => commands::bench(a),
        Command::Losscurve(a) => commands::losscurve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// A downstream reader such as `head` closed the pipe.
fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|c| c.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}
