//! Command-line front end for the disclosure-risk toolkit.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 per-fold
//! synthesizer failure during cross-validation. The measured risk level
//! never affects the exit code.

mod commands;
mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rapid_core::RapidError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    CvFolds(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::CvFolds(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::CvFolds(m) => m,
        }
    }
}

impl From<RapidError> for CliError {
    fn from(e: RapidError) -> CliError {
        let msg = e.to_string();
        match e {
            RapidError::InvalidThreshold(_)
            | RapidError::InvalidK { .. }
            | RapidError::TooFewReplicates(_)
            | RapidError::TooFewPermutations(_)
            | RapidError::InvalidPlan(_)
            | RapidError::InvalidSimConfig(_)
            | RapidError::NegativeKappa(_)
            | RapidError::EmptyGrid
            | RapidError::MissingBinSpec(_) => CliError::Config(msg),
            RapidError::SynthesizerFailed(_) => CliError::CvFolds(msg),
            _ => CliError::Data(msg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttackerArg {
    Rf,
    Cart,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Symmetric,
    Stabilised,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    All,
    Holdout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InteractionsArg {
    None,
    TwoWay,
    ThreeWay,
}

/// Shared data/configuration flags for assessment-style subcommands.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// Original dataset CSV.
    #[arg(long)]
    pub original: Option<PathBuf>,
    /// Released dataset CSV; repeat for multiple replicates.
    #[arg(long)]
    pub released: Vec<PathBuf>,
    /// Optional schema JSON applied to both datasets.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Comma-separated quasi-identifier column names.
    #[arg(long, value_delimiter = ',')]
    pub qi: Vec<String>,
    /// Sensitive column name.
    #[arg(long)]
    pub sensitive: Option<String>,
    /// Attacker family; repeat for a multi-model envelope.
    #[arg(long = "attacker", value_enum)]
    pub attackers: Vec<AttackerArg>,
    /// Normalized-gain threshold for categorical targets.
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    /// Error tolerance for continuous targets.
    #[arg(long, default_value_t = 0.10)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Symmetric)]
    pub metric: MetricArg,
    /// Smoothing constant for relative error metrics.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    pub mode: ModeArg,
    /// File of original row indices (one per line) scored in holdout mode.
    #[arg(long)]
    pub holdout_ids: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AssessArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Bootstrap replicates for the percentile interval.
    #[arg(long, default_value_t = 500)]
    pub boot: usize,
    /// Confidence level for all intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Write the per-record table (true value, prediction, risk fields).
    #[arg(long)]
    pub records_out: Option<PathBuf>,
    /// Report JSON path; stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Precomputed class-probability CSV (class columns plus a `true`
    /// column); bypasses attacker training.
    #[arg(long)]
    pub probs_in: Option<PathBuf>,
    /// Baseline marginals for --probs-in, e.g. "healthy=0.6,sick=0.4".
    #[arg(long)]
    pub baselines: Option<String>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Threshold grid as start:stop:step.
    #[arg(long, default_value = "0.05:0.95:0.05")]
    pub grid: String,
    /// Curve CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub qi: Vec<String>,
    #[arg(long)]
    pub sensitive: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Built-in synthesizer selector.
    #[arg(long, default_value = "internal-cart")]
    pub synth: String,
    /// External synthesizer command (reads CSV on stdin, writes CSV on
    /// stdout); overrides --synth.
    #[arg(long)]
    pub synth_cmd: Option<String>,
    #[arg(long = "attacker", value_enum, default_value_t = AttackerArg::Rf)]
    pub attacker: AttackerArg,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.10)]
    pub epsilon: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Symmetric)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Comma-separated kappa grid.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long = "attacker", value_enum, default_value_t = AttackerArg::Rf)]
    pub attacker: AttackerArg,
    #[arg(long, default_value_t = 0.3)]
    pub tau: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Per-run results CSV (kappa, replication, rapid, accuracy).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Replicate count.
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output prefix: replicate i goes to <prefix>_<i>.csv.
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    /// Per-record CSV produced by `assess --records-out`.
    #[arg(long)]
    pub records: PathBuf,
    /// The original dataset the record rows index into.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub qi: Vec<String>,
    #[arg(long, value_enum, default_value_t = InteractionsArg::None)]
    pub interactions: InteractionsArg,
    /// Stratification column, optionally with a bin count as col:bins;
    /// repeatable. All named columns form one cross-classification.
    #[arg(long = "stratify-by")]
    pub stratify_by: Vec<String>,
    /// Conditioning values for a continuous QI in the prediction grid, as
    /// col=v1|v2|v3; repeatable.
    #[arg(long = "conditioning")]
    pub conditioning: Vec<String>,
    /// Coefficient table CSV (term, estimate, se, z); stdout when omitted.
    #[arg(long)]
    pub terms_out: Option<PathBuf>,
    /// Predicted log-odds grid CSV.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
    /// Stratified rates CSV.
    #[arg(long)]
    pub strata_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Assess disclosure risk of released data against the original.
    Assess(AssessArgs),
    /// Export a threshold-sensitivity curve.
    Curve(CurveArgs),
    /// Cross-validate a synthesizer's expected disclosure risk.
    Cv(CvArgs),
    /// Generate simulated health microdata.
    Simulate(SimulateArgs),
    /// Run a kappa dependency sweep (simulate, synthesize, assess).
    Sweep(SweepArgs),
    /// Produce synthetic replicates of a dataset.
    Synthesize(SynthesizeArgs),
    /// Stratify and model per-record risk flags.
    Attribute(AttributeArgs),
}

#[derive(Debug, Parser)]
#[command(name = "rapid", version, about = "Attribute-inference disclosure risk toolkit")]
struct Cli {
    /// Worker threads (default: all cores; RAPID_THREADS also honored).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

fn main() {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("RAPID_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .is_err()
        {
            eprintln!("warning: thread pool already initialized; --threads ignored");
        }
    }
    let result = match cli.cmd {
        Cmd::Assess(args) => commands::assess(args),
        Cmd::Curve(args) => commands::curve(args),
        Cmd::Cv(args) => commands::cv(args),
        Cmd::Simulate(args) => commands::simulate(args),
        Cmd::Sweep(args) => commands::sweep(args),
        Cmd::Synthesize(args) => commands::synthesize(args),
        Cmd::Attribute(args) => commands::attribute(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
