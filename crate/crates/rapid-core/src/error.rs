use thiserror::Error;

/// Errors surfaced by the risk-assessment toolkit.
#[derive(Debug, Error)]
pub enum RapidError {
    // dataset
    #[error("empty file: {0}")]
    EmptyFile(String),
    #[error("malformed CSV at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("value {value:?} is not a level of column {column:?}")]
    UnknownLevel { column: String, value: String },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("invalid fold count k={k} for n={n} (need 2 <= k <= n)")]
    InvalidK { k: usize, n: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema error: {0}")]
    Schema(String),

    // learners
    #[error("training data is empty")]
    EmptyTraining,
    #[error("target column {0:?} has a single observed class; cannot fit a classifier")]
    DegenerateTarget(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    // risk
    #[error("empty column {0:?}")]
    EmptyColumn(String),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("class {0:?} missing from baseline marginals")]
    ClassNotInBaseline(String),
    #[error("sensitive column {column:?} has incompatible kinds in original and released data")]
    IncompatibleKinds { column: String },
    #[error("holdout target set is empty")]
    EmptyTargetSet,
    #[error("results have mixed configurations: {0}")]
    MixedConfigurations(String),
    #[error("invalid threshold: {0}")]
    InvalidThreshold(String),

    // uncertainty
    #[error("too few bootstrap replicates: {0} (need >= 100)")]
    TooFewReplicates(usize),
    #[error("invalid counts: k={k}, n={n}")]
    InvalidCounts { k: usize, n: usize },

    // calibration
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("too few permutations: {0} (need >= 20)")]
    TooFewPermutations(usize),

    // synthesizer
    #[error("too few rows for synthesis: {0} (need >= 10)")]
    TooFewRows(usize),
    #[error("invalid synthesis plan: {0}")]
    InvalidPlan(String),
    #[error("synthesizer failed on fold(s): {}", format_fold_failures(.0))]
    SynthesizerFailed(Vec<(usize, String)>),

    // simgen
    #[error("kappa must be non-negative, got {0}")]
    NegativeKappa(f64),
    #[error("empty kappa grid")]
    EmptyGrid,
    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    // attribution
    #[error("continuous grouping column {0:?} requires a binning spec")]
    MissingBinSpec(String),
    #[error("risk flags are degenerate (single value); cannot fit attribution model")]
    DegenerateFlags,
}

fn format_fold_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(fold, msg)| format!("fold {fold}: {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, RapidError>;
