use thiserror::Error;

/// Errors produced across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty or degenerate configuration: {0}")]
    EmptyOrDegenerateConfig(String),

    #[error("too few positives to evaluate group metrics: need at least {min}, would get {got}")]
    InsufficientPositives { min: usize, got: usize },

    #[error("group share {0} is degenerate; use the explicit degenerate flag to permit exact 0 or 1")]
    DegenerateGroupShare(f64),

    #[error("prevalence ratio {c} is infeasible: {reason}")]
    InfeasibleDisparity { c: f64, reason: String },

    #[error("covariance matrix is not symmetric positive-definite")]
    InvalidCovariance,

    #[error("noise target is infeasible: {0}")]
    InfeasibleNoiseTarget(String),

    #[error("conditional features x1,x2 are missing; inject class-conditional bias first")]
    MissingConditionalFeatures,

    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    #[error("training data contains a single observed class")]
    DegenerateLabels,

    #[error("training diverged to a non-finite loss; lower the learning rate")]
    DivergedTraining,

    #[error("min_leaf {min_leaf} exceeds the training set size {n}")]
    DegenerateSplitConfig { min_leaf: usize, n: usize },

    #[error("feature layout mismatch: model expects {expected} features, dataset has {got}")]
    FeatureLayoutMismatch { expected: usize, got: usize },

    #[error("hyperparameter space is empty")]
    EmptySpace,

    #[error("cannot fit an FPR threshold without negative labels")]
    NoNegativesForFPR,

    #[error("group {0} has no negative labels to fit a threshold on")]
    NoNegativesForGroup(&'static str),

    #[error("group column required for group-wise thresholds")]
    MissingGroups,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("timeline too short: need at least {need} months, have {have}")]
    InsufficientTimeline { need: u32, have: u32 },

    #[error("report schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
