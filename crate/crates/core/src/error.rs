use thiserror::Error;

/// Errors produced by the analysis and exploration engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no campaign data")]
    NoCampaignData,

    #[error("unknown metric `{0}` (expected sdc, due or sdc+due)")]
    UnknownMetric(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid program: {0}")]
    InvalidProgram(String),

    #[error("assembly error at line {line}: {message}")]
    Assembly { line: usize, message: String },

    #[error("golden run diverges: no HALT within {cap} cycles")]
    GoldenRunDiverges { cap: u64 },

    #[error("injection target out of range: {0}")]
    TargetOutOfRange(String),

    #[error("exhaustive campaign needs {pairs} injections, above the cap of {cap}; use a sampled campaign")]
    ExhaustiveCapExceeded { pairs: u64, cap: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("catalog validation failed at `{path}`: {message}")]
    Catalog { path: String, message: String },

    #[error("unknown technique `{0}`")]
    UnknownTechnique(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("no baseline errors for {0} improvement")]
    NoBaselineErrors(&'static str),

    #[error("group size {0} is not a power of two")]
    GroupSizeNotPowerOfTwo(usize),

    #[error("minimum spacing infeasible; violating pairs: {pairs:?}")]
    SpacingInfeasible { pairs: Vec<(u32, u32)> },

    #[error("target unreachable: {0}")]
    TargetUnreachable(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("invalid rule file: {0}")]
    Rules(String),

    #[error("schema mismatch: expected `{expected}`, found `{found}`")]
    SchemaMismatch { expected: String, found: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
