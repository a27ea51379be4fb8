use thiserror::Error;

/// Errors produced by solvers, simulators, controllers and ingestion.
///
/// Step/index fields are 1-based to match the hour numbering used in
/// reports and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    /// The instance is structurally broken (lengths, retention range,
    /// non-finite entries). Distinct from an infeasible instance.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("infeasible instance: constraints cannot be met at step {index}")]
    Infeasible { index: usize },

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    /// The solver detected a broken internal invariant (e.g. a value
    /// function that lost convexity). Indicates a bug, not bad input.
    #[error("internal consistency failure at step {index}: {detail}")]
    InternalConsistency { index: usize, detail: String },

    #[error("reference solver is limited to n <= {max}, got n = {got}")]
    OracleScale { max: usize, got: usize },

    #[error("scenario count {got} exceeds reference limit {max}")]
    OracleScenarios { max: usize, got: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("min-max solver stopped after {iterations} iterations with relative gap {gap:.3e}")]
    Convergence { gap: f64, iterations: usize },

    /// Carried storage state exceeds what the instance allows; impossible
    /// unless rollout invariants were violated upstream.
    #[error("state corruption at step {index}: {detail}")]
    StateCorruption { index: usize, detail: String },

    #[error("window subproblem infeasible at rollout step {step}")]
    WindowInfeasible { step: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("time series validation failed: {0}")]
    SeriesValidation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
