//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, design construction and the simulation harness.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum OlivaError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData { required: usize, actual: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("rank deficient design: smallest/largest eigenvalue ratio {ratio:.3e} below {tolerance:.1e}")]
    RankDeficient { ratio: f64, tolerance: f64 },

    #[error("singular penalized system: relative condition {condition:.3e} exceeds 1e12")]
    SingularSystem { condition: f64 },

    #[error("instrument cross-moment matrix is rank deficient: condition {condition:.3e} exceeds {limit:.1e}")]
    InstrumentRankDeficient { condition: f64, limit: f64 },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("confidence level must lie in [0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("degenerate treatment: sample treatment frequency is {0}")]
    DegenerateTreatment(f64),

    #[error("propensity score is constant in sample (variance {0:.3e})")]
    ConstantPropensity(f64),

    #[error("weak propensity instrument: |cov(x2, pi)| = {0:.3e}")]
    WeakPropensity(f64),

    #[error("Hermite polynomials implemented only up to degree 3, got {0}")]
    UnsupportedDegree(usize),

    #[error("augmented regression is collinear: first-stage residuals lie in the span of the regressors")]
    CollinearAugmentation,

    #[error("effective degrees of freedom {v_tau} reach the sample size {n}")]
    DegenerateTrace { v_tau: f64, n: usize },

    #[error("no tuning point in the grid produced a valid fit")]
    AllScoresInfinite,

    #[error("invalid DGP specification: {0}")]
    InvalidDgp(String),

    #[error("need non-empty statistic samples for both null and alternative")]
    InsufficientSamples,

    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: String,
        message: String,
    },

    #[error("column role error: {0}")]
    RoleError(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, OlivaError>;
