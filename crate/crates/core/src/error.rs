use thiserror::Error;

/// Failure modes of the torus construction.
///
/// `StepFailure` and `HypothesisViolation` are the two "mathematically
/// meaningful" variants: the first means a quantitative bound of the iteration
/// was violated mid-run, the second that the standing hypotheses fail on the
/// given problem data. Both carry enough context to name the offending
/// inequality or grid point.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("resonance violation at k={k:?}: divisor {divisor:.3e} below floor {floor:.3e}")]
    ResonanceViolation {
        k: Vec<i32>,
        divisor: f64,
        floor: f64,
    },

    #[error("precondition failure: {0}")]
    PreconditionFailure(String),

    #[error("step failure at iteration {step}: {detail}")]
    StepFailure { step: usize, detail: String },

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("validation failure: {0}")]
    ValidationFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}
