use thiserror::Error;

/// Crate-wide error type. Variants map to the failure classes of the
/// individual subsystems so callers (and the CLI) can categorize them.
#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("state encoding error: {0}")]
    Encoding(String),

    #[error("action index {index} out of range (action space size {size})")]
    ActionDecode { index: usize, size: usize },

    #[error("structural model error: {0}")]
    Model(String),

    #[error("singular system: the reduced stiffness matrix could not be factorized (mechanism or floating structure)")]
    SingularSystem,

    #[error("analysis input error: {0}")]
    AnalysisInput(String),

    #[error("infeasible action applied to environment: {0}")]
    InfeasibleAction(String),

    #[error("baseline generation failed after {retries} retries: {reason}")]
    BaselineExhausted { retries: u32, reason: String },

    #[error("network shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite loss during update (iteration {iteration}): policy={policy_loss} value={value_loss}")]
    NonFiniteLoss {
        iteration: u64,
        policy_loss: f64,
        value_loss: f64,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
