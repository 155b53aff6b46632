use symnav_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid config field `{field}`: {detail}")]
    Config { field: &'static str, detail: String },
    #[error("checkpoint is for variant {found}, expected {expected}")]
    VariantMismatch { expected: String, found: String },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl NnError {
    pub(crate) fn config(field: &'static str, detail: impl Into<String>) -> Self {
        NnError::Config {
            field,
            detail: detail.into(),
        }
    }
}
