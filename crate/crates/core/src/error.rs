use symnav_env::EnvError;
use symnav_nn::NnError;
use symnav_tensor::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("config line {line}: {detail}")]
    ConfigLine { line: usize, detail: String },
    #[error("invalid config field `{field}`: {detail}")]
    Config { field: &'static str, detail: String },
    #[error("update {update} aborted: {detail}")]
    NonFinite { update: usize, detail: String },
    #[error("environment {worker}, episode {episode}: {source}")]
    Episode {
        worker: usize,
        episode: usize,
        #[source]
        source: EnvError,
    },
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },
}

impl CoreError {
    pub(crate) fn config(field: &'static str, detail: impl Into<String>) -> Self {
        CoreError::Config {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        CoreError::Contract {
            op,
            detail: detail.into(),
        }
    }
}
