use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("map generation failed after {attempts} attempts: {detail}")]
    Generation { attempts: usize, detail: String },
    #[error("invalid config field `{field}`: {detail}")]
    Config { field: &'static str, detail: String },
    #[error("malformed map file: {0}")]
    MapFormat(String),
    #[error("contract violation in {op}: {detail}")]
    Contract { op: &'static str, detail: String },
    #[error(transparent)]
    Tensor(#[from] symnav_tensor::TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl EnvError {
    pub(crate) fn config(field: &'static str, detail: impl Into<String>) -> Self {
        EnvError::Config {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(op: &'static str, detail: impl Into<String>) -> Self {
        EnvError::Contract {
            op,
            detail: detail.into(),
        }
    }
}
