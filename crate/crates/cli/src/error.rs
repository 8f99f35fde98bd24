use thiserror::Error;

use crate::{EXIT_DATA, EXIT_USAGE};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } => EXIT_DATA,
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.as_ref().display().to_string();
        move |source| CliError::Io { path, source }
    }
}

macro_rules! data_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error_from!(lift3d_core::Error, lift3d_render::Error, lift3d_engine::Error, lift3d_fm::Error, serde_json::Error, csv::Error);
