use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lift3d_core::Error),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("no valid pointmap pixels under the mask")]
    NoValidPixels,
    #[error("mask has no boundary pixels")]
    DegenerateMask,
    #[error("empty target mask")]
    EmptyTarget,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
