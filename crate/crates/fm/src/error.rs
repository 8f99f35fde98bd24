use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("time {0} outside [0, 1]")]
    InvalidTime(f64),
    #[error("step {d} from time {tau} overshoots 1 (tau + 2d = {end})")]
    StepOvershoot { tau: f64, d: f64, end: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { expected, found })
    }
}
