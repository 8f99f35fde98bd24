use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("need at least {needed} candidates, got {got}")]
    TooFewCandidates { needed: usize, got: usize },
    #[error("quality {0} outside [0, 1]")]
    InvalidQuality(f64),
    #[error("invalid curriculum: {0}")]
    InvalidCurriculum(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no outcomes to fit")]
    NoOutcomes,
}
