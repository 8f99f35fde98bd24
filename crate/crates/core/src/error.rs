use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),
    #[error("empty point cloud")]
    EmptyCloud,
    #[error("zero extent: all points coincide")]
    ZeroExtent,
    #[error("degenerate 6D rotation")]
    Degenerate6D,
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("point {index} lies outside the voxel domain")]
    OutOfDomain { index: usize },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("{n} points exceeds the exact EMD cap of {cap}; use emd_approx")]
    EmdCapExceeded { n: usize, cap: usize },
    #[error("sinkhorn did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
