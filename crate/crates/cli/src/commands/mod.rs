pub mod engine;
pub mod eval;
pub mod fm;
pub mod icp;
pub mod refine;
pub mod renderpaste;

use std::path::Path;

use lift3d_core::Pose;
use lift3d_render::Camera;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::resolve;

/// A JSON value given inline or as a path to a JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Inline<T> {
    Value(T),
    Path(String),
}

impl<T: DeserializeOwned + Clone> Inline<T> {
    pub fn load(&self, base: &Path) -> Result<T, CliError> {
        match self {
            Inline::Value(v) => Ok(v.clone()),
            Inline::Path(p) => read_json(&resolve(base, p)),
        }
    }
}

pub type PoseRef = Inline<Pose>;
pub type CameraRef = Inline<Camera>;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Attaches the offending path to a library error.
pub fn at<T, E: std::fmt::Display>(path: &Path, r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub fn load_mesh(path: &Path) -> Result<lift3d_core::TriangleMesh, CliError> {
    at(path, lift3d_core::io::load_mesh(path))
}

pub fn read_at<T, E: std::fmt::Display>(path: std::path::PathBuf, f: impl FnOnce(&Path) -> Result<T, E>) -> Result<T, CliError> {
    let r = f(&path);
    at(&path, r)
}
