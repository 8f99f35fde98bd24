use std::path::{Path, PathBuf};

use lift3d_core::align::IcpConfig;
use lift3d_core::metrics::{LayoutEvalConfig, ShapeEvalConfig};
use lift3d_engine::EngineConfig;
use lift3d_refine::RefineConfig;
use lift3d_render::raster::Shading;
use lift3d_render::{CueConfig, FoConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Per-module configuration read from `--config`. Missing sections keep
/// their defaults; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Overrides {
    pub shape: ShapeEvalConfig,
    pub layout: LayoutEvalConfig,
    pub icp: IcpConfig,
    pub refine: RefineConfig,
    pub engine: EngineConfig,
    pub fo: FoConfig,
    pub cue: CueConfig,
    pub shading: Shading,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub overrides: Overrides,
}

impl RunConfig {
    pub fn new(seed: u64, threads: Option<usize>, config: Option<&Path>, out: Option<PathBuf>) -> Result<Self, CliError> {
        if threads == Some(0) {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        let overrides = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
                serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?
            }
            None => Overrides::default(),
        };
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        Ok(Self { seed, threads, out, overrides })
    }

    pub fn shape(&self) -> ShapeEvalConfig {
        ShapeEvalConfig { seed: self.seed, ..self.overrides.shape.clone() }
    }

    pub fn layout(&self) -> LayoutEvalConfig {
        LayoutEvalConfig { seed: self.seed, ..self.overrides.layout.clone() }
    }

    pub fn refine(&self) -> RefineConfig {
        RefineConfig { seed: self.seed, ..self.overrides.refine }
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out.as_deref().ok_or_else(|| CliError::Usage("this command requires --out".into()))
    }
}
