//! Fixed-step Euler integration from noise (`τ = 0`) to data (`τ = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::{Condition, Modality, VelocityField};
use crate::shortcut::guided;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub steps: usize,
    pub w_cfg: f64,
    /// Guide only the first `⌈steps / 2⌉` steps; otherwise every step.
    pub cfg_half_schedule: bool,
    /// One conditional evaluation per step with the step size as `d`.
    pub shortcut_mode: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { steps: 25, w_cfg: 2.0, cfg_half_schedule: true, shortcut_mode: false }
    }
}

impl SamplerConfig {
    pub fn shortcut(steps: usize) -> Self {
        Self { steps, w_cfg: 1.0, cfg_half_schedule: false, shortcut_mode: true }
    }

    pub fn guided_steps(&self) -> usize {
        if self.shortcut_mode {
            0
        } else if self.cfg_half_schedule {
            self.steps.div_ceil(2)
        } else {
            self.steps
        }
    }

    /// Function evaluations for a conditioned run.
    pub fn expected_nfe(&self) -> usize {
        self.steps + self.guided_steps()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutput {
    pub x1: Vec<f64>,
    pub nfe: usize,
}

pub fn euler_sample<V: VelocityField + ?Sized>(
    vf: &V,
    modality: Modality,
    x0: &[f64],
    cond: Option<&Condition>,
    config: &SamplerConfig,
) -> Result<SampleOutput> {
    if config.steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let dt = 1.0 / config.steps as f64;
    let guided_steps = config.guided_steps();
    let mut x = x0.to_vec();
    let mut nfe = 0;
    for i in 0..config.steps {
        let tau = i as f64 * dt;
        let v = if config.shortcut_mode {
            nfe += 1;
            vf.velocity(modality, &x, cond, tau, dt)
        } else if i < guided_steps && cond.is_some() {
            nfe += 2;
            guided(vf, modality, &x, cond, tau, 0.0, config.w_cfg)?
        } else {
            nfe += 1;
            vf.velocity(modality, &x, cond, tau, 0.0)
        };
        check_len(x.len(), v.len())?;
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += dt * vi;
        }
    }
    Ok(SampleOutput { x1: x, nfe })
}
