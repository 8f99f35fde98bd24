//! Classifier-free guidance and shortcut (step-size conditioned) training
//! targets.

use lift3d_core::rng::derive;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::{Condition, Modality, VelocityField};
use crate::flow::{check_time, sample_fm_term, squared_distance, FlowBatch, FlowSample, ModalityWeights};

/// `v_u + w (v_c − v_u)`.
pub fn cfg_combine(v_uncond: &[f64], v_cond: &[f64], w_cfg: f64) -> Result<Vec<f64>> {
    check_len(v_uncond.len(), v_cond.len())?;
    Ok(v_uncond.iter().zip(v_cond).map(|(u, c)| u + w_cfg * (c - u)).collect())
}

/// A training target that enters losses as data only.
#[derive(Debug, Clone, PartialEq)]
pub struct StopGrad(Vec<f64>);

impl StopGrad {
    pub fn value(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Guided velocity: two evaluations when conditioned, one otherwise.
pub(crate) fn guided<V: VelocityField + ?Sized>(
    vf: &V,
    modality: Modality,
    x: &[f64],
    cond: Option<&Condition>,
    tau: f64,
    d: f64,
    w_cfg: f64,
) -> Result<Vec<f64>> {
    let vu = vf.velocity(modality, x, None, tau, d);
    check_len(x.len(), vu.len())?;
    match cond {
        Some(c) => {
            let vc = vf.velocity(modality, x, Some(c), tau, d);
            check_len(x.len(), vc.len())?;
            cfg_combine(&vu, &vc, w_cfg)
        }
        None => Ok(vu),
    }
}

/// Average velocity of two guided steps of size `d` from `x_τ`, the target
/// for a single step of size `2d`.
pub fn consistency_target<V: VelocityField + ?Sized>(
    vf: &V,
    modality: Modality,
    x_tau: &[f64],
    cond: Option<&Condition>,
    tau: f64,
    d: f64,
    w_cfg: f64,
) -> Result<StopGrad> {
    check_time(tau)?;
    if !(d > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {d}")));
    }
    let end = tau + 2.0 * d;
    if end > 1.0 {
        return Err(Error::StepOvershoot { tau, d, end });
    }
    // x̃_{τ+2d} − x_τ is accumulated as the sum of the two displacements,
    // which avoids cancellation when d is small relative to x.
    let v0 = guided(vf, modality, x_tau, cond, tau, d, w_cfg)?;
    let step0: Vec<f64> = v0.iter().map(|v| d * v).collect();
    let x1: Vec<f64> = x_tau.iter().zip(&step0).map(|(x, s)| x + s).collect();
    let v1 = guided(vf, modality, &x1, cond, tau + d, d, w_cfg)?;
    Ok(StopGrad(step0.iter().zip(&v1).map(|(s, v)| (s + d * v) / (2.0 * d)).collect()))
}

/// Training-time sampling of the flow-matching/self-consistency branch and
/// of `(τ, d)` for the self-consistency term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShortcutConfig {
    /// Probability of the flow-matching branch.
    pub mix: f64,
    /// Guidance strength baked into the consistency target.
    pub w_cfg: f64,
    /// `d = 2^-k` with `k` uniform in `[min_exponent, max_exponent]`.
    pub min_exponent: u32,
    pub max_exponent: u32,
    pub seed: u64,
}

impl Default for ShortcutConfig {
    fn default() -> Self {
        Self { mix: 0.75, w_cfg: 2.0, min_exponent: 1, max_exponent: 7, seed: 0 }
    }
}

impl ShortcutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::InvalidArgument("mix must lie in [0, 1]".into()));
        }
        if self.min_exponent == 0 || self.min_exponent > self.max_exponent || self.max_exponent > 52 {
            return Err(Error::InvalidArgument("step exponents must satisfy 1 <= min <= max <= 52".into()));
        }
        Ok(())
    }
}

/// Draws `d = 2^-k` and `τ` uniformly from `{0, d, 2d, …, 1 − 2d}`, so a
/// `2d` jump from `τ` ends inside `[0, 1]`.
pub fn sample_tau_d<R: Rng + ?Sized>(rng: &mut R, config: &ShortcutConfig) -> (f64, f64) {
    let k = rng.random_range(config.min_exponent..=config.max_exponent);
    let cells = 1u64 << k;
    let d = 1.0 / cells as f64;
    let j = rng.random_range(0..cells - 1);
    (j as f64 * d, d)
}

/// Which term a batch element contributed to [`shortcut_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum Branch {
    FlowMatching,
    SelfConsistency { tau: f64, d: f64 },
}

/// Branch drawn for batch element `index`; independent of evaluation order.
pub fn draw_branch(config: &ShortcutConfig, index: usize) -> Branch {
    let mut rng = derive(config.seed, index as u64);
    if rng.random::<f64>() < config.mix {
        Branch::FlowMatching
    } else {
        let (tau, d) = sample_tau_d(&mut rng, config);
        Branch::SelfConsistency { tau, d }
    }
}

fn consistency_term<V: VelocityField + ?Sized>(
    vf: &V,
    s: &FlowSample,
    weights: &ModalityWeights,
    tau: f64,
    d: f64,
    w_cfg: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (&m, pair) in &s.pairs {
        let x = pair.at(tau)?;
        let target = consistency_target(vf, m, &x, s.condition.as_ref(), tau, d, w_cfg)?;
        let pred = vf.velocity(m, &x, s.condition.as_ref(), tau, 2.0 * d);
        check_len(x.len(), pred.len())?;
        total += weights.get(m) * squared_distance(target.value(), &pred);
    }
    Ok(total)
}

/// Batch mean of the per-element flow-matching term (at the element's own
/// `τ`, `d = 0`) or self-consistency term (at a drawn `(τ, d)`, predicting
/// a `2d` step), chosen per element with probability `mix`.
pub fn shortcut_loss<V: VelocityField + ?Sized>(
    vf: &V,
    batch: &FlowBatch,
    weights: &ModalityWeights,
    config: &ShortcutConfig,
) -> Result<f64> {
    weights.validate()?;
    config.validate()?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let terms: Vec<f64> = batch
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| match draw_branch(config, i) {
            Branch::FlowMatching => sample_fm_term(vf, s, weights),
            Branch::SelfConsistency { tau, d } => consistency_term(vf, s, weights, tau, d, config.w_cfg),
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / batch.len() as f64)
}
