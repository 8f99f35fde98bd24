//! Rectified flow matching: linear interpolation paths, target velocities
//! and the modality-weighted regression loss.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::field::{Condition, LinearField, Modality, VelocityField};

pub(crate) fn check_time(tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::InvalidTime(tau))
    }
}

/// `x_τ = τ x1 + (1 − τ) x0`.
pub fn interp_state(x0: &[f64], x1: &[f64], tau: f64) -> Result<Vec<f64>> {
    check_len(x0.len(), x1.len())?;
    check_time(tau)?;
    Ok(x0.iter().zip(x1).map(|(a, b)| tau * b + (1.0 - tau) * a).collect())
}

/// `v = x1 − x0`.
pub fn target_velocity(x0: &[f64], x1: &[f64]) -> Result<Vec<f64>> {
    check_len(x0.len(), x1.len())?;
    Ok(x0.iter().zip(x1).map(|(a, b)| b - a).collect())
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Noise and clean states of one modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "(Vec<f64>, Vec<f64>)", into = "(Vec<f64>, Vec<f64>)")]
pub struct StatePair {
    x0: Vec<f64>,
    x1: Vec<f64>,
}

impl StatePair {
    pub fn new(x0: Vec<f64>, x1: Vec<f64>) -> Result<Self> {
        check_len(x0.len(), x1.len())?;
        Ok(Self { x0, x1 })
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x1(&self) -> &[f64] {
        &self.x1
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    pub fn at(&self, tau: f64) -> Result<Vec<f64>> {
        interp_state(&self.x0, &self.x1, tau)
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.x0.iter().zip(&self.x1).map(|(a, b)| b - a).collect()
    }
}

impl TryFrom<(Vec<f64>, Vec<f64>)> for StatePair {
    type Error = Error;

    fn try_from((x0, x1): (Vec<f64>, Vec<f64>)) -> Result<Self> {
        Self::new(x0, x1)
    }
}

impl From<StatePair> for (Vec<f64>, Vec<f64>) {
    fn from(p: StatePair) -> Self {
        (p.x0, p.x1)
    }
}

/// One batch element: every modality shares the condition and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub pairs: BTreeMap<Modality, StatePair>,
    pub condition: Option<Condition>,
    pub tau: f64,
}

impl FlowSample {
    pub fn new(pairs: BTreeMap<Modality, StatePair>, condition: Option<Condition>, tau: f64) -> Result<Self> {
        check_time(tau)?;
        Ok(Self { pairs, condition, tau })
    }

    /// A single-modality sample.
    pub fn single(modality: Modality, pair: StatePair, condition: Option<Condition>, tau: f64) -> Result<Self> {
        Self::new(BTreeMap::from([(modality, pair)]), condition, tau)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlowBatch {
    pub samples: Vec<FlowSample>,
}

impl FlowBatch {
    pub fn new(samples: Vec<FlowSample>) -> Result<Self> {
        for s in &samples {
            check_time(s.tau)?;
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Per-modality loss weights `λ_m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModalityWeights {
    pub shape: f64,
    pub rotation: f64,
    pub translation: f64,
    pub scale: f64,
}

impl Default for ModalityWeights {
    fn default() -> Self {
        Self { shape: 1.0, rotation: 0.1, translation: 1.0, scale: 0.1 }
    }
}

impl ModalityWeights {
    pub fn uniform(w: f64) -> Self {
        Self { shape: w, rotation: w, translation: w, scale: w }
    }

    pub fn get(&self, m: Modality) -> f64 {
        match m {
            Modality::Shape => self.shape,
            Modality::Rotation => self.rotation,
            Modality::Translation => self.translation,
            Modality::Scale => self.scale,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Modality::ALL.iter().all(|&m| self.get(m) >= 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidArgument("modality weights must be non-negative".into()))
        }
    }
}

pub(crate) fn sample_fm_term<V: VelocityField + ?Sized>(vf: &V, s: &FlowSample, weights: &ModalityWeights) -> Result<f64> {
    let mut total = 0.0;
    for (&m, pair) in &s.pairs {
        let x = pair.at(s.tau)?;
        let pred = vf.velocity(m, &x, s.condition.as_ref(), s.tau, 0.0);
        check_len(pair.len(), pred.len())?;
        total += weights.get(m) * squared_distance(&pair.velocity(), &pred);
    }
    Ok(total)
}

/// Batch mean of `Σ_m λ_m ‖(x1 − x0) − v(x_τ, c, τ, 0)‖²`; zero on an
/// empty batch.
pub fn cfm_loss<V: VelocityField + ?Sized>(vf: &V, batch: &FlowBatch, weights: &ModalityWeights) -> Result<f64> {
    weights.validate()?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let terms: Vec<f64> = batch.samples.par_iter().map(|s| sample_fm_term(vf, s, weights)).collect::<Result<_>>()?;
    Ok(terms.iter().sum::<f64>() / batch.len() as f64)
}

/// Analytic gradient of [`cfm_loss`] for a [`LinearField`], as `(∂A, ∂b)`.
pub fn cfm_loss_gradient_linear(field: &LinearField, batch: &FlowBatch, weights: &ModalityWeights) -> Result<(DMatrix<f64>, DVector<f64>)> {
    weights.validate()?;
    let n = field.dim();
    let mut ga = DMatrix::zeros(n, n);
    let mut gb = DVector::zeros(n);
    if batch.is_empty() {
        return Ok((ga, gb));
    }
    for s in &batch.samples {
        for (&m, pair) in &s.pairs {
            check_len(n, pair.len())?;
            let x = DVector::from_vec(pair.at(s.tau)?);
            let r = DVector::from_vec(pair.velocity()) - (&field.a * &x + &field.b);
            let g = -2.0 * weights.get(m) * r;
            ga += &g * x.transpose();
            gb += g;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    Ok((ga * scale, gb * scale))
}
