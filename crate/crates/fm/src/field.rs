//! Velocity-field evaluators.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Output modality of the geometry model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Shape,
    Rotation,
    Translation,
    Scale,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Shape, Modality::Rotation, Modality::Translation, Modality::Scale];
}

/// Opaque conditioning tokens.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Condition(pub Vec<f64>);

/// `v(x, c, τ, d)`. `cond = None` is the unconditional branch used by
/// classifier-free guidance; `d = 0` requests the instantaneous velocity.
pub trait VelocityField: Sync {
    fn velocity(&self, modality: Modality, x: &[f64], cond: Option<&Condition>, tau: f64, d: f64) -> Vec<f64>;
}

impl<F: VelocityField + ?Sized> VelocityField for &F {
    fn velocity(&self, modality: Modality, x: &[f64], cond: Option<&Condition>, tau: f64, d: f64) -> Vec<f64> {
        (**self).velocity(modality, x, cond, tau, d)
    }
}

/// Adapts a closure.
pub struct FnField<F>(pub F);

impl<F> VelocityField for FnField<F>
where
    F: Fn(Modality, &[f64], Option<&Condition>, f64, f64) -> Vec<f64> + Sync,
{
    fn velocity(&self, modality: Modality, x: &[f64], cond: Option<&Condition>, tau: f64, d: f64) -> Vec<f64> {
        (self.0)(modality, x, cond, tau, d)
    }
}

/// Returns the same vector everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantField(pub Vec<f64>);

impl VelocityField for ConstantField {
    fn velocity(&self, _: Modality, x: &[f64], _: Option<&Condition>, _: f64, _: f64) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.0.len());
        self.0.clone()
    }
}

/// Counts evaluations of the wrapped field.
pub struct Counting<F> {
    inner: F,
    count: AtomicUsize,
}

impl<F> Counting<F> {
    pub fn new(inner: F) -> Self {
        Self { inner, count: AtomicUsize::new(0) }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.count.store(0, Ordering::Relaxed);
    }
}

impl<F: VelocityField> VelocityField for Counting<F> {
    fn velocity(&self, modality: Modality, x: &[f64], cond: Option<&Condition>, tau: f64, d: f64) -> Vec<f64> {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.velocity(modality, x, cond, tau, d)
    }
}

/// `v(x) = A x + b`, independent of modality, condition, time and step.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl LinearField {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_len(a.nrows(), a.ncols())?;
        check_len(a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }
}

impl VelocityField for LinearField {
    fn velocity(&self, _: Modality, x: &[f64], _: Option<&Condition>, _: f64, _: f64) -> Vec<f64> {
        (&self.a * DVector::from_column_slice(x) + &self.b).as_slice().to_vec()
    }
}
