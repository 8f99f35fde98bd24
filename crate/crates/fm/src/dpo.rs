//! Preference optimization adapted to flow matching.

use std::fmt;

use crate::error::{check_len, Error, Result};
use crate::field::{Condition, Modality, VelocityField};
use crate::flow::{check_time, squared_distance};

/// A noised state and its target velocity.
#[derive(Debug, Clone, Copy)]
pub struct Preferred<'a> {
    pub x_tau: &'a [f64],
    pub v: &'a [f64],
}

fn residual_gap<V: VelocityField + ?Sized, W: VelocityField + ?Sized>(
    theta: &V,
    reference: &W,
    modality: Modality,
    p: Preferred<'_>,
    cond: Option<&Condition>,
    tau: f64,
) -> Result<f64> {
    check_len(p.x_tau.len(), p.v.len())?;
    let vt = theta.velocity(modality, p.x_tau, cond, tau, 0.0);
    let vr = reference.velocity(modality, p.x_tau, cond, tau, 0.0);
    check_len(p.v.len(), vt.len())?;
    check_len(p.v.len(), vr.len())?;
    Ok(squared_distance(p.v, &vt) - squared_distance(p.v, &vr))
}

/// How much better the policy fits the winner than the loser, each
/// measured against the reference: negative when the winner is favored.
pub fn dpo_delta<V: VelocityField + ?Sized, W: VelocityField + ?Sized>(
    theta: &V,
    reference: &W,
    modality: Modality,
    winner: Preferred<'_>,
    loser: Preferred<'_>,
    cond: Option<&Condition>,
    tau: f64,
) -> Result<f64> {
    check_time(tau)?;
    Ok(residual_gap(theta, reference, modality, winner, cond, tau)? - residual_gap(theta, reference, modality, loser, cond, tau)?)
}

/// `β`, `T` and the time weighting `w(τ)` of the preference loss.
#[derive(Clone, Copy)]
pub struct DpoConfig {
    beta: f64,
    t_scale: f64,
    weight: fn(f64) -> f64,
}

impl fmt::Debug for DpoConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DpoConfig").field("beta", &self.beta).field("t_scale", &self.t_scale).finish_non_exhaustive()
    }
}

fn unit_weight(_: f64) -> f64 {
    1.0
}

impl DpoConfig {
    /// Constant time weighting.
    pub fn new(beta: f64, t_scale: f64) -> Result<Self> {
        Self::with_weight(beta, t_scale, unit_weight)
    }

    pub fn with_weight(beta: f64, t_scale: f64, weight: fn(f64) -> f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(t_scale > 0.0 && t_scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta and T must be positive, got {beta} and {t_scale}")));
        }
        Ok(Self { beta, t_scale, weight })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn t_scale(&self) -> f64 {
        self.t_scale
    }

    pub fn weight(&self, tau: f64) -> f64 {
        (self.weight)(tau)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `−ln σ(−β T w(τ) Δ)`.
pub fn dpo_loss(delta: f64, config: &DpoConfig, tau: f64) -> f64 {
    softplus(config.beta * config.t_scale * config.weight(tau) * delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ConstantField, FnField};

    #[test]
    fn zero_delta_gives_ln2() {
        let c = DpoConfig::new(2.5, 1000.0).unwrap();
        assert!((dpo_loss(0.0, &c, 0.3) - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn loss_limits_and_monotonicity() {
        let c = DpoConfig::new(1.0, 1.0).unwrap();
        assert!(dpo_loss(-1e6, &c, 0.5) < 1e-300);
        assert!(dpo_loss(-1e6, &c, 0.5) >= 0.0);
        assert!((dpo_loss(1e6, &c, 0.5) - 1e6).abs() < 1e-6);
        assert!(dpo_loss(-40.0, &c, 0.5) > 0.0);
        let doubled = DpoConfig::new(2.0, 1.0).unwrap();
        assert!(dpo_loss(-0.5, &doubled, 0.5) < dpo_loss(-0.5, &c, 0.5));
        assert!(dpo_loss(-1.0, &c, 0.5) < dpo_loss(-0.5, &c, 0.5));
    }

    #[test]
    fn time_weight_enters_the_scale() {
        let c = DpoConfig::with_weight(1.0, 1.0, |tau| 1.0 - tau).unwrap();
        assert!((dpo_loss(5.0, &c, 1.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(c.weight(0.25), 0.75);
        assert!(DpoConfig::new(0.0, 1.0).is_err());
        assert!(DpoConfig::new(1.0, -1.0).is_err());
    }

    #[test]
    fn delta_examples() {
        let reference = ConstantField(vec![0.0]);
        let w = Preferred { x_tau: &[0.0], v: &[1.0] };
        let l = Preferred { x_tau: &[5.0], v: &[2.0] };
        assert_eq!(dpo_delta(&reference, &reference, Modality::Shape, w, l, None, 0.5).unwrap(), 0.0);

        // winner residual 1 -> 0; loser residual unchanged at 4 vs 4
        let theta = FnField(|_: Modality, x: &[f64], _: Option<&Condition>, _: f64, _: f64| vec![if x[0] == 0.0 { 1.0 } else { 0.0 }]);
        let d = dpo_delta(&theta, &reference, Modality::Shape, w, l, None, 0.5).unwrap();
        assert_eq!(d, -1.0);
        assert_eq!(dpo_delta(&theta, &reference, Modality::Shape, l, w, None, 0.5).unwrap(), 1.0);
        assert!(dpo_delta(&theta, &reference, Modality::Shape, Preferred { x_tau: &[0.0], v: &[1.0, 2.0] }, l, None, 0.5).is_err());
    }
}
