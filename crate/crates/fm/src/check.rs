//! Self-test suite of closed-form identities, run by `fm-check`.

use lift3d_core::rng::seeded;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::dpo::{dpo_delta, dpo_loss, DpoConfig, Preferred};
use crate::field::{Condition, ConstantField, Counting, FnField, LinearField, Modality};
use crate::flow::{cfm_loss, cfm_loss_gradient_linear, FlowBatch, FlowSample, ModalityWeights, StatePair};
use crate::sampler::{euler_sample, SamplerConfig};
use crate::shortcut::{consistency_target, shortcut_loss, ShortcutConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
}

fn check(name: &'static str, value: f64, expected: f64, tolerance: f64) -> CheckResult {
    CheckResult { name, passed: (value - expected).abs() <= tolerance, value, expected, tolerance }
}

fn random_batch(seed: u64, n: usize, dim: usize) -> FlowBatch {
    let mut rng = seeded(seed);
    let samples = (0..n)
        .map(|i| {
            let pair = StatePair::new(
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .expect("equal lengths");
            FlowSample::single(Modality::ALL[i % 4], pair, Some(Condition::default()), rng.random::<f64>()).expect("time in range")
        })
        .collect();
    FlowBatch::new(samples).expect("valid batch")
}

/// Largest relative error between the analytic linear-field gradient and
/// central finite differences.
pub fn gradient_check(seed: u64, dim: usize) -> f64 {
    let mut rng = seeded(seed ^ 0x9e37_79b9);
    let field = LinearField::new(
        DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0)),
        DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0)),
    )
    .expect("square");
    let batch = random_batch(seed, 16, dim);
    let w = ModalityWeights::default();
    let (ga, gb) = cfm_loss_gradient_linear(&field, &batch, &w).expect("valid");
    let analytic: Vec<f64> = ga.iter().chain(gb.iter()).copied().collect();
    let scale = analytic.iter().map(|g| g * g).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let h = 1e-6;
    let loss = |f: &LinearField| cfm_loss(f, &batch, &w).expect("valid");
    let mut worst = 0.0f64;
    for (k, g) in analytic.iter().enumerate() {
        let (mut p, mut q) = (field.clone(), field.clone());
        if k < dim * dim {
            p.a[k] += h;
            q.a[k] -= h;
        } else {
            p.b[k - dim * dim] += h;
            q.b[k - dim * dim] -= h;
        }
        let fd = (loss(&p) - loss(&q)) / (2.0 * h);
        worst = worst.max((fd - g).abs() / scale);
    }
    worst
}

pub fn run_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let c = Condition::default();

    let batch = random_batch(seed, 32, 3);
    let exact = FnField(|_: Modality, x: &[f64], _: Option<&Condition>, _: f64, _: f64| vec![0.0; x.len()]);
    let mut still = batch.clone();
    for s in &mut still.samples {
        for p in s.pairs.values_mut() {
            *p = StatePair::new(p.x0().to_vec(), p.x0().to_vec()).expect("equal lengths");
        }
    }
    out.push(check("cfm_loss at exact field", cfm_loss(&exact, &still, &ModalityWeights::default()).unwrap_or(f64::NAN), 0.0, 0.0));

    let cfg = DpoConfig::new(1.0, 1.0).expect("positive");
    out.push(check("dpo_loss(0) = ln 2", dpo_loss(0.0, &cfg, 0.5), std::f64::consts::LN_2, 1e-12));
    let theta = ConstantField(vec![0.4, -0.1]);
    let reference = ConstantField(vec![1.0, 0.3]);
    let (w, l) = (Preferred { x_tau: &[0.0, 1.0], v: &[0.5, 0.5] }, Preferred { x_tau: &[2.0, -1.0], v: &[-1.0, 0.0] });
    let d1 = dpo_delta(&theta, &reference, Modality::Shape, w, l, None, 0.5).unwrap_or(f64::NAN);
    let d2 = dpo_delta(&theta, &reference, Modality::Shape, l, w, None, 0.5).unwrap_or(f64::NAN);
    out.push(check("dpo_delta antisymmetry", d1 + d2, 0.0, 0.0));

    let k = ConstantField(vec![0.37, -2.5]);
    let ct = consistency_target(&k, Modality::Translation, &[1.0, 1.0], Some(&c), 0.25, 0.125, 2.0)
        .map(|t| t.value().to_vec())
        .unwrap_or_default();
    let err = ct.iter().zip(&k.0).map(|(a, b)| (a - b).abs()).fold(f64::NAN, f64::max);
    out.push(check("consistency_target on constant field", err, 0.0, 4.0 * f64::EPSILON));
    let identity = FnField(|_: Modality, x: &[f64], _: Option<&Condition>, _: f64, _: f64| x.to_vec());
    let lin = consistency_target(&identity, Modality::Shape, &[1.0], Some(&c), 0.0, 0.1, 1.0).map(|t| t.value()[0]).unwrap_or(f64::NAN);
    out.push(check("consistency_target linear example", lin, 1.05, 1e-12));

    out.push(check("linear-field gradient vs finite differences", gradient_check(seed, 3), 0.0, 1e-5));

    let mix_one = ShortcutConfig { mix: 1.0, seed, ..Default::default() };
    let w1 = ModalityWeights::uniform(1.0);
    let a = shortcut_loss(&identity, &batch, &w1, &mix_one).unwrap_or(f64::NAN);
    let b = cfm_loss(&identity, &batch, &w1).unwrap_or(f64::NAN);
    out.push(check("shortcut_loss(mix = 1) = cfm_loss", a - b, 0.0, 0.0));

    let counter = Counting::new(ConstantField(vec![0.0]));
    let nfe = euler_sample(&counter, Modality::Shape, &[0.0], Some(&c), &SamplerConfig::default()).map(|o| o.nfe).unwrap_or(0);
    out.push(check("NFE at 25 steps with half-schedule CFG", nfe as f64, 38.0, 0.0));
    counter.reset();
    euler_sample(&counter, Modality::Shape, &[0.0], Some(&c), &SamplerConfig::shortcut(4)).ok();
    out.push(check("NFE at 4 shortcut steps", counter.count() as f64, 4.0, 0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for seed in [0, 1, 17] {
            for r in run_checks(seed) {
                assert!(r.passed, "{r:?}");
            }
        }
    }
}
