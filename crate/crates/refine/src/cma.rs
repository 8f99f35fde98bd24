//! Compact CMA-ES (rank-one and rank-mu covariance updates, cumulative
//! step-size adaptation), maximizing the objective.

use lift3d_core::rng::seeded;
use nalgebra::{SMatrix, SVector};
use rand_distr::{Distribution, StandardNormal};

use crate::{Objective, Params, DIM};

type Mat = SMatrix<f64, DIM, DIM>;

/// Initial step size in units of the configured per-parameter steps.
const INITIAL_SIGMA: f64 = 0.5;

pub(crate) fn search(obj: &mut Objective<'_>, seed: u64) {
    let n = DIM as f64;
    let lambda = 4 + (3.0 * n.ln()).floor() as usize;
    let mu = lambda / 2;
    let raw: Vec<f64> = (1..=mu).map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let mu_eff = 1.0 / w.iter().map(|v| v * v).sum::<f64>();

    let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
    let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
    let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
    let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
    let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
    let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

    let mut rng = seeded(seed);
    let mut mean = obj.best.1;
    let mut sigma = INITIAL_SIGMA;
    let mut cov = Mat::identity();
    let mut p_sigma = Params::zeros();
    let mut p_c = Params::zeros();
    let mut generation = 0;

    while !obj.exhausted() {
        generation += 1;
        let eig = cov.symmetric_eigen();
        let d = eig.eigenvalues.map(|v| v.max(1e-20).sqrt());
        let b = eig.eigenvectors;
        let mut pop: Vec<(f64, Params, Params)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = SVector::<f64, DIM>::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let y = b * d.component_mul(&z);
            let x = mean + y * sigma;
            let Some(f) = obj.eval(&x) else { return };
            if f >= 1.0 {
                return;
            }
            pop.push((f, x, y));
        }
        pop.sort_by(|a, b| b.0.total_cmp(&a.0));

        let old = mean;
        mean = pop.iter().zip(&w).fold(Params::zeros(), |acc, ((_, x, _), wi)| acc + x * *wi);
        let y_w = (mean - old) / sigma;
        let inv_sqrt = b * Mat::from_diagonal(&d.map(|v| 1.0 / v)) * b.transpose();
        p_sigma = p_sigma * (1.0 - c_sigma) + inv_sqrt * y_w * (c_sigma * (2.0 - c_sigma) * mu_eff).sqrt();
        let norm = p_sigma.norm();
        let h_sigma = norm / (1.0 - (1.0 - c_sigma).powi(2 * generation)).sqrt() < (1.4 + 2.0 / (n + 1.0)) * chi_n;
        let h = if h_sigma { 1.0 } else { 0.0 };
        p_c = p_c * (1.0 - c_c) + y_w * (h * (c_c * (2.0 - c_c) * mu_eff).sqrt());
        let rank_mu = pop.iter().zip(&w).fold(Mat::zeros(), |acc, ((_, _, y), wi)| acc + y * y.transpose() * *wi);
        cov = cov * (1.0 - c_1 - c_mu) + (p_c * p_c.transpose() + cov * ((1.0 - h) * c_c * (2.0 - c_c))) * c_1 + rank_mu * c_mu;
        cov = (cov + cov.transpose()) * 0.5;
        sigma *= ((c_sigma / d_sigma) * (norm / chi_n - 1.0)).exp();
        if !(sigma.is_finite() && sigma > 1e-12) {
            return;
        }
    }
}
