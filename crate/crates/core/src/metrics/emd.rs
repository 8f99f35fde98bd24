//! Earth mover's distance between equal-size point sets with uniform mass.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::mesh::PointCloud;

pub const DEFAULT_EMD_CAP: usize = 2048;

#[inline]
fn dist(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm()
}

fn check_equal(pred: &PointCloud, gt: &PointCloud) -> Result<()> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if pred.len() != gt.len() {
        return Err(Error::SizeMismatch(format!("emd needs equal point counts, got {} and {}", pred.len(), gt.len())));
    }
    Ok(())
}

/// Minimum-cost perfect matching on a dense square cost matrix given in
/// row-major order. Returns `assignment[row] = col` and the total cost.
///
/// Shortest augmenting paths with row/column potentials, O(n^3).
pub fn min_cost_assignment(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (Vec::new(), 0.0);
    }
    // 1-based internals; index 0 is the virtual source column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut matched_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let row = &cost[(i0 - 1) * n..i0 * n];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
    (assignment, total)
}

fn cost_matrix(pred: &PointCloud, gt: &PointCloud) -> Vec<f64> {
    let mut cost = Vec::with_capacity(pred.len() * gt.len());
    for p in pred.points() {
        for g in gt.points() {
            cost.push(dist(p, g));
        }
    }
    cost
}

/// Exact EMD: mean Euclidean cost of the optimal bijection.
pub fn emd_exact(pred: &PointCloud, gt: &PointCloud) -> Result<f64> {
    emd_exact_with_cap(pred, gt, DEFAULT_EMD_CAP).map(|(d, _)| d)
}

/// Exact EMD with an explicit size cap, also returning the assignment.
pub fn emd_exact_with_cap(pred: &PointCloud, gt: &PointCloud, cap: usize) -> Result<(f64, Vec<usize>)> {
    check_equal(pred, gt)?;
    let n = pred.len();
    if n > cap {
        return Err(Error::EmdCapExceeded { n, cap });
    }
    let (assignment, total) = min_cost_assignment(&cost_matrix(pred, gt), n);
    Ok((total / n as f64, assignment))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    /// Entropic regularization, relative to the largest pairwise cost.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Stop when the L1 marginal violation falls below this.
    pub tolerance: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, max_iterations: 50_000, tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkhornResult {
    /// The smaller of the regularized plan's transport cost and
    /// `rounded_upper_bound` (mean cost per point). Both are feasible
    /// couplings, so this never undercuts the exact EMD by more than the
    /// marginal residual allows.
    pub value: f64,
    /// Transport cost of the regularized plan.
    pub plan_cost: f64,
    /// Mean cost of the bijection obtained by greedily rounding the plan; an
    /// upper bound on the exact EMD.
    pub rounded_upper_bound: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Log-domain Sinkhorn approximation of the EMD.
pub fn emd_approx(pred: &PointCloud, gt: &PointCloud, config: &SinkhornConfig) -> Result<SinkhornResult> {
    check_equal(pred, gt)?;
    if !(config.epsilon > 0.0) {
        return Err(Error::InvalidArgument("sinkhorn epsilon must be positive".into()));
    }
    let n = pred.len();
    let cost = cost_matrix(pred, gt);
    let cmax = cost.iter().copied().fold(0.0, f64::max);
    if cmax == 0.0 {
        return Ok(SinkhornResult { value: 0.0, plan_cost: 0.0, rounded_upper_bound: 0.0, iterations: 0, residual: 0.0 });
    }
    let eps = config.epsilon * cmax;
    let log_mass = -(n as f64).ln();
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        for i in 0..n {
            let row = &cost[i * n..(i + 1) * n];
            f[i] = eps * log_mass - eps * log_sum_exp(row.iter().zip(&g).map(|(c, gj)| (gj - c) / eps));
        }
        for j in 0..n {
            g[j] = eps * log_mass - eps * log_sum_exp((0..n).map(|i| (f[i] - cost[i * n + j]) / eps));
        }
        // columns are exact after the g-update; measure the row violation
        residual = (0..n)
            .map(|i| {
                let row = &cost[i * n..(i + 1) * n];
                let s: f64 = row.iter().zip(&g).map(|(c, gj)| ((f[i] + gj - c) / eps).exp()).sum();
                (s - 1.0 / n as f64).abs()
            })
            .sum();
        if residual < config.tolerance {
            break;
        }
    }
    if residual >= config.tolerance {
        return Err(Error::NoConvergence { iterations, residual });
    }
    let mut value = 0.0;
    let mut plan = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = ((f[i] + g[j] - cost[i * n + j]) / eps).exp();
            value += p * cost[i * n + j];
            plan.push((p, i, j));
        }
    }
    plan.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut row_used = vec![false; n];
    let mut col_used = vec![false; n];
    let mut rounded = 0.0;
    let mut assigned = 0;
    for (_, i, j) in plan {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            rounded += cost[i * n + j];
            assigned += 1;
            if assigned == n {
                break;
            }
        }
    }
    let rounded = rounded / n as f64;
    Ok(SinkhornResult { value: value.min(rounded), plan_cost: value, rounded_upper_bound: rounded, iterations, residual })
}
