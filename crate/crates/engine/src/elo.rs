//! Elo ratings from pairwise outcomes.
//!
//! Ratings live on the base-10 scale with a 400-point unit:
//! `P(A beats B) = 1 / (1 + 10^(−(R_A − R_B)/400))`, so 400 points are 10:1
//! odds. [`elo_fit`] solves the Bradley–Terry maximum-likelihood problem by
//! Newton's method, separately on each connected component of the
//! comparison graph, and anchors each component's mean rating at 1000.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::annotator::sigmoid;
use crate::error::{Error, Result};

pub const ELO_UNIT: f64 = 400.0;
pub const ELO_MEAN: f64 = 1000.0;
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub a: String,
    pub b: String,
    pub winner: Winner,
}

impl Outcome {
    pub fn new(a: impl Into<String>, b: impl Into<String>, winner: Winner) -> Self {
        Self { a: a.into(), b: b.into(), winner }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EloFit {
    pub ratings: BTreeMap<String, f64>,
    /// Connected components of the comparison graph; ratings are only
    /// comparable within one.
    pub components: Vec<Vec<String>>,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl EloFit {
    pub fn gap(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.ratings.get(a)? - self.ratings.get(b)?)
    }
}

/// `P(A beats B)` for a rating gap `R_A − R_B`.
pub fn win_probability(gap: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(-gap / ELO_UNIT))
}

fn natural_to_elo(theta: f64) -> f64 {
    theta * ELO_UNIT / std::f64::consts::LN_10
}

struct Tallies {
    /// `wins[i][j]`: wins of `i` over `j`, ties counting half.
    wins: DMatrix<f64>,
    games: DMatrix<f64>,
}

fn log_likelihood(t: &Tallies, idx: &[usize], theta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for (p, &i) in idx.iter().enumerate() {
        for (q, &j) in idx.iter().enumerate() {
            let w = t.wins[(i, j)];
            if w > 0.0 {
                let d = theta[p] - theta[q];
                // ln σ(d) = −softplus(−d)
                ll -= w * ((-d).max(0.0) + (-d.abs()).exp().ln_1p());
            }
        }
    }
    ll
}

/// Newton iterations with step halving on one connected component. The
/// first member is pinned at zero to remove the shift freedom.
fn fit_component(t: &Tallies, idx: &[usize], max_iterations: usize) -> (Vec<f64>, bool, usize) {
    let n = idx.len();
    let mut theta = vec![0.0; n];
    if n < 2 {
        return (theta, true, 0);
    }
    let mut ll = log_likelihood(t, idx, &theta);
    for it in 1..=max_iterations {
        let mut grad = DVector::<f64>::zeros(n - 1);
        let mut info = DMatrix::<f64>::zeros(n - 1, n - 1);
        for p in 0..n {
            for q in 0..n {
                let games = t.games[(idx[p], idx[q])];
                if p == q || games == 0.0 {
                    continue;
                }
                let prob = sigmoid(theta[p] - theta[q]);
                if p > 0 {
                    grad[p - 1] += t.wins[(idx[p], idx[q])] - games * prob;
                    info[(p - 1, p - 1)] += games * prob * (1.0 - prob);
                    if q > 0 {
                        info[(p - 1, q - 1)] -= games * prob * (1.0 - prob);
                    }
                }
            }
        }
        let Some(step) = info.clone().cholesky().map(|c| c.solve(&grad)) else {
            return (theta, false, it);
        };
        let mut scale = 1.0;
        loop {
            let trial: Vec<f64> = std::iter::once(0.0).chain((0..n - 1).map(|k| theta[k + 1] + scale * step[k])).collect();
            let trial_ll = log_likelihood(t, idx, &trial);
            if trial_ll >= ll || scale < 1e-12 {
                theta = trial;
                ll = trial_ll;
                break;
            }
            scale *= 0.5;
        }
        if scale * step.amax() < TOLERANCE {
            return (theta, true, it);
        }
    }
    (theta, false, max_iterations)
}

/// Maximum-likelihood Bradley–Terry ratings on the Elo scale.
pub fn elo_fit(outcomes: &[Outcome]) -> Result<EloFit> {
    if outcomes.is_empty() {
        return Err(Error::NoOutcomes);
    }
    let names: Vec<String> = outcomes.iter().flat_map(|o| [o.a.clone(), o.b.clone()]).collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let m = names.len();
    let mut t = Tallies { wins: DMatrix::zeros(m, m), games: DMatrix::zeros(m, m) };
    let mut parent: Vec<usize> = (0..m).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for o in outcomes {
        let (a, b) = (index[o.a.as_str()], index[o.b.as_str()]);
        if a == b {
            continue;
        }
        let (wa, wb) = match o.winner {
            Winner::A => (1.0, 0.0),
            Winner::B => (0.0, 1.0),
            Winner::Tie => (0.5, 0.5),
        };
        t.wins[(a, b)] += wa;
        t.wins[(b, a)] += wb;
        t.games[(a, b)] += 1.0;
        t.games[(b, a)] += 1.0;
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        parent[ra] = rb;
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }

    let mut fit = EloFit { ratings: BTreeMap::new(), components: Vec::new(), converged: true, iterations: 0, warnings: Vec::new() };
    if groups.len() > 1 {
        fit.warnings.push(format!("comparison graph has {} components; ratings are anchored per component", groups.len()));
    }
    for idx in groups.values() {
        let (theta, converged, iterations) = fit_component(&t, idx, 200);
        if !converged {
            fit.warnings.push(format!("fit did not converge for component containing {}", names[idx[0]]));
        }
        fit.converged &= converged;
        fit.iterations = fit.iterations.max(iterations);
        let mean = theta.iter().sum::<f64>() / theta.len() as f64;
        for (&i, th) in idx.iter().zip(&theta) {
            fit.ratings.insert(names[i].clone(), ELO_MEAN + natural_to_elo(th - mean));
        }
        fit.components.push(idx.iter().map(|&i| names[i].clone()).collect());
    }
    Ok(fit)
}

/// Sequential Elo updates with factor `k`, every model starting at 1000.
pub fn elo_online(outcomes: &[Outcome], k: f64) -> BTreeMap<String, f64> {
    let mut ratings: BTreeMap<String, f64> = BTreeMap::new();
    for o in outcomes {
        let ra = *ratings.entry(o.a.clone()).or_insert(ELO_MEAN);
        let rb = *ratings.entry(o.b.clone()).or_insert(ELO_MEAN);
        let score = match o.winner {
            Winner::A => 1.0,
            Winner::B => 0.0,
            Winner::Tie => 0.5,
        };
        let delta = k * (score - win_probability(ra - rb));
        *ratings.get_mut(&o.a).expect("inserted") += delta;
        *ratings.get_mut(&o.b).expect("inserted") -= delta;
    }
    ratings
}
