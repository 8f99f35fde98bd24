//! Demonstrations and the simulated human annotator.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Latent true quality in `[0, 1]`. Hidden from the simulated policy.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Quality(f64);

impl Quality {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(Self(q))
        } else {
            Err(Error::InvalidQuality(q))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Quality {
    type Error = Error;

    fn try_from(q: f64) -> Result<Self> {
        Self::new(q)
    }
}

impl From<Quality> for f64 {
    fn from(q: Quality) -> f64 {
        q.0
    }
}

impl fmt::Display for Quality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// One candidate output for an input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    /// Stands for the input image and mask.
    pub input: u64,
    /// Stands for the predicted shape, texture and layout.
    pub payload: u64,
    pub quality: Quality,
    /// Index of the generator that produced it.
    pub source: usize,
}

/// A chosen demonstration with its rating and the candidates it beat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord {
    pub chosen: Demonstration,
    pub rejected: Vec<Demonstration>,
    pub rating: f64,
}

impl PreferenceRecord {
    /// `(chosen, rejected)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (&Demonstration, &Demonstration)> {
        self.rejected.iter().map(move |r| (&self.chosen, r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotatorModel {
    /// Logistic noise scale of pairwise choices; 0 picks the better one.
    pub temperature: f64,
    /// Quality gaps below this are judged equal.
    pub equal_margin: f64,
    /// Standard deviation of the absolute rating noise.
    pub rating_noise: f64,
}

impl Default for AnnotatorModel {
    fn default() -> Self {
        Self { temperature: 0.05, equal_margin: 0.01, rating_noise: 0.05 }
    }
}

impl AnnotatorModel {
    pub fn noiseless() -> Self {
        Self { temperature: 0.0, equal_margin: 0.0, rating_noise: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if ok(self.temperature) && ok(self.equal_margin) && ok(self.rating_noise) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("annotator temperature, margin and noise must be finite and non-negative".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    Left,
    Right,
    Equal,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn pairwise_choice<R: Rng + ?Sized>(a: &Demonstration, b: &Demonstration, annotator: &AnnotatorModel, rng: &mut R) -> Choice {
    let gap = a.quality.get() - b.quality.get();
    if gap.abs() < annotator.equal_margin || gap == 0.0 {
        return Choice::Equal;
    }
    let left = if annotator.temperature == 0.0 { gap > 0.0 } else { rng.random::<f64>() < sigmoid(gap / annotator.temperature) };
    if left {
        Choice::Left
    } else {
        Choice::Right
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: Demonstration,
    /// Every other candidate, in presentation order.
    pub rejected: Vec<Demonstration>,
    pub comparisons: usize,
    /// `(winner, loser)` of each decided comparison; ties are omitted.
    pub decisions: Vec<(Demonstration, Demonstration)>,
}

/// Sequential knockout: the current favorite faces each remaining candidate
/// in a shuffled order; on "equal" a coin decides which one stays.
pub fn knockout_select<R: Rng + ?Sized>(candidates: &[Demonstration], annotator: &AnnotatorModel, rng: &mut R) -> Result<Selection> {
    if candidates.len() < 2 {
        return Err(Error::TooFewCandidates { needed: 2, got: candidates.len() });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.shuffle(rng);
    let mut best = order[0];
    let mut decisions = Vec::with_capacity(candidates.len() - 1);
    for &next in &order[1..] {
        let keep_current = match pairwise_choice(&candidates[best], &candidates[next], annotator, rng) {
            Choice::Left => {
                decisions.push((candidates[best], candidates[next]));
                true
            }
            Choice::Right => {
                decisions.push((candidates[next], candidates[best]));
                false
            }
            Choice::Equal => rng.random::<bool>(),
        };
        if !keep_current {
            best = next;
        }
    }
    let rejected = order.iter().filter(|&&i| i != best).map(|&i| candidates[i]).collect();
    Ok(Selection { best: candidates[best], rejected, comparisons: candidates.len() - 1, decisions })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", content = "rating", rename_all = "snake_case")]
pub enum Gate {
    Accept(f64),
    Reject(f64),
}

impl Gate {
    pub fn rating(self) -> f64 {
        match self {
            Gate::Accept(r) | Gate::Reject(r) => r,
        }
    }

    pub fn accepted(self) -> bool {
        matches!(self, Gate::Accept(_))
    }
}

/// Absolute rating `clamp(q* + noise, 0, 1)` checked against the bar `α`.
pub fn rate_and_gate<R: Rng + ?Sized>(d: &Demonstration, alpha: f64, annotator: &AnnotatorModel, rng: &mut R) -> Result<Gate> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("quality bar {alpha} outside [0, 1]")));
    }
    let noise = if annotator.rating_noise > 0.0 {
        Normal::new(0.0, annotator.rating_noise).map_err(|e| Error::InvalidConfig(e.to_string()))?.sample(rng)
    } else {
        0.0
    };
    let r = (d.quality.get() + noise).clamp(0.0, 1.0);
    Ok(if r >= alpha { Gate::Accept(r) } else { Gate::Reject(r) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use lift3d_core::rng::seeded;

    fn demo(q: f64, payload: u64) -> Demonstration {
        Demonstration { input: 0, payload, quality: Quality::new(q).unwrap(), source: 0 }
    }

    #[test]
    fn choice_examples() {
        let mut rng = seeded(0);
        let ann = AnnotatorModel::default();
        assert_eq!(pairwise_choice(&demo(0.4, 0), &demo(0.4, 1), &ann, &mut rng), Choice::Equal);
        let hard = AnnotatorModel { temperature: 0.0, equal_margin: 0.05, rating_noise: 0.0 };
        for _ in 0..100 {
            assert_eq!(pairwise_choice(&demo(0.7, 0), &demo(0.6, 1), &hard, &mut rng), Choice::Left);
        }
        assert_eq!(pairwise_choice(&demo(0.62, 0), &demo(0.6, 1), &hard, &mut rng), Choice::Equal);
    }

    #[test]
    fn logistic_win_rate() {
        let mut rng = seeded(1);
        let ann = AnnotatorModel { temperature: 0.1, equal_margin: 0.0, rating_noise: 0.0 };
        let n = 10_000;
        let left = (0..n).filter(|_| pairwise_choice(&demo(0.7, 0), &demo(0.5, 1), &ann, &mut rng) == Choice::Left).count();
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((left as f64 / n as f64 - expected).abs() < 0.01, "{left}");
    }

    #[test]
    fn knockout_structure() {
        let mut rng = seeded(2);
        let cands: Vec<_> = [0.3, 0.9, 0.1, 0.5, 0.7].iter().enumerate().map(|(i, &q)| demo(q, i as u64)).collect();
        let s = knockout_select(&cands, &AnnotatorModel::noiseless(), &mut rng).unwrap();
        assert_eq!(s.best.payload, 1);
        assert_eq!(s.comparisons, 4);
        assert_eq!(s.rejected.len(), 4);
        assert!(!s.rejected.contains(&s.best));
        let two = knockout_select(&cands[..2], &AnnotatorModel::default(), &mut rng).unwrap();
        assert_eq!(two.comparisons, 1);
        assert!(matches!(knockout_select(&cands[..1], &AnnotatorModel::default(), &mut rng), Err(Error::TooFewCandidates { .. })));
    }

    #[test]
    fn equal_keeps_either_at_random() {
        let mut rng = seeded(3);
        let cands = [demo(0.5, 0), demo(0.5, 1)];
        let firsts =
            (0..2000).filter(|_| knockout_select(&cands, &AnnotatorModel::noiseless(), &mut rng).unwrap().best.payload == 0).count();
        assert!((firsts as i64 - 1000).abs() < 120, "{firsts}");
    }

    #[test]
    fn gate_examples() {
        let mut rng = seeded(4);
        let ann = AnnotatorModel::noiseless();
        assert_eq!(rate_and_gate(&demo(0.9, 0), 0.8, &ann, &mut rng).unwrap(), Gate::Accept(0.9));
        assert_eq!(rate_and_gate(&demo(0.7, 0), 0.8, &ann, &mut rng).unwrap(), Gate::Reject(0.7));
        assert_eq!(rate_and_gate(&demo(0.8, 0), 0.8, &ann, &mut rng).unwrap(), Gate::Accept(0.8));
        let noisy = AnnotatorModel { rating_noise: 0.5, ..ann };
        for _ in 0..200 {
            let g = rate_and_gate(&demo(0.0, 0), 0.0, &noisy, &mut rng).unwrap();
            assert!(g.accepted() && (0.0..=1.0).contains(&g.rating()));
        }
        assert!(rate_and_gate(&demo(0.5, 0), 1.5, &ann, &mut rng).is_err());
    }

    #[test]
    fn quality_bounds() {
        assert!(Quality::new(1.0).is_ok());
        assert!(Quality::new(-0.01).is_err());
        assert_eq!(Quality::try_from(0.25).map(f64::from), Ok(0.25));
    }
}
