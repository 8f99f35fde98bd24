//! Noisy scalar reward model and tournament ranking for best-of-N recovery.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotator::Demonstration;
use crate::error::{Error, Result};

/// Scores a candidate as `q* + N(0, noise²)`, redrawn per comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardModel {
    pub noise: f64,
}

impl RewardModel {
    /// Noise at which the scorer agrees with the true preference on about
    /// 67% of pairs whose qualities are independent and uniform on `[0, 1]`.
    pub const DEFAULT_NOISE: f64 = 0.5;

    pub fn calibrated() -> Self {
        Self { noise: Self::DEFAULT_NOISE }
    }

    pub fn noiseless() -> Self {
        Self { noise: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise >= 0.0 && self.noise.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig("reward noise must be finite and non-negative".into()))
        }
    }

    pub fn score<R: Rng + ?Sized>(&self, d: &Demonstration, rng: &mut R) -> f64 {
        let q = d.quality.get();
        match Normal::new(0.0, self.noise) {
            Ok(n) if self.noise > 0.0 => q + n.sample(rng),
            _ => q,
        }
    }

    /// `true` when `a` is preferred over `b`; exact ties go to `a`.
    pub fn prefers<R: Rng + ?Sized>(&self, a: &Demonstration, b: &Demonstration, rng: &mut R) -> bool {
        self.score(a, rng) >= self.score(b, rng)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tournament {
    pub winner: Demonstration,
    pub comparisons: usize,
}

/// Single-elimination bracket over a shuffled order; an odd entrant gets a
/// bye to the next round.
pub fn tournament_rank<R: Rng + ?Sized>(candidates: &[Demonstration], reward: &RewardModel, rng: &mut R) -> Result<Tournament> {
    if candidates.is_empty() {
        return Err(Error::TooFewCandidates { needed: 1, got: 0 });
    }
    reward.validate()?;
    let mut round: Vec<Demonstration> = candidates.to_vec();
    round.shuffle(rng);
    let mut comparisons = 0;
    while round.len() > 1 {
        let mut next = Vec::with_capacity(round.len().div_ceil(2));
        for pair in round.chunks(2) {
            match pair {
                [a, b] => {
                    comparisons += 1;
                    next.push(if reward.prefers(a, b, rng) { *a } else { *b });
                }
                [a] => next.push(*a),
                _ => unreachable!(),
            }
        }
        round = next;
    }
    Ok(Tournament { winner: round[0], comparisons })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotator::Quality;
    use lift3d_core::rng::seeded;

    fn demo(q: f64, payload: u64) -> Demonstration {
        Demonstration { input: 0, payload, quality: Quality::new(q).unwrap(), source: 0 }
    }

    #[test]
    fn noiseless_bracket_finds_argmax() {
        let mut rng = seeded(0);
        let cands: Vec<_> = (0..50).map(|i| demo(((i * 37) % 50) as f64 / 50.0, i)).collect();
        let t = tournament_rank(&cands, &RewardModel::noiseless(), &mut rng).unwrap();
        assert_eq!(t.winner.quality.get(), 49.0 / 50.0);
        assert_eq!(t.comparisons, 49);
        assert_eq!(tournament_rank(&cands[..1], &RewardModel::calibrated(), &mut rng).unwrap().comparisons, 0);
        assert!(tournament_rank(&[], &RewardModel::noiseless(), &mut rng).is_err());
    }

    #[test]
    fn calibrated_agreement() {
        let mut rng = seeded(1);
        let rm = RewardModel::calibrated();
        let n = 40_000;
        let agree = (0..n)
            .filter(|_| {
                let (a, b) = (demo(rng.random(), 0), demo(rng.random(), 1));
                rm.prefers(&a, &b, &mut rng) == (a.quality.get() >= b.quality.get())
            })
            .count() as f64
            / n as f64;
        assert!((0.65..=0.69).contains(&agree), "{agree}");
    }
}
