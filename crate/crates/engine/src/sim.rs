//! The collect/aggregate/update loop of the data engine.
//!
//! Each iteration draws inputs, samples `N` candidates from the amplified
//! policy (the current model pooled with fixed auxiliary generators),
//! lets the annotator pick a favorite by knockout and rate it against the
//! bar `α_k`. Records from all iterations so far are re-filtered at the
//! current bar, expanded into preference pairs, and the current model's
//! quality distribution is moved toward the mean accepted quality.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::annotator::{knockout_select, rate_and_gate, AnnotatorModel, Demonstration, PreferenceRecord, Quality};
use crate::elo::{elo_fit, Outcome, Winner};
use crate::error::{Error, Result};
use crate::reward::{tournament_rank, RewardModel};

/// Beta distribution of candidate quality, parameterized by mean and
/// concentration `a + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityDist {
    pub mean: f64,
    pub concentration: f64,
}

impl QualityDist {
    pub fn new(mean: f64, concentration: f64) -> Result<Self> {
        let d = Self { mean, concentration };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0 && self.mean < 1.0) || !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "quality distribution needs mean in (0, 1) and positive concentration, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Beta shape parameters `(a, b)`.
    pub fn shape(&self) -> (f64, f64) {
        (self.mean * self.concentration, (1.0 - self.mean) * self.concentration)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Quality {
        let (a, b) = self.shape();
        let q = Beta::new(a, b).expect("validated shape").sample(rng);
        Quality::new(q.clamp(0.0, 1.0)).expect("clamped")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub name: String,
    pub quality: QualityDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Candidates drawn from the current model for a rejected input.
    pub n_recover: usize,
    pub reward: RewardModel,
}

impl Default for RecoveryConfig {
    fn default() -> Self {
        Self { n_recover: 50, reward: RewardModel::calibrated() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Candidates per input.
    pub n: usize,
    pub inputs_per_iteration: usize,
    /// Quality bar per iteration; its length is the iteration count.
    pub curriculum: Vec<f64>,
    /// Starting distribution of the model being aligned.
    pub current_model: QualityDist,
    /// Fixed generators pooled with the current model.
    pub auxiliaries: Vec<Generator>,
    /// Sources are drawn with probability proportional to
    /// `mean_quality^mix_sharpness`.
    pub mix_sharpness: f64,
    /// Fraction of the gap to the accepted-set mean closed per update.
    pub update_fraction: f64,
    pub annotator: AnnotatorModel,
    pub recovery: Option<RecoveryConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n: 8,
            inputs_per_iteration: 200,
            curriculum: vec![0.4, 0.45, 0.5, 0.55, 0.6],
            current_model: QualityDist { mean: 0.3, concentration: 8.0 },
            auxiliaries: vec![
                Generator { name: "retrieval".into(), quality: QualityDist { mean: 0.4, concentration: 8.0 } },
                Generator { name: "text-to-3d".into(), quality: QualityDist { mean: 0.35, concentration: 6.0 } },
            ],
            mix_sharpness: 4.0,
            update_fraction: 0.5,
            annotator: AnnotatorModel::default(),
            recovery: None,
        }
    }
}

pub const CURRENT_MODEL: &str = "current";

impl EngineConfig {
    /// A weak current model and weak auxiliaries: most first-pass
    /// selections fall below the bar.
    pub fn low_quality() -> Self {
        Self {
            inputs_per_iteration: 400,
            curriculum: vec![0.6],
            current_model: QualityDist { mean: 0.3, concentration: 6.0 },
            auxiliaries: vec![Generator { name: "retrieval".into(), quality: QualityDist { mean: 0.25, concentration: 6.0 } }],
            n: 2,
            ..Self::default()
        }
    }

    pub fn iterations(&self) -> usize {
        self.curriculum.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("N must be at least 2, got {}", self.n)));
        }
        if self.curriculum.is_empty() {
            return Err(Error::InvalidCurriculum("at least one iteration is required".into()));
        }
        if self.curriculum.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidCurriculum("thresholds must lie in [0, 1]".into()));
        }
        if self.curriculum.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidCurriculum("thresholds must be non-decreasing".into()));
        }
        if !(0.0..=1.0).contains(&self.update_fraction) || !(self.mix_sharpness >= 0.0 && self.mix_sharpness.is_finite()) {
            return Err(Error::InvalidConfig("update_fraction must lie in [0, 1] and mix_sharpness be non-negative".into()));
        }
        self.current_model.validate()?;
        for g in &self.auxiliaries {
            g.quality.validate()?;
            if g.name == CURRENT_MODEL {
                return Err(Error::InvalidConfig(format!("generator name {CURRENT_MODEL:?} is reserved")));
            }
        }
        self.annotator.validate()?;
        if let Some(r) = &self.recovery {
            if r.n_recover == 0 {
                return Err(Error::InvalidConfig("n_recover must be at least 1".into()));
            }
            r.reward.validate()?;
        }
        Ok(())
    }

    /// Source names; index 0 is the current model.
    pub fn source_names(&self) -> Vec<String> {
        std::iter::once(CURRENT_MODEL.to_string()).chain(self.auxiliaries.iter().map(|g| g.name.clone())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub alpha: f64,
    pub inputs: usize,
    /// Records from this iteration's collection that met its bar.
    pub collected_accepted: usize,
    /// Of those, records rescued by best-of-N recovery.
    pub recovered: usize,
    pub recovery_attempts: usize,
    /// Aggregated records over all iterations so far meeting the current bar.
    pub accepted: usize,
    pub mean_accepted_quality: Option<f64>,
    pub preference_pairs: usize,
    /// Share of this iteration's chosen demonstrations per source.
    pub source_mix: BTreeMap<String, f64>,
    /// Share of this iteration's candidates drawn from the current model.
    pub current_model_share: f64,
    pub current_model_mean: f64,
    pub current_model_elo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSummary {
    pub iterations: Vec<IterationReport>,
    pub final_current_model_mean: f64,
    pub total_records: usize,
    pub elo: BTreeMap<String, f64>,
}

fn source_weights(config: &EngineConfig, current: &QualityDist) -> Vec<f64> {
    std::iter::once(current.mean).chain(config.auxiliaries.iter().map(|g| g.quality.mean)).map(|m| m.powf(config.mix_sharpness)).collect()
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

pub fn run_engine<R: Rng + ?Sized>(config: &EngineConfig, rng: &mut R) -> Result<EngineSummary> {
    config.validate()?;
    let names = config.source_names();
    let mut current = config.current_model;
    let mut collected: Vec<PreferenceRecord> = Vec::new();
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut reports = Vec::with_capacity(config.iterations());
    let mut payload = 0u64;
    let mut input = 0u64;

    for (k, &alpha) in config.curriculum.iter().enumerate() {
        let weights = source_weights(config, &current);
        let dists: Vec<QualityDist> = std::iter::once(current).chain(config.auxiliaries.iter().map(|g| g.quality)).collect();
        let mut chosen_by_source = vec![0usize; names.len()];
        let (mut from_current, mut drawn) = (0usize, 0usize);
        let (mut collected_accepted, mut recovered, mut attempts) = (0, 0, 0);

        for _ in 0..config.inputs_per_iteration {
            let candidates: Vec<Demonstration> = (0..config.n)
                .map(|_| {
                    let source = pick(&weights, rng);
                    payload += 1;
                    Demonstration { input, payload, quality: dists[source].sample(rng), source }
                })
                .collect();
            drawn += candidates.len();
            from_current += candidates.iter().filter(|c| c.source == 0).count();
            let selection = knockout_select(&candidates, &config.annotator, rng)?;
            for (w, l) in &selection.decisions {
                if w.source != l.source {
                    outcomes.push(Outcome::new(names[w.source].clone(), names[l.source].clone(), Winner::A));
                }
            }
            let gate = rate_and_gate(&selection.best, alpha, &config.annotator, rng)?;
            let mut record = PreferenceRecord { chosen: selection.best, rejected: selection.rejected, rating: gate.rating() };

            if let (false, Some(rc)) = (gate.accepted(), &config.recovery) {
                attempts += 1;
                let pool: Vec<Demonstration> = (0..rc.n_recover)
                    .map(|_| {
                        payload += 1;
                        Demonstration { input, payload, quality: current.sample(rng), source: 0 }
                    })
                    .collect();
                let winner = tournament_rank(&pool, &rc.reward, rng)?.winner;
                let regate = rate_and_gate(&winner, alpha, &config.annotator, rng)?;
                if regate.accepted() {
                    recovered += 1;
                    let mut rejected = record.rejected;
                    rejected.push(record.chosen);
                    record = PreferenceRecord { chosen: winner, rejected, rating: regate.rating() };
                }
            }
            if record.rating >= alpha {
                collected_accepted += 1;
            }
            chosen_by_source[record.chosen.source] += 1;
            collected.push(record);
            input += 1;
        }

        let kept: Vec<&PreferenceRecord> = collected.iter().filter(|r| r.rating >= alpha).collect();
        let mean_accepted = (!kept.is_empty()).then(|| kept.iter().map(|r| r.chosen.quality.get()).sum::<f64>() / kept.len() as f64);
        let preference_pairs = kept.iter().map(|r| r.rejected.len()).sum();
        let source_mix =
            names.iter().zip(&chosen_by_source).map(|(n, &c)| (n.clone(), c as f64 / config.inputs_per_iteration.max(1) as f64)).collect();
        let elo = (!outcomes.is_empty()).then(|| elo_fit(&outcomes)).transpose()?;
        reports.push(IterationReport {
            iteration: k + 1,
            alpha,
            inputs: config.inputs_per_iteration,
            collected_accepted,
            recovered,
            recovery_attempts: attempts,
            accepted: kept.len(),
            mean_accepted_quality: mean_accepted,
            preference_pairs,
            source_mix,
            current_model_share: if drawn == 0 { 0.0 } else { from_current as f64 / drawn as f64 },
            current_model_mean: current.mean,
            current_model_elo: elo.as_ref().and_then(|f| f.ratings.get(CURRENT_MODEL).copied()),
        });

        if let Some(target) = mean_accepted {
            let mean = current.mean + config.update_fraction * (target - current.mean);
            current.mean = mean.clamp(1e-6, 1.0 - 1e-6);
        }
    }

    let elo = if outcomes.is_empty() { BTreeMap::new() } else { elo_fit(&outcomes)?.ratings };
    Ok(EngineSummary { iterations: reports, final_current_model_mean: current.mean, total_records: collected.len(), elo })
}

/// Mean quality of the knockout winner among `n` candidates from `dist`,
/// one value per trial.
pub fn selected_quality_trials<R: Rng + ?Sized>(
    dist: &QualityDist,
    n: usize,
    trials: usize,
    annotator: &AnnotatorModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    (0..trials)
        .map(|t| {
            let cands: Vec<Demonstration> =
                (0..n).map(|i| Demonstration { input: t as u64, payload: i as u64, quality: dist.sample(rng), source: 0 }).collect();
            Ok(knockout_select(&cands, annotator, rng)?.best.quality.get())
        })
        .collect()
}
