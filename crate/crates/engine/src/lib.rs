//! Simulator of a human-in-the-loop data engine: candidate generation by
//! an ensemble of synthetic generators, pairwise knockout selection by a
//! noisy annotator, quality gating under a threshold curriculum,
//! preference-pair extraction, reward-model best-of-N recovery and
//! Bradley–Terry Elo fitting.

pub mod annotator;
pub mod elo;
mod error;
pub mod reward;
pub mod sim;

pub use annotator::{
    knockout_select, pairwise_choice, rate_and_gate, AnnotatorModel, Choice, Demonstration, Gate, PreferenceRecord, Quality, Selection,
};
pub use elo::{elo_fit, elo_online, win_probability, EloFit, Outcome, Winner};
pub use error::{Error, Result};
pub use reward::{tournament_rank, RewardModel, Tournament};
pub use sim::{run_engine, selected_quality_trials, EngineConfig, EngineSummary, Generator, IterationReport, QualityDist, RecoveryConfig};
