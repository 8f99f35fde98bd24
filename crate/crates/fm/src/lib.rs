//! Training objectives of a multi-modal rectified-flow model, written
//! against an abstract [`VelocityField`]: flow-matching targets and loss,
//! classifier-free guidance, shortcut self-consistency targets, the
//! flow-matching preference loss and an Euler sampler with evaluation
//! accounting.

pub mod check;
pub mod dpo;
mod error;
pub mod field;
pub mod flow;
pub mod sampler;
pub mod shortcut;

pub use dpo::{dpo_delta, dpo_loss, DpoConfig, Preferred};
pub use error::{Error, Result};
pub use field::{Condition, ConstantField, Counting, FnField, LinearField, Modality, VelocityField};
pub use flow::{cfm_loss, cfm_loss_gradient_linear, interp_state, target_velocity, FlowBatch, FlowSample, ModalityWeights, StatePair};
pub use sampler::{euler_sample, SampleOutput, SamplerConfig};
pub use shortcut::{cfg_combine, consistency_target, draw_branch, sample_tau_d, shortcut_loss, Branch, ShortcutConfig, StopGrad};
