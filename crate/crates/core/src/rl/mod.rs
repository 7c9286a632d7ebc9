//! Actor-critic policy, rollout storage and clipped policy-gradient updates.

mod buffer;
mod mlp;
mod policy;
mod ppo;

pub use buffer::{gae, RolloutBuffer, Transition};
pub use mlp::{Cache, Mlp};
pub use policy::{normalize, HeadDists, PolicyParams, HEADS, N_LOGITS, OBS_LEN};
pub use ppo::{clipped_objective, loss_and_grad, Adam, Batch, Learner, LossParts, PpoConfig, UpdateStats};

use thiserror::Error;

/// Hidden widths of both networks.
pub const HIDDEN: [usize; 2] = [256, 128];

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RlError {
    #[error("policy parameters are not finite")]
    NonFiniteParams,
    #[error("loss or gradient became non-finite; update aborted")]
    NonFiniteLoss,
    #[error("rollout buffer is empty")]
    EmptyBuffer,
    #[error("advantages have not been computed")]
    MissingAdvantages,
    #[error("invalid optimiser configuration")]
    InvalidConfig,
}
