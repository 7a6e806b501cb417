//! Reward and policy-optimization math, exercised on toy softmax policies.

use thiserror::Error;

pub mod advantage;
pub mod objective;
pub mod policy;
pub mod reward;
pub mod train;

pub use advantage::{group_advantages, Advantages};
pub use objective::{clipped_term, gradient, grpo_step, kl_unbiased, loss, Group, GrpoConfig, StepDiagnostics};
pub use policy::PolicyParams;
pub use reward::{accuracy_reward, format_reward, total_reward, GroundTruth, RewardConfig};
pub use train::{train_toy, RunConfig, ToyTask, ToyTaskId, TrainOutput};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrpoError {
    #[error("group needs at least 2 outputs, got {0}")]
    GroupTooSmall(usize),
    #[error("probabilities must be positive")]
    NonPositiveProbability,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown toy task {0:?}")]
    UnknownTask(String),
}
