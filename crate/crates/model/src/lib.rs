//! The autoregressive noisy-filtration model: input node representations,
//! structural/temporal mixing, a mixture-of-Bernoulli edge decoder,
//! likelihoods and sampling; stage I teacher-forced training, checkpoints,
//! and adversarial PPO fine-tuning.

pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod decoder;
pub mod finetune;
pub mod inputs;
pub mod layers;
pub mod likelihood;
pub mod model;
pub mod sampling;
pub mod training;

pub use checkpoint::{
    gan_checkpoint, gan_from_checkpoint, model_checkpoint, model_from_checkpoint, trainer_checkpoint,
    trainer_from_checkpoint, Checkpoint, CheckpointError,
};
pub use config::{ModelConfig, TemporalMode};
pub use finetune::{
    clamped_reward, discriminator_step, ppo_update, rewards_to_go, terminal_reward, value_step, DiscReport,
    Discriminator, EpochStats, GanConfig, GanState, IterationReport, RewardStats, ValueModel,
};
pub use inputs::{step_features, SequenceInputs, StepFeatures, FEATURE_DIM};
pub use likelihood::{step_log_likelihood, EdgeDistribution, StepLogLik, LOG_ZERO};
pub use model::{AnfmModel, LikelihoodVars, SequenceLogLik};
pub use sampling::{sample, sample_many, Rollout, SampleMode};
pub use training::{expand, StepReport, TrainConfig, Trainer};

use anfm_graph::GraphError;
use anfm_tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("graph with {n} nodes exceeds the model's {max} node embeddings")]
    TooManyNodes { n: usize, max: usize },
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}
