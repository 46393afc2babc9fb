//! Reinforcement-learning posture selection: environment, policy network,
//! PPO updates, training loop, and evaluation.

pub mod env;
pub mod policy;
pub mod ppo;
pub mod train;

pub use env::{FeatureVector, SelectionEnv, StatsSource};
pub use policy::{
    load_checkpoint, policy_forward, save_checkpoint, Adam, CheckpointMeta, PolicyParams,
};
pub use ppo::{
    batch_loss, batch_loss_and_grad, compute_returns, ppo_update, LossTerms, LossWeights,
    PpoBatch, PpoHyper, Returns, RolloutBuffer, RolloutEpisode, RolloutStep,
};
pub use train::{
    evaluate_policy, policy_select_greedy, policy_select_sampled, train, CandidateSource,
    EpisodeLogEntry, EvalMode, PolicyEvaluation, PolicyEpisodeEval, TrainConfig, TrainOutcome,
    TrainingLog, UniformSource,
};
