//! Training and evaluation of the exploration global policies: config
//! files, A2C, coverage evaluation and rotation-invariance diagnostics.

pub mod a2c;
pub mod config;
mod error;
pub mod eval;
pub mod policy;
pub mod rollout;
pub mod selftest;
pub mod train;

pub use a2c::{a2c_gradients, a2c_loss, a2c_update, batch_samples, LossStats, Optimizer, Sample};
pub use config::{OptimizerKind, RunConfig, TrainConfig};
pub use error::CoreError;
pub use eval::{
    collect_probe_states, cosine, evaluate_coverage, feature_similarity_matrix, invariance_report, mean_off_diagonal,
    rotation_std, rotation_std_from_values, CoverageReport, InvarianceReport, MeanMode, RotationProbe,
};
pub use policy::{run_episode, EpisodeRecord, GoalChoice, GoalPolicy};
pub use rollout::{
    collect_rollout, discounted_returns, returns_and_advantages, EpisodeSource, RolloutBuffer, Transition, Worker,
};
pub use train::{curve_csv, held_out_maps, map_pool, train, train_on, training_maps, CurveRow, TrainReport};
