//! Planner-only group-relative policy optimization on a trainable
//! plan-template policy.

mod group;
mod objective;
mod policy;
mod train;

pub use group::{collect_group, CollectConfig, FrozenRoles, RolloutGroup, ScriptedRoles};
pub use objective::{
    categorical_kl, grpo_objective, importance_ratio, kl_divergence, l2_norm, normalize_advantages,
    normalize_advantages_with, ratio_with_flag, update_policy, ObjectiveConfig, ObjectiveValue, StdKind, Weighting,
    RATIO_MAX, RATIO_MIN, ZERO_STD,
};
pub use policy::{
    log_softmax, PlanningRecord, PolicyContext, PolicyParams, PolicyPlanner, DEFAULT_MEMORY_BUCKETS,
    DEFAULT_TEMPERATURE,
};
pub use train::{
    evaluate_policy, expected_success, template_success_table, train_planner, IterationStats, TrainConfig,
    TrainOutcome, TrainReport, Trainer, REFERENCE_LLM_LEARNING_RATE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("policy has no plan templates")]
    NoTemplates,
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("group size {0} is below 2")]
    GroupTooSmall(usize),
    #[error("group advantages have not been normalized")]
    NotNormalized,
    #[error("policy and reference use different template sets")]
    TemplateMismatch,
    #[error("no tasks to train on")]
    EmptyTasks,
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}
