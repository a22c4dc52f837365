//! Rollouts, the normalized final distance, environment splits and
//! attention exports.

mod attention;
mod metric;
mod rollout;
mod split;

pub use attention::{attention_report, AttentionReport};
pub use metric::{
    eval_seeds, normalized_final_distance, percentage_improvement, Bounds, EnvScore, MetricResult, MetricRow,
    DEFAULT_EVAL_SEEDS, METRIC_CSV_HEADER,
};
pub use rollout::{evaluate, rollout, Controller, Episode, Trajectory};
pub use split::{split_environments, Holdout, SplitKind, SplitPlan};

use crate::env::EnvSpec;
use crate::error::Result;

/// Evaluates `controller` on `envs` over `seeds` and scores the result.
pub fn score(controller: Controller, envs: &[EnvSpec], seeds: &[u64], horizon: usize) -> Result<MetricResult> {
    let episodes = evaluate(controller, envs, seeds, horizon)?;
    let groups: Vec<(Bounds, Vec<Episode>)> = envs.iter().map(Bounds::of).zip(episodes).collect();
    normalized_final_distance(&groups)
}

#[cfg(test)]
mod tests;
