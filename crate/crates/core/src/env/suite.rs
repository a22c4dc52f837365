//! Named environments: a morphology paired with a task, addressed by ids
//! such as `ant_reach_4` or `claw_reach_handsup_3_mass_0.5_1.0_3.0`.

use std::sync::Arc;

use super::sim::EnvState;
use super::task::TaskSpec;
use crate::error::{Error, Result};
use crate::morphology::{generate_morphology, Blueprint, MorphologyGraph, Variation};

/// Resets used to estimate the desk-scale `d_max`.
pub const D_MAX_SAMPLES: usize = 1000;
const D_MAX_SEED: u64 = 0x00d1_5ca1;

#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub id: String,
    pub graph: Arc<MorphologyGraph>,
    pub task: Arc<TaskSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvId {
    pub blueprint: Blueprint,
    pub task: String,
    pub count: usize,
    pub variation: Variation,
}

impl EnvId {
    pub fn parse(id: &str) -> Result<EnvId> {
        let bad = || Error::Config(format!("malformed environment id '{id}'"));
        let parts: Vec<&str> = id.split('_').collect();
        let blueprint = Blueprint::parse(parts.first().ok_or_else(bad)?).ok_or_else(bad)?;
        let count_at = parts.iter().position(|p| p.parse::<usize>().is_ok()).ok_or_else(bad)?;
        if count_at < 2 {
            return Err(bad());
        }
        let task = parts[1..count_at].join("_");
        let count = parts[count_at].parse().map_err(|_| bad())?;
        let tag = std::iter::once(format!("{}_{count}", blueprint.as_str()))
            .chain(parts[count_at + 1..].iter().map(|s| s.to_string()))
            .collect::<Vec<_>>()
            .join("_");
        let (_, _, variation) = crate::morphology::blueprint::parse_tag(&tag).ok_or_else(bad)?;
        Ok(EnvId { blueprint, task, count, variation })
    }

    /// Sub-domain label, e.g. `ant_reach`.
    pub fn family(&self) -> String {
        format!("{}_{}", self.blueprint.as_str(), self.task)
    }
}

impl EnvSpec {
    pub fn new(id: impl Into<String>, graph: MorphologyGraph, task: TaskSpec) -> Result<EnvSpec> {
        task.validate()?;
        Ok(EnvSpec { id: id.into(), graph: Arc::new(graph), task: Arc::new(task) })
    }

    /// Builds the environment named by `id`, with `d_max` calibrated as the
    /// mean initial goal distance.
    pub fn from_id(id: &str) -> Result<EnvSpec> {
        let parsed = EnvId::parse(id)?;
        let v = (!parsed.variation.is_empty()).then_some(&parsed.variation);
        let graph = generate_morphology(parsed.blueprint, parsed.count, v)?;
        let mut task = TaskSpec::standard(&parsed.task, &graph)?;
        task.d_max = calibrate_d_max(&task, &graph, D_MAX_SAMPLES, D_MAX_SEED)?;
        Self::new(id, graph, task)
    }

    pub fn reset(&self, seed: u64) -> Result<EnvState> {
        EnvState::reset(self.graph.clone(), self.task.clone(), seed)
    }

    pub fn family(&self) -> String {
        EnvId::parse(&self.id).map(|e| e.family()).unwrap_or_else(|_| self.id.clone())
    }
}

/// Mean distance of each goal at reset over `samples` seeded resets, kept
/// above `d_min`.
pub fn calibrate_d_max(task: &TaskSpec, graph: &MorphologyGraph, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let graph = Arc::new(graph.clone());
    let mut probe = task.clone();
    probe.d_max = task.d_min.iter().map(|d| d + 1.0).collect();
    let probe = Arc::new(probe);
    let mut sums = vec![0.0; task.goals.len()];
    for s in 0..samples as u64 {
        let state = EnvState::reset(graph.clone(), probe.clone(), seed.wrapping_add(s))?;
        for (acc, d) in sums.iter_mut().zip(state.goal_distances()) {
            *acc += d;
        }
    }
    Ok(sums
        .iter()
        .zip(&task.d_min)
        .map(|(s, lo)| crate::morphology::canon((s / samples as f64).max(lo * 2.0)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_ids() {
        let e = EnvId::parse("ant_reach_hard_4_mass_0.5_1.0_3.0").unwrap();
        assert_eq!((e.blueprint, e.task.as_str(), e.count), (Blueprint::Ant, "reach_hard", 4));
        assert_eq!(e.variation.mass_scales, Some([0.5, 1.0, 3.0]));
        assert_eq!(e.family(), "ant_reach_hard");
        assert!(EnvId::parse("ant_4").is_err());
        assert!(EnvId::parse("dog_reach_4").is_err());
    }

    #[test]
    fn build_env() {
        let env = EnvSpec::from_id("ant_reach_handsup_3").unwrap();
        assert_eq!(env.task.goals.len(), 2);
        assert!(env.task.d_max.iter().zip(&env.task.d_min).all(|(hi, lo)| hi > lo));
        assert_eq!(env.graph.blueprint_tag, "ant_3");
        let v = EnvSpec::from_id("ant_reach_5_missing_0").unwrap();
        assert_eq!(v.graph.action_dimension(), 9);
    }
}
