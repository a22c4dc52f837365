use std::fmt;

use crate::env::EnvId;
use crate::error::{Error, Result};
use crate::morphology::Blueprint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    InDistribution,
    CompositionalMorphology,
    CompositionalTask,
    OutOfDistribution,
}

impl SplitKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::InDistribution => "indist",
            SplitKind::CompositionalMorphology => "comp-morph",
            SplitKind::CompositionalTask => "comp-task",
            SplitKind::OutOfDistribution => "ood",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "indist" | "in_distribution" => SplitKind::InDistribution,
            "comp-morph" | "compositional_morphology" => SplitKind::CompositionalMorphology,
            "comp-task" | "compositional_task" => SplitKind::CompositionalTask,
            "ood" | "out_of_distribution" => SplitKind::OutOfDistribution,
            _ => return None,
        })
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a split holds out.
#[derive(Debug, Clone, PartialEq)]
pub struct Holdout {
    /// Module counts held out by the compositional morphology split.
    pub counts: Vec<usize>,
    /// Families the morphology holdout applies to.
    pub blueprints: Vec<Blueprint>,
    /// Task held out by the compositional task and out-of-distribution splits.
    pub task: String,
}

impl Default for Holdout {
    fn default() -> Self {
        Holdout { counts: vec![4], blueprints: vec![Blueprint::Ant, Blueprint::Claw], task: "reach_hard".into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub universe: Vec<String>,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

/// Splits `universe` into train and test environments, preserving order.
///
/// Morphology splits test on the held-out sizes of the held-out families.
/// Task splits test on the held-out task with standard morphologies and
/// train on every other task. Out-of-distribution splits also train on
/// other tasks but test on the held-out task with mass, size or
/// missing-limb variations.
pub fn split_environments(universe: &[String], kind: SplitKind, holdout: &Holdout) -> Result<SplitPlan> {
    if universe.is_empty() {
        return Err(Error::Config("environment universe is empty".into()));
    }
    let ids = universe.iter().map(|s| EnvId::parse(s)).collect::<Result<Vec<_>>>()?;
    let (train, test): (Vec<String>, Vec<String>) = match kind {
        SplitKind::InDistribution => (universe.to_vec(), universe.to_vec()),
        SplitKind::CompositionalMorphology => {
            let held = |e: &EnvId| {
                e.variation.is_empty() && holdout.blueprints.contains(&e.blueprint) && holdout.counts.contains(&e.count)
            };
            partition(universe, &ids, |e| !held(e), held)
        }
        SplitKind::CompositionalTask => partition(
            universe,
            &ids,
            |e| e.task != holdout.task,
            |e| e.task == holdout.task && e.variation.is_empty(),
        ),
        SplitKind::OutOfDistribution => partition(
            universe,
            &ids,
            |e| e.task != holdout.task && e.variation.is_empty(),
            |e| e.task == holdout.task && !e.variation.is_empty(),
        ),
    };
    if train.is_empty() {
        return Err(Error::Config(format!("the {kind} holdout leaves no training environments")));
    }
    if test.is_empty() {
        return Err(Error::Config(format!("the {kind} holdout selects no test environments")));
    }
    Ok(SplitPlan { kind, universe: universe.to_vec(), train, test })
}

fn partition(
    universe: &[String],
    ids: &[EnvId],
    train: impl Fn(&EnvId) -> bool,
    test: impl Fn(&EnvId) -> bool,
) -> (Vec<String>, Vec<String>) {
    let pick = |f: &dyn Fn(&EnvId) -> bool| {
        universe.iter().zip(ids).filter(|(_, e)| f(e)).map(|(s, _)| s.clone()).collect::<Vec<_>>()
    };
    (pick(&train), pick(&test))
}
