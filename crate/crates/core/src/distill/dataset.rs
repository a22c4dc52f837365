//! Expert transition datasets and their binary file format.

use std::path::Path;
use std::sync::Arc;

use crate::control_graph::{build_cg, HistoryBuffer, ObservationSpec};
use crate::env::{
    local_observations, parse_task, scripted_expert, serialize_task, EnvSpec, EnvState, GoalInput, TaskKind,
    DEFAULT_DT,
};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::morphology::{parse_morphology, serialize_morphology};
use crate::nn::{PolicyConfig, PolicyInput};
use crate::tensor::Tensor;

use super::codec::{Reader, Writer};

pub const DATASET_MAGIC: &[u8; 4] = b"CGDS";
pub const DATASET_VERSION: u32 = 1;
pub const DEFAULT_TRANSITIONS: usize = 12_000;
/// Steps recorded after every goal is met, so the data shows the expert
/// holding still.
pub const HOLD_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    /// Local observations, `n_nodes x obs width`, row-major.
    pub features: Vec<f32>,
    pub actions: Vec<f32>,
    /// Goal inputs, three values each, in the order of [`EnvState::goal_inputs`].
    pub goals: Vec<f32>,
}

#[derive(Debug, Clone)]
pub struct EnvData {
    pub env: EnvSpec,
    pub obs: ObservationSpec,
    pub transitions: Vec<Transition>,
}

#[derive(Debug, Clone)]
pub struct TransitionDataset {
    pub format_version: u32,
    pub environments: Vec<EnvData>,
}

/// Outcome of rolling the expert for one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertStats {
    pub env_id: String,
    pub transitions: usize,
    pub episodes: usize,
    pub successes: usize,
    /// Goal distances at the last recorded state of every kept episode.
    pub final_distances: Vec<Vec<f64>>,
}

impl ExpertStats {
    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

/// Modules the goal inputs of `env` refer to: one per goal, plus the first
/// goal's module again for the box of push tasks.
pub fn goal_input_nodes(env: &EnvSpec) -> Result<Vec<usize>> {
    let mut nodes = env.task.goals.iter().map(|g| g.target.resolve(&env.graph)).collect::<Result<Vec<_>>>()?;
    if env.task.task_kind == TaskKind::Push {
        nodes.push(nodes[0]);
    }
    Ok(nodes)
}

fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Per-environment seed stream derived from the run seed.
fn env_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Rolls the expert once. Returns the recorded steps and the final goal
/// distances if every goal was met within the horizon.
fn expert_episode(
    env: &EnvSpec,
    obs: &ObservationSpec,
    gain: f64,
    seed: u64,
) -> Result<Option<(Vec<Transition>, Vec<f64>)>> {
    let mut state = env.reset(seed)?;
    let mut steps = Vec::new();
    let mut hold = None;
    while !state.is_done() {
        if hold.is_none() && state.all_goals_met() {
            hold = Some(HOLD_STEPS);
        }
        if hold == Some(0) {
            break;
        }
        let action = scripted_expert(&state, gain);
        steps.push(record(&state, obs, &action));
        state = state.step(&action, DEFAULT_DT)?;
        hold = hold.map(|h| h - 1);
    }
    Ok(hold.is_some().then(|| (steps, state.goal_distances())))
}

fn record(state: &EnvState, obs: &ObservationSpec, action: &[f64]) -> Transition {
    let features = local_observations(state, obs);
    let goals: Vec<f64> = state.goal_inputs().iter().flat_map(|g| g.value.to_array()).collect();
    Transition { features: to_f32(features.data()), actions: to_f32(action), goals: to_f32(&goals) }
}

/// Collects `n` expert transitions for one environment, keeping only
/// episodes that meet every goal.
pub fn generate_env_data(
    env: &EnvSpec,
    obs: &ObservationSpec,
    gain: f64,
    n: usize,
    seed: u64,
) -> Result<(EnvData, ExpertStats)> {
    let mut transitions = Vec::with_capacity(n);
    let (mut episodes, mut successes) = (0usize, 0usize);
    let mut final_distances = Vec::new();
    let quality = |episodes: usize, successes: usize| Error::DataQuality {
        env: env.id.clone(),
        msg: format!("expert met the goals in only {successes} of {episodes} episodes"),
    };
    while transitions.len() < n {
        let ep_seed = seed.wrapping_add(episodes as u64);
        episodes += 1;
        match expert_episode(env, obs, gain, ep_seed)? {
            Some((steps, last)) => {
                successes += 1;
                final_distances.push(last);
                let room = n - transitions.len();
                transitions.extend(steps.into_iter().take(room));
            }
            None => {
                let fails = episodes - successes;
                if fails >= 100 && fails > successes {
                    return Err(quality(episodes, successes));
                }
            }
        }
    }
    if 2 * successes < episodes {
        return Err(quality(episodes, successes));
    }
    let stats =
        ExpertStats { env_id: env.id.clone(), transitions: transitions.len(), episodes, successes, final_distances };
    Ok((EnvData { env: env.clone(), obs: obs.clone(), transitions }, stats))
}

/// Expert data for every environment. Environments are generated on
/// separate threads with independent seed streams; the output keeps the
/// input order.
pub fn generate_dataset(
    envs: &[EnvSpec],
    obs: &ObservationSpec,
    gain: f64,
    n_transitions: usize,
    seed: u64,
) -> Result<(TransitionDataset, Vec<ExpertStats>)> {
    let results: Vec<Result<(EnvData, ExpertStats)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = envs
            .iter()
            .enumerate()
            .map(|(i, env)| scope.spawn(move || generate_env_data(env, obs, gain, n_transitions, env_seed(seed, i))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("generation thread panicked")).collect()
    });
    let mut environments = Vec::with_capacity(envs.len());
    let mut stats = Vec::with_capacity(envs.len());
    for r in results {
        let (d, s) = r?;
        environments.push(d);
        stats.push(s);
    }
    Ok((TransitionDataset { format_version: DATASET_VERSION, environments }, stats))
}

impl EnvData {
    pub fn num_nodes(&self) -> usize {
        self.env.graph.num_nodes()
    }

    pub fn observation(&self, t: &Transition) -> Tensor {
        let n = self.num_nodes();
        Tensor::matrix(n, t.features.len() / n, t.features.iter().map(|&v| v as f64).collect())
    }

    pub fn goal_inputs(&self, t: &Transition, nodes: &[usize]) -> Vec<GoalInput> {
        t.goals
            .chunks_exact(3)
            .zip(nodes)
            .map(|(c, &node)| GoalInput { node, value: Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) })
            .collect()
    }

    /// Indices where a new episode starts: the first transition and every
    /// transition whose task goals differ from its predecessor's. Goals are
    /// resampled at each reset and fixed within an episode.
    pub fn episode_starts(&self) -> Vec<bool> {
        let g = 3 * self.env.task.goals.len();
        let mut prev: Option<&[f32]> = None;
        self.transitions
            .iter()
            .map(|t| {
                let cur = &t.goals[..g.min(t.goals.len())];
                let start = prev != Some(cur);
                prev = Some(cur);
                start
            })
            .collect()
    }

    /// Policy inputs for every transition, with history frames taken from
    /// the same episode.
    pub fn policy_inputs(&self, config: &PolicyConfig) -> Result<Vec<PolicyInput>> {
        let obs = config.obs_spec()?;
        if obs != self.obs {
            return Err(Error::Config(format!(
                "policy observes '{obs}' but the dataset for {} stores '{}'",
                self.env.id, self.obs
            )));
        }
        let nodes = goal_input_nodes(&self.env)?;
        let mut history = HistoryBuffer::new(config.history);
        let starts = self.episode_starts();
        self.transitions
            .iter()
            .zip(starts)
            .map(|(t, start)| {
                if start {
                    history.clear();
                }
                let frame = build_cg(
                    config.cg_variant,
                    &self.observation(t),
                    &self.goal_inputs(t, &nodes),
                    &self.env.graph,
                    &obs,
                )?;
                PolicyInput::from_cg(&history.push(frame)?, config)
            })
            .collect()
    }
}

fn env_header(env: &EnvSpec) -> String {
    format!("# env {}\n{}", env.id, serialize_task(&env.task))
}

impl TransitionDataset {
    pub fn num_transitions(&self) -> usize {
        self.environments.iter().map(|e| e.transitions.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        w.bytes(DATASET_MAGIC);
        w.u32(self.format_version);
        w.len(self.environments.len());
        for e in &self.environments {
            w.str(&serialize_morphology(&e.env.graph));
            w.str(&env_header(&e.env));
            w.u16(e.obs.bitmask());
            w.len(e.transitions.len());
            for t in &e.transitions {
                w.f32s(&t.features);
                w.f32s(&t.actions);
                w.f32s(&t.goals);
            }
        }
        w.buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != DATASET_MAGIC {
            return Err(Error::Corruption("not a dataset file (bad magic)".into()));
        }
        let format_version = r.u32()?;
        if format_version != DATASET_VERSION {
            return Err(Error::Corruption(format!("unsupported dataset version {format_version}")));
        }
        let n_env = r.u32()? as usize;
        let mut environments = Vec::with_capacity(n_env.min(1024));
        for _ in 0..n_env {
            let graph = parse_morphology(&r.str()?)?;
            let task_text = r.str()?;
            let id = task_text
                .lines()
                .next()
                .and_then(|l| l.strip_prefix("# env "))
                .ok_or_else(|| Error::Corruption("task text lacks the environment id line".into()))?
                .trim()
                .to_string();
            let task = parse_task(&task_text)?;
            let obs = ObservationSpec::from_bitmask(r.u16()?)?;
            let count = r.u32()? as usize;
            let mut transitions = Vec::with_capacity(count.min(1 << 20));
            let n = graph.num_nodes();
            let dim = graph.action_dimension();
            for i in 0..count {
                let t = Transition { features: r.f32s()?, actions: r.f32s()?, goals: r.f32s()? };
                if t.features.len() != n * obs.width() || t.actions.len() != dim || t.goals.len() % 3 != 0 {
                    return Err(Error::Corruption(format!("transition {i} of {id} has inconsistent lengths")));
                }
                transitions.push(t);
            }
            let env = EnvSpec { id, graph: Arc::new(graph), task: Arc::new(task) };
            environments.push(EnvData { env, obs, transitions });
        }
        if !r.is_done() {
            return Err(Error::Corruption("trailing bytes after the last environment".into()));
        }
        Ok(TransitionDataset { format_version, environments })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::DEFAULT_EXPERT_GAIN;

    fn small(ids: &[&str], n: usize, seed: u64) -> TransitionDataset {
        let envs: Vec<EnvSpec> = ids.iter().map(|id| EnvSpec::from_id(id).unwrap()).collect();
        generate_dataset(&envs, &ObservationSpec::base_set_m(), DEFAULT_EXPERT_GAIN, n, seed).unwrap().0
    }

    #[test]
    fn exact_transition_count() {
        let d = small(&["ant_reach_3"], 100, 1);
        assert_eq!(d.environments[0].transitions.len(), 100);
        assert_eq!(d.environments[0].transitions[0].actions.len(), 6);
    }

    #[test]
    fn bytes_round_trip_and_determinism() {
        let d = small(&["ant_reach_3", "ant_twister_3"], 150, 7);
        let b = d.to_bytes();
        assert_eq!(small(&["ant_reach_3", "ant_twister_3"], 150, 7).to_bytes(), b);
        let back = TransitionDataset::from_bytes(&b).unwrap();
        assert_eq!(back.to_bytes(), b);
        assert_eq!(back.environments[1].env.id, "ant_twister_3");
        assert_eq!(back.environments[1].env.task.goals.len(), 2);
    }

    #[test]
    fn truncated_file_is_corruption() {
        let b = small(&["ant_reach_3"], 20, 2).to_bytes();
        let r = TransitionDataset::from_bytes(&b[..b.len() - 3]);
        assert!(matches!(r, Err(Error::Corruption(_))));
    }

    #[test]
    fn episodes_are_recovered() {
        let d = small(&["ant_reach_3"], 400, 3);
        let e = &d.environments[0];
        let starts = e.episode_starts();
        assert!(starts[0]);
        let n_eps = starts.iter().filter(|&&s| s).count();
        assert!(n_eps >= 2, "{n_eps}");
        // A new episode restarts from the reset pose, where velocities vanish.
        let v = e.obs.offset(crate::control_graph::ObsFlag::V).unwrap();
        for (t, s) in e.transitions.iter().zip(&starts) {
            if *s {
                assert!(t.features.chunks(e.obs.width()).all(|row| row[v..v + 3] == [0.0; 3]));
            }
        }
    }

    #[test]
    fn unsolvable_env_is_data_quality_error() {
        let env = EnvSpec::from_id("ant_reach_3").unwrap();
        let r = generate_env_data(&env, &ObservationSpec::base_set_m(), 0.0, 50, 0);
        assert!(matches!(r, Err(Error::DataQuality { .. })));
    }
}
