use crate::control_graph::{build_cg, HistoryBuffer};
use crate::env::{local_observations, scripted_expert, EnvSpec, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::nn::{policy_act, PolicyInput, PolicyParams};
use crate::tensor::Tensor;

/// Whatever picks the actions during a rollout.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    Policy(&'a PolicyParams),
    /// The scripted expert with the given gain.
    Expert(f64),
    /// Always outputs zeros.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub env_id: String,
    pub seed: u64,
    /// Joint angles before every step and after the last one.
    pub joint_angles: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    /// Goal distances aligned with `joint_angles`.
    pub distances: Vec<Vec<f64>>,
    /// Per step, `layers * heads` attention maps, layer-major. Only filled
    /// when requested from a transformer policy.
    pub attention: Vec<Vec<Tensor>>,
    /// Rows of the control graph that hold goal nodes.
    pub goal_rows: std::ops::Range<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn final_distances(&self) -> &[f64] {
        self.distances.last().expect("a trajectory holds its initial state")
    }

    /// Little-endian dump of angles, actions and distances, for comparing
    /// runs bit for bit.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for rows in [&self.joint_angles, &self.actions, &self.distances] {
            for v in rows.iter().flatten() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }
}

/// Runs `controller` on `env` from the reset drawn with `seed` for
/// `min(horizon, episode_length)` steps.
pub fn rollout(controller: Controller, env: &EnvSpec, seed: u64, horizon: usize) -> Result<Trajectory> {
    rollout_with(controller, env, seed, horizon, false)
}

pub(crate) fn rollout_with(
    controller: Controller,
    env: &EnvSpec,
    seed: u64,
    horizon: usize,
    record_attention: bool,
) -> Result<Trajectory> {
    let mut state = env.reset(seed)?;
    let dim = env.graph.action_dimension();
    let steps = horizon.min(env.task.episode_length);
    let mut traj = Trajectory {
        env_id: env.id.clone(),
        seed,
        joint_angles: vec![state.joint_angles.clone()],
        actions: Vec::with_capacity(steps),
        distances: vec![state.goal_distances()],
        attention: Vec::new(),
        goal_rows: 0..0,
    };
    let policy = match controller {
        Controller::Policy(p) => {
            p.config.validate()?;
            Some((p, p.config.obs_spec()?))
        }
        _ => None,
    };
    let mut history = HistoryBuffer::new(policy.as_ref().map_or(1, |(p, _)| p.config.history));
    for _ in 0..steps {
        let action = match (&policy, controller) {
            (Some((p, obs)), _) => {
                let frame = build_cg(
                    p.config.cg_variant,
                    &local_observations(&state, obs),
                    &state.goal_inputs(),
                    &env.graph,
                    obs,
                )?;
                traj.goal_rows = frame.n_body_nodes..frame.n_nodes();
                let input: PolicyInput = PolicyInput::from_cg(&history.push(frame)?, &p.config)?;
                let (a, attn) = policy_act(p, &input)?;
                if record_attention {
                    traj.attention.push(attn);
                }
                a
            }
            (None, Controller::Expert(gain)) => scripted_expert(&state, gain),
            _ => vec![0.0; dim],
        };
        if action.len() != dim {
            return Err(Error::Shape(format!(
                "controller produced {} actions, {} has {dim} actuators",
                action.len(),
                env.id
            )));
        }
        state = state.step(&action, DEFAULT_DT)?;
        traj.actions.push(action);
        traj.joint_angles.push(state.joint_angles.clone());
        traj.distances.push(state.goal_distances());
    }
    Ok(traj)
}

/// Final goal distances of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub env_id: String,
    pub seed: u64,
    pub final_distances: Vec<f64>,
}

/// Rolls `controller` out for every environment and seed. Environments run
/// on separate threads; results keep the order of `envs` then `seeds`.
pub fn evaluate(controller: Controller, envs: &[EnvSpec], seeds: &[u64], horizon: usize) -> Result<Vec<Vec<Episode>>> {
    let results: Vec<Result<Vec<Episode>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = envs
            .iter()
            .map(|env| {
                scope.spawn(move || {
                    seeds
                        .iter()
                        .map(|&seed| {
                            let t = rollout(controller, env, seed, horizon)?;
                            Ok(Episode { env_id: env.id.clone(), seed, final_distances: t.final_distances().to_vec() })
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("rollout thread panicked")).collect()
    });
    results.into_iter().collect()
}
