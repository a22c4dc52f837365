use std::path::Path;

use super::rollout::{rollout_with, Controller, Trajectory};
use crate::control_graph::CgVariant;
use crate::distill::{parse_tensor_table, tensor_table_bytes};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::nn::PolicyParams;
use crate::tensor::Tensor;

/// Attention maps of a transformer policy along one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionReport {
    pub env_id: String,
    pub seed: u64,
    pub layers: usize,
    pub heads: usize,
    pub nodes: usize,
    /// `steps[t][layer * heads + head]` is an `nodes x nodes` row-stochastic map.
    pub steps: Vec<Vec<Tensor>>,
    /// For v2 graphs, the attention each step puts on goal nodes: the
    /// summed weight on goal columns, averaged over query rows, heads and
    /// layers.
    pub goal_mass: Option<Vec<f64>>,
}

impl AttentionReport {
    /// `[steps, layers, heads, nodes, nodes]`.
    pub fn shape(&self) -> [usize; 5] {
        [self.steps.len(), self.layers, self.heads, self.nodes, self.nodes]
    }

    /// Tensor-table encoding with one tensor per `attn/step/layer/head`,
    /// plus `goal_mass` for v2 graphs.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = format!(
            "env={}\nseed={}\nlayers={}\nheads={}\nnodes={}\n",
            self.env_id, self.seed, self.layers, self.heads, self.nodes
        );
        let mut named: Vec<(String, &Tensor)> = Vec::new();
        for (t, maps) in self.steps.iter().enumerate() {
            for (k, m) in maps.iter().enumerate() {
                named.push((format!("attn/{t}/{}/{}", k / self.heads, k % self.heads), m));
            }
        }
        let mass = self.goal_mass.as_ref().map(|g| Tensor::matrix(1, g.len(), g.clone()));
        if let Some(m) = &mass {
            named.push(("goal_mass".into(), m));
        }
        tensor_table_bytes("attention", &header, &named)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Tensor names and shapes of an exported report.
    pub fn read_index(bytes: &[u8]) -> Result<Vec<(String, Vec<usize>)>> {
        let table = parse_tensor_table(bytes)?;
        if table.tag != "attention" {
            return Err(Error::Corruption(format!("expected an attention export, found '{}'", table.tag)));
        }
        Ok(table.tensors.into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect())
    }
}

/// Rolls the transformer policy out on `env` and collects its attention.
pub fn attention_report(params: &PolicyParams, env: &EnvSpec, seed: u64, horizon: usize) -> Result<AttentionReport> {
    let c = &params.config;
    if !c.arch.is_transformer() {
        return Err(Error::Unsupported(format!("{} policies have no attention to report", c.arch)));
    }
    let traj = rollout_with(Controller::Policy(params), env, seed, horizon, true)?;
    Ok(from_trajectory(params, &traj))
}

fn from_trajectory(params: &PolicyParams, traj: &Trajectory) -> AttentionReport {
    let c = &params.config;
    let nodes = traj.attention.first().and_then(|m| m.first()).map_or(0, |m| m.rows());
    let goal_mass = (c.cg_variant == CgVariant::V2).then(|| {
        traj.attention
            .iter()
            .map(|maps| {
                let mut total = 0.0;
                for m in maps {
                    for r in 0..m.rows() {
                        total += traj.goal_rows.clone().map(|j| m.at(r, j)).sum::<f64>();
                    }
                }
                total / (maps.len() * nodes) as f64
            })
            .collect()
    });
    AttentionReport {
        env_id: traj.env_id.clone(),
        seed: traj.seed,
        layers: c.layers,
        heads: c.heads,
        nodes,
        steps: traj.attention.clone(),
        goal_mass,
    }
}
