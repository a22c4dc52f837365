use std::fmt;

use crate::env::GoalInput;
use crate::error::{Error, Result};
use crate::morphology::MorphologyGraph;
use crate::tensor::Tensor;

use super::spec::{ObsFlag, ObservationSpec};

/// Goal slots reserved per graph; twisters use at most three goals.
pub const G_MAX: usize = 3;

/// Actuator slots per node. A joint carries at most three actuators.
pub const ACTION_SLOTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CgVariant {
    /// Goals folded into the features of their target modules.
    V1,
    /// Goals appended as extra disjoint nodes.
    V2,
}

impl CgVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CgVariant::V1 => "v1",
            CgVariant::V2 => "v2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "v1" => Some(CgVariant::V1),
            "v2" => Some(CgVariant::V2),
            _ => None,
        }
    }
}

impl fmt::Display for CgVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The unified observation/goal/action representation fed to a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGraph {
    pub node_features: Tensor,
    pub n_body_nodes: usize,
    pub n_goal_nodes: usize,
    /// `n_nodes x G_MAX`; columns past the goal count stay zero.
    pub target_indicator: Tensor,
    /// `n_nodes x ACTION_SLOTS`.
    pub action_mask: Tensor,
    /// Entry `d` is the `(node, slot)` that drives global actuator `d`.
    pub actuator_map: Vec<(usize, usize)>,
    pub variant: CgVariant,
    pub history_depth: usize,
    /// Undirected tree edges between body rows.
    pub edges: Vec<(usize, usize)>,
}

impl ControlGraph {
    pub fn n_nodes(&self) -> usize {
        self.n_body_nodes + self.n_goal_nodes
    }

    pub fn feature_width(&self) -> usize {
        self.node_features.cols()
    }

    pub fn action_dimension(&self) -> usize {
        self.actuator_map.len()
    }

    /// Gathers per-node slot outputs (`n_nodes x ACTION_SLOTS`, row-major)
    /// into the morphology's action vector.
    pub fn gather_actions<T: Copy>(&self, slots: &[T]) -> Vec<T> {
        self.actuator_map.iter().map(|&(n, s)| slots[n * ACTION_SLOTS + s]).collect()
    }

    /// Inverse of [`gather_actions`](Self::gather_actions); unmapped slots are `fill`.
    pub fn scatter_actions<T: Copy>(&self, actions: &[T], fill: T) -> Vec<T> {
        let mut out = vec![fill; self.n_nodes() * ACTION_SLOTS];
        for (&(n, s), &a) in self.actuator_map.iter().zip(actions) {
            out[n * ACTION_SLOTS + s] = a;
        }
        out
    }
}

/// Feature width of a single frame for the given variant.
pub fn cg_width(obs_width: usize, variant: CgVariant) -> usize {
    match variant {
        CgVariant::V1 => obs_width + 3 * G_MAX + G_MAX,
        CgVariant::V2 => obs_width + G_MAX,
    }
}

struct Common {
    n: usize,
    obs_width: usize,
    action_mask: Tensor,
    actuator_map: Vec<(usize, usize)>,
    edges: Vec<(usize, usize)>,
}

fn common(observations: &Tensor, goals: &[GoalInput], graph: &MorphologyGraph) -> Result<Common> {
    let n = graph.num_nodes();
    if observations.shape().len() != 2 || observations.rows() != n {
        return Err(Error::Shape(format!(
            "observations {:?} do not match {} modules",
            observations.shape(),
            n
        )));
    }
    if goals.len() > G_MAX {
        return Err(Error::Value(format!("{} goals exceed the limit of {G_MAX}", goals.len())));
    }
    if let Some(g) = goals.iter().find(|g| g.node >= n) {
        return Err(Error::Index(format!("goal targets node {} but the graph has {n} nodes", g.node)));
    }
    let mut action_mask = Tensor::zeros(&[n, ACTION_SLOTS]);
    let mut actuator_map = vec![(0, 0); graph.action_dimension()];
    for node in 0..n {
        for (slot, dof) in graph.node_dofs(node).enumerate() {
            if slot >= ACTION_SLOTS {
                return Err(Error::Shape(format!("node {node} has more than {ACTION_SLOTS} actuators")));
            }
            action_mask.set(node, slot, 1.0);
            actuator_map[dof] = (node, slot);
        }
    }
    let edges = graph.edges.iter().map(|e| (e.parent_id, e.child_id)).collect();
    Ok(Common { n, obs_width: observations.cols(), action_mask, actuator_map, edges })
}

/// CG v1: each goal's value and a one-hot indicator are written into the
/// feature row of its target module.
pub fn build_cg_v1(observations: &Tensor, goals: &[GoalInput], graph: &MorphologyGraph) -> Result<ControlGraph> {
    let c = common(observations, goals, graph)?;
    let width = cg_width(c.obs_width, CgVariant::V1);
    let mut features = Tensor::zeros(&[c.n, width]);
    for r in 0..c.n {
        features.row_mut(r)[..c.obs_width].copy_from_slice(observations.row(r));
    }
    let mut indicator = Tensor::zeros(&[c.n, G_MAX]);
    for (g, goal) in goals.iter().enumerate() {
        let row = features.row_mut(goal.node);
        let base = c.obs_width + 3 * g;
        row[base..base + 3].copy_from_slice(&goal.value.to_array());
        row[c.obs_width + 3 * G_MAX + g] = 1.0;
        indicator.set(goal.node, g, 1.0);
    }
    Ok(ControlGraph {
        node_features: features,
        n_body_nodes: c.n,
        n_goal_nodes: 0,
        target_indicator: indicator,
        action_mask: c.action_mask,
        actuator_map: c.actuator_map,
        variant: CgVariant::V1,
        history_depth: 1,
        edges: c.edges,
    })
}

/// CG v2: goals become extra rows holding the goal value in the position
/// slots (the first three columns when positions are not observed).
pub fn build_cg_v2(
    observations: &Tensor,
    goals: &[GoalInput],
    graph: &MorphologyGraph,
    spec: &ObservationSpec,
) -> Result<ControlGraph> {
    let c = common(observations, goals, graph)?;
    if spec.width() != c.obs_width {
        return Err(Error::Shape(format!(
            "observation width {} does not match spec '{spec}' ({})",
            c.obs_width,
            spec.width()
        )));
    }
    let g_count = goals.len();
    let rows = c.n + g_count;
    let width = cg_width(c.obs_width, CgVariant::V2);
    let goal_col = spec.offset(ObsFlag::P).unwrap_or(0);
    let mut features = Tensor::zeros(&[rows, width]);
    for r in 0..c.n {
        features.row_mut(r)[..c.obs_width].copy_from_slice(observations.row(r));
    }
    let mut indicator = Tensor::zeros(&[rows, G_MAX]);
    for (g, goal) in goals.iter().enumerate() {
        let goal_row = c.n + g;
        features.row_mut(goal_row)[goal_col..goal_col + 3].copy_from_slice(&goal.value.to_array());
        indicator.set(goal.node, g, 1.0);
        indicator.set(goal_row, g, 1.0);
    }
    for r in 0..rows {
        for g in 0..G_MAX {
            let v = indicator.at(r, g);
            features.set(r, c.obs_width + g, v);
        }
    }
    let mut action_mask = Tensor::zeros(&[rows, ACTION_SLOTS]);
    action_mask.data_mut()[..c.n * ACTION_SLOTS].copy_from_slice(c.action_mask.data());
    Ok(ControlGraph {
        node_features: features,
        n_body_nodes: c.n,
        n_goal_nodes: g_count,
        target_indicator: indicator,
        action_mask,
        actuator_map: c.actuator_map,
        variant: CgVariant::V2,
        history_depth: 1,
        edges: c.edges,
    })
}

/// Builds either variant.
pub fn build_cg(
    variant: CgVariant,
    observations: &Tensor,
    goals: &[GoalInput],
    graph: &MorphologyGraph,
    spec: &ObservationSpec,
) -> Result<ControlGraph> {
    match variant {
        CgVariant::V1 => build_cg_v1(observations, goals, graph),
        CgVariant::V2 => build_cg_v2(observations, goals, graph, spec),
    }
}

/// Concatenates frames oldest first along the feature axis. `frames` holds
/// at most `depth` graphs, newest last; missing older frames are zeros.
pub fn stack_history(frames: &[ControlGraph], depth: usize) -> Result<ControlGraph> {
    let newest = frames.last().ok_or_else(|| Error::Value("history needs at least one frame".into()))?;
    if depth == 0 {
        return Err(Error::Value("history depth must be at least 1".into()));
    }
    if frames.len() > depth {
        return Err(Error::Shape(format!("{} frames exceed history depth {depth}", frames.len())));
    }
    let (n, f) = (newest.n_nodes(), newest.feature_width());
    for fr in frames {
        if fr.variant != newest.variant || fr.n_nodes() != n || fr.feature_width() != f {
            return Err(Error::Shape(format!(
                "history frame {}x{} ({}) does not match {}x{} ({})",
                fr.n_nodes(),
                fr.feature_width(),
                fr.variant,
                n,
                f,
                newest.variant
            )));
        }
    }
    if depth == 1 {
        return Ok(newest.clone());
    }
    let missing = depth - frames.len();
    let mut features = Tensor::zeros(&[n, f * depth]);
    for (k, fr) in frames.iter().enumerate() {
        let col = (missing + k) * f;
        for r in 0..n {
            features.row_mut(r)[col..col + f].copy_from_slice(fr.node_features.row(r));
        }
    }
    Ok(ControlGraph { node_features: features, history_depth: depth, ..newest.clone() })
}

/// Rolling window of the most recent frames of one episode.
#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    depth: usize,
    frames: std::collections::VecDeque<ControlGraph>,
}

impl HistoryBuffer {
    pub fn new(depth: usize) -> Self {
        HistoryBuffer { depth: depth.max(1), frames: std::collections::VecDeque::new() }
    }

    /// Forgets all frames; call at episode start.
    pub fn clear(&mut self) {
        self.frames.clear();
    }

    /// Adds the newest frame and returns the stacked graph.
    pub fn push(&mut self, frame: ControlGraph) -> Result<ControlGraph> {
        if self.frames.len() == self.depth {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        let frames: Vec<ControlGraph> = self.frames.iter().cloned().collect();
        stack_history(&frames, self.depth)
    }
}
