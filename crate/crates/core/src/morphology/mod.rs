//! Articulated agent morphologies: a rooted tree of body modules joined by
//! actuated joints.
//!
//! Every quantity stored in a [`MorphologyGraph`] is kept at nine
//! significant digits, the precision of the text format, so that
//! serialization round-trips exactly.

pub(crate) mod blueprint;
pub(crate) mod text;

pub use blueprint::{generate_morphology, Blueprint};
pub use text::{parse_morphology, serialize_morphology};

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Rounds to nine significant digits.
pub(crate) fn canon(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.8e}", x).parse().expect("formatted float parses")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Torso,
    Body,
    LimbSegment,
}

impl ModuleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Torso => "torso",
            ModuleKind::Body => "body",
            ModuleKind::LimbSegment => "limb_segment",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "torso" => Some(ModuleKind::Torso),
            "body" => Some(ModuleKind::Body),
            "limb_segment" => Some(ModuleKind::LimbSegment),
            _ => None,
        }
    }

    pub fn is_trunk(self) -> bool {
        !matches!(self, ModuleKind::LimbSegment)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleNode {
    pub node_id: usize,
    pub kind: ModuleKind,
    pub radius: f64,
    pub length: f64,
    pub mass: f64,
    pub inertia: f64,
    /// Joint location in the parent module's frame.
    pub attach_offset: Vec3,
    /// First global actuator index driven by this module's parent joint,
    /// -1 for the root.
    pub dof_index: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Actuator {
    pub axis: Vec3,
    pub range_lo: f64,
    pub range_hi: f64,
    pub gear: f64,
}

impl Actuator {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.range_lo + self.range_hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointEdge {
    pub parent_id: usize,
    pub child_id: usize,
    pub actuators: Vec<Actuator>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Variation {
    pub missing: Option<usize>,
    pub mass_scales: Option<[f64; 3]>,
    pub size_scales: Option<[f64; 3]>,
}

impl Variation {
    pub fn is_empty(&self) -> bool {
        self.missing.is_none() && self.mass_scales.is_none() && self.size_scales.is_none()
    }

    fn tag_suffix(&self) -> String {
        let mut s = String::new();
        if let Some(leg) = self.missing {
            s.push_str(&format!("_missing_{leg}"));
        }
        if let Some(m) = self.mass_scales {
            s.push_str(&format!("_mass_{}_{}_{}", fmt_scale(m[0]), fmt_scale(m[1]), fmt_scale(m[2])));
        }
        if let Some(m) = self.size_scales {
            s.push_str(&format!("_size_{}_{}_{}", fmt_scale(m[0]), fmt_scale(m[1]), fmt_scale(m[2])));
        }
        s
    }
}

fn fmt_scale(x: f64) -> String {
    let s = format!("{x}");
    if s.contains('.') {
        s
    } else {
        format!("{s}.0")
    }
}

/// Location of one leg: the chain of limb segments hanging off a trunk module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub segments: Vec<usize>,
}

impl Leg {
    pub fn end_effector(&self) -> usize {
        *self.segments.last().expect("legs are never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphologyGraph {
    pub nodes: Vec<ModuleNode>,
    pub edges: Vec<JointEdge>,
    pub blueprint_tag: String,
    pub variation: Option<Variation>,
}

impl MorphologyGraph {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Total actuator count |E_m|.
    pub fn action_dimension(&self) -> usize {
        self.edges.iter().map(|e| e.actuators.len()).sum()
    }

    pub fn parent_edge(&self, node: usize) -> Option<&JointEdge> {
        self.edges.iter().find(|e| e.child_id == node)
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent_edge(node).map(|e| e.parent_id)
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.parent_id == node).map(|e| e.child_id)
    }

    /// Undirected tree neighbours of `node`.
    pub fn neighbors(&self, node: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|e| {
                if e.parent_id == node {
                    Some(e.child_id)
                } else if e.child_id == node {
                    Some(e.parent_id)
                } else {
                    None
                }
            })
            .collect()
    }

    /// Node ids from the root down to `node`, inclusive.
    pub fn root_path(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
            if path.len() > self.nodes.len() {
                break;
            }
        }
        path.reverse();
        path
    }

    /// Global actuator indices belonging to the parent joint of `node`.
    pub fn node_dofs(&self, node: usize) -> std::ops::Range<usize> {
        match self.parent_edge(node) {
            Some(e) if self.nodes[node].dof_index >= 0 => {
                let start = self.nodes[node].dof_index as usize;
                start..start + e.actuators.len()
            }
            _ => 0..0,
        }
    }

    /// Actuators in global dof order.
    pub fn actuators(&self) -> Vec<&Actuator> {
        self.edges.iter().flat_map(|e| e.actuators.iter()).collect()
    }

    /// Legs ordered by the id of their proximal segment.
    pub fn legs(&self) -> Vec<Leg> {
        let mut legs = Vec::new();
        for n in &self.nodes {
            if n.kind != ModuleKind::LimbSegment {
                continue;
            }
            let parent_is_trunk = self
                .parent(n.node_id)
                .map(|p| self.nodes[p].kind.is_trunk())
                .unwrap_or(false);
            if !parent_is_trunk {
                continue;
            }
            let mut segments = vec![n.node_id];
            let mut cur = n.node_id;
            while let Some(next) = self
                .children(cur)
                .find(|&c| self.nodes[c].kind == ModuleKind::LimbSegment)
            {
                segments.push(next);
                cur = next;
            }
            legs.push(Leg { segments });
        }
        legs
    }

    /// Tip of leg `k`. Legless chains expose one end effector, their deepest
    /// module.
    pub fn end_effector(&self, k: usize) -> Option<usize> {
        let legs = self.legs();
        if legs.is_empty() {
            return if k == 0 { self.deepest_node() } else { None };
        }
        legs.get(k).map(Leg::end_effector)
    }

    fn deepest_node(&self) -> Option<usize> {
        (0..self.nodes.len()).max_by_key(|&n| (self.root_path(n).len(), n))
    }

    /// Upper bound on the distance from the root to `node` over all joint
    /// configurations.
    pub fn max_reach(&self, node: usize) -> f64 {
        self.root_path(node)
            .iter()
            .skip(1)
            .map(|&n| self.nodes[n].attach_offset.norm() + self.nodes[n].length)
            .sum()
    }

    /// Scaling tier of a module: 0 trunk, 1 proximal limb, 2 distal limb.
    pub fn tier(&self, node: usize) -> usize {
        let n = &self.nodes[node];
        if n.kind.is_trunk() {
            0
        } else if self.parent(node).map(|p| self.nodes[p].kind.is_trunk()).unwrap_or(true) {
            1
        } else {
            2
        }
    }

    fn base_tag(&self) -> &str {
        let mut parts = self.blueprint_tag.splitn(3, '_');
        let a = parts.next().unwrap_or("");
        let b = parts.next().unwrap_or("");
        &self.blueprint_tag[..(a.len() + 1 + b.len()).min(self.blueprint_tag.len())]
    }

    fn set_variation(&mut self, v: Variation) {
        let base = self.base_tag().to_string();
        self.blueprint_tag = format!("{base}{}", v.tag_suffix());
        self.variation = if v.is_empty() { None } else { Some(v) };
    }

    /// Recomputes dense `dof_index` values from edge order.
    pub(crate) fn assign_dofs(&mut self) {
        for n in &mut self.nodes {
            n.dof_index = -1;
        }
        let mut next = 0i64;
        for e in &self.edges {
            if let Some(n) = self.nodes.get_mut(e.child_id) {
                n.dof_index = next;
            }
            next += e.actuators.len() as i64;
        }
    }
}

impl fmt::Display for MorphologyGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_morphology(self))
    }
}

/// Removes the distal-most segment of leg `leg_index`.
pub fn apply_missing(graph: &MorphologyGraph, leg_index: usize) -> Result<MorphologyGraph> {
    let legs = graph.legs();
    if legs.is_empty() {
        return Err(Error::UnsupportedVariation(format!(
            "{} has no legs to remove a module from",
            graph.blueprint_tag
        )));
    }
    let mut variation = graph.variation.clone().unwrap_or_default();
    if variation.missing.is_some() {
        return Err(Error::Variation(format!("{} already misses a module", graph.blueprint_tag)));
    }
    let leg = legs.get(leg_index).ok_or_else(|| {
        Error::Variation(format!("leg index {leg_index} out of range for {} legs", legs.len()))
    })?;
    if leg.segments.len() < 2 {
        return Err(Error::Variation(format!("leg {leg_index} has a single segment")));
    }
    let removed = leg.end_effector();

    let remap = |id: usize| if id > removed { id - 1 } else { id };
    let mut out = graph.clone();
    out.nodes.remove(removed);
    for n in &mut out.nodes {
        n.node_id = remap(n.node_id);
    }
    out.edges.retain(|e| e.child_id != removed);
    for e in &mut out.edges {
        e.parent_id = remap(e.parent_id);
        e.child_id = remap(e.child_id);
    }
    out.assign_dofs();
    variation.missing = Some(leg_index);
    out.set_variation(variation);
    Ok(out)
}

fn check_scales(scales: [f64; 3]) -> Result<()> {
    if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::Value(format!("scale factors must be positive, got {scales:?}")));
    }
    Ok(())
}

/// Multiplies mass and inertia of trunk, proximal and distal modules by the
/// three factors.
pub fn apply_mass_scaling(graph: &MorphologyGraph, scales: [f64; 3]) -> Result<MorphologyGraph> {
    check_scales(scales)?;
    let mut out = graph.clone();
    for i in 0..out.nodes.len() {
        let s = scales[graph.tier(i)];
        let n = &mut out.nodes[i];
        n.mass = canon(n.mass * s);
        n.inertia = canon(n.inertia * s);
    }
    let mut v = graph.variation.clone().unwrap_or_default();
    v.mass_scales = Some(compose(v.mass_scales, scales));
    out.set_variation(v);
    Ok(out)
}

/// Multiplies length and radius of trunk, proximal and distal modules by the
/// three factors.
pub fn apply_size_scaling(graph: &MorphologyGraph, scales: [f64; 3]) -> Result<MorphologyGraph> {
    check_scales(scales)?;
    let mut out = graph.clone();
    for i in 0..out.nodes.len() {
        let s = scales[graph.tier(i)];
        let n = &mut out.nodes[i];
        n.length = canon(n.length * s);
        n.radius = canon(n.radius * s);
    }
    let mut v = graph.variation.clone().unwrap_or_default();
    v.size_scales = Some(compose(v.size_scales, scales));
    out.set_variation(v);
    Ok(out)
}

fn compose(prev: Option<[f64; 3]>, s: [f64; 3]) -> [f64; 3] {
    match prev {
        Some(p) => [canon(p[0] * s[0]), canon(p[1] * s[1]), canon(p[2] * s[2])],
        None => s.map(canon),
    }
}

/// Checks every structural invariant and reports all violations found.
pub fn validate(graph: &MorphologyGraph) -> Vec<String> {
    let mut out = Vec::new();
    let n = graph.nodes.len();
    if n == 0 {
        out.push("graph has no nodes".to_string());
        return out;
    }
    for (i, node) in graph.nodes.iter().enumerate() {
        if node.node_id != i {
            out.push(format!("node ids not dense: position {i} holds id {}", node.node_id));
        }
        if !(node.radius > 0.0) {
            out.push(format!("node {i}: radius must be positive"));
        }
        if !(node.length >= 0.0) {
            out.push(format!("node {i}: length must be non-negative"));
        }
        if !(node.mass > 0.0) {
            out.push(format!("node {i}: mass must be positive"));
        }
        if !(node.inertia > 0.0) {
            out.push(format!("node {i}: inertia must be positive"));
        }
    }
    if graph.nodes[0].kind != ModuleKind::Torso {
        out.push("node 0 must be the root torso".to_string());
    }

    let mut tree_ok = graph.edges.len() + 1 == n;
    let mut parent_count = vec![0usize; n];
    for (k, e) in graph.edges.iter().enumerate() {
        if e.parent_id >= n || e.child_id >= n {
            out.push(format!("edge {k} references a missing node"));
            tree_ok = false;
            continue;
        }
        parent_count[e.child_id] += 1;
        let count = e.actuators.len();
        if !(1..=3).contains(&count) {
            out.push(format!("edge {k}: actuator count {count} outside 1..=3"));
        }
        for (j, a) in e.actuators.iter().enumerate() {
            if !(a.range_lo < a.range_hi) {
                out.push(format!("edge {k} actuator {j}: empty joint range"));
            }
            if (a.axis.norm() - 1.0).abs() > 1e-9 {
                out.push(format!("edge {k} actuator {j}: axis is not unit length"));
            }
        }
    }
    if parent_count[0] != 0 || parent_count[1..].iter().any(|&c| c != 1) {
        tree_ok = false;
    }
    if tree_ok {
        // every node must reach the root
        for i in 0..n {
            let path = graph.root_path(i);
            if path.first() != Some(&0) || path.len() > n {
                tree_ok = false;
                break;
            }
        }
    }
    if !tree_ok {
        out.push("edges do not form a tree rooted at node 0 (not a tree)".to_string());
    }

    let mut expected = 0i64;
    if graph.nodes[0].dof_index != -1 {
        out.push("root dof_index must be -1".to_string());
    }
    for e in &graph.edges {
        if let Some(child) = graph.nodes.get(e.child_id) {
            if child.dof_index != expected {
                out.push(format!(
                    "node {}: dof_index {} but edge order gives {expected}",
                    e.child_id, child.dof_index
                ));
            }
        }
        expected += e.actuators.len() as i64;
    }
    out
}
