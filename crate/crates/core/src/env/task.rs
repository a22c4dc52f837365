use std::fmt::Write;

use crate::error::{Error, Result};
use crate::morphology::text::{field, keyed, num};
use crate::morphology::MorphologyGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Reach,
    ReachHard,
    Touch,
    Twister,
    Push,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Reach => "reach",
            TaskKind::ReachHard => "reach_hard",
            TaskKind::Touch => "touch",
            TaskKind::Twister => "twister",
            TaskKind::Push => "push",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reach" => Some(TaskKind::Reach),
            "reach_hard" => Some(TaskKind::ReachHard),
            "touch" => Some(TaskKind::Touch),
            "twister" => Some(TaskKind::Twister),
            "push" => Some(TaskKind::Push),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GoalKind {
    XyPosition,
    ZHeight,
    BallContact,
    BoxToTarget,
}

impl GoalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GoalKind::XyPosition => "xy_position",
            GoalKind::ZHeight => "z_height",
            GoalKind::BallContact => "ball_contact",
            GoalKind::BoxToTarget => "box_to_target",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "xy_position" => Some(GoalKind::XyPosition),
            "z_height" => Some(GoalKind::ZHeight),
            "ball_contact" => Some(GoalKind::BallContact),
            "box_to_target" => Some(GoalKind::BoxToTarget),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeSelector {
    EndEffector(usize),
    Torso,
}

impl NodeSelector {
    pub fn resolve(self, graph: &MorphologyGraph) -> Result<usize> {
        match self {
            NodeSelector::Torso => Ok(0),
            NodeSelector::EndEffector(k) => graph.end_effector(k).ok_or_else(|| {
                Error::Index(format!("{} has no end effector {k}", graph.blueprint_tag))
            }),
        }
    }

    fn render(self) -> String {
        match self {
            NodeSelector::Torso => "torso".into(),
            NodeSelector::EndEffector(k) => format!("end_effector({k})"),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        if s == "torso" {
            return Some(NodeSelector::Torso);
        }
        s.strip_prefix("end_effector(")?.strip_suffix(')')?.parse().ok().map(NodeSelector::EndEffector)
    }
}

/// Goal family plus the distribution its values are drawn from: an annulus
/// `r_lo..r_hi` around the origin for planar goals, `z_lo..z_hi` for heights.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalTemplate {
    pub goal_kind: GoalKind,
    pub target: NodeSelector,
    pub r_lo: f64,
    pub r_hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_kind: TaskKind,
    pub goals: Vec<GoalTemplate>,
    pub d_min: Vec<f64>,
    pub d_max: Vec<f64>,
    pub episode_length: usize,
}

pub const DEFAULT_EPISODE_LENGTH: usize = 500;

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        let g = self.goals.len();
        if g == 0 || self.d_min.len() != g || self.d_max.len() != g {
            return Err(Error::Config(format!(
                "task needs matching goal/d_min/d_max lists, got {g}/{}/{}",
                self.d_min.len(),
                self.d_max.len()
            )));
        }
        if self.task_kind == TaskKind::Twister && g > 3 {
            return Err(Error::Config(format!("twister tasks take at most 3 goals, got {g}")));
        }
        for (i, (lo, hi)) in self.d_min.iter().zip(&self.d_max).enumerate() {
            if !(lo < hi) {
                return Err(Error::Config(format!("goal {i}: d_min {lo} must be below d_max {hi}")));
            }
        }
        for t in &self.goals {
            let ok = 0.0 <= t.r_lo && t.r_lo <= t.r_hi && 0.0 <= t.z_lo && t.z_lo <= t.z_hi;
            if !ok {
                return Err(Error::Config(format!("invalid goal distribution {t:?}")));
            }
        }
        if self.episode_length == 0 {
            return Err(Error::Config("episode length must be positive".into()));
        }
        Ok(())
    }

    /// Standard task for `name` on `graph`. Planar goal annuli scale with the
    /// reach of the target leg so every task is kinematically solvable.
    ///
    /// Twister names list their constraints: `reach_handsup` puts leg 0 on an
    /// XY goal and raises leg 1, `reach2_handsup` uses legs 0 and 1 for XY
    /// and raises leg 2, `reach_handsup2` raises legs 1 and 2. `twister` is an
    /// alias of `reach_handsup`. `d_max` is left at a placeholder; see
    /// [`crate::env::calibrate_d_max`].
    pub fn standard(name: &str, graph: &MorphologyGraph) -> Result<TaskSpec> {
        let reach_of = |k: usize| -> Result<f64> {
            let node = NodeSelector::EndEffector(k).resolve(graph)?;
            Ok(graph.max_reach(node))
        };
        let xy = |k: usize, lo: f64, hi: f64| -> Result<GoalTemplate> {
            let r = reach_of(k)?;
            Ok(GoalTemplate {
                goal_kind: GoalKind::XyPosition,
                target: NodeSelector::EndEffector(k),
                r_lo: lo * r,
                r_hi: hi * r,
                z_lo: 0.0,
                z_hi: 0.0,
            })
        };
        let up = |k: usize| -> Result<GoalTemplate> {
            reach_of(k)?;
            Ok(GoalTemplate {
                goal_kind: GoalKind::ZHeight,
                target: NodeSelector::EndEffector(k),
                r_lo: 0.0,
                r_hi: 0.0,
                z_lo: 0.1,
                z_hi: 0.25,
            })
        };
        let (kind, goals) = match name {
            "reach" => (TaskKind::Reach, vec![xy(0, 0.4, 0.7)?]),
            "reach_hard" => (TaskKind::ReachHard, vec![xy(0, 0.7, 0.9)?]),
            "touch" => {
                // the ball sits on the ground, where the tip is near full extension
                let mut t = xy(0, 0.9, 1.15)?;
                t.goal_kind = GoalKind::BallContact;
                (TaskKind::Touch, vec![t])
            }
            "push" => {
                let mut t = xy(0, 0.4, 0.7)?;
                t.goal_kind = GoalKind::BoxToTarget;
                (TaskKind::Push, vec![t])
            }
            "twister" | "reach_handsup" => (TaskKind::Twister, vec![xy(0, 0.4, 0.7)?, up(1)?]),
            "reach_hard_handsup" => (TaskKind::Twister, vec![xy(0, 0.7, 0.9)?, up(1)?]),
            "reach2_handsup" => {
                (TaskKind::Twister, vec![xy(0, 0.4, 0.7)?, xy(1, 0.4, 0.7)?, up(2)?])
            }
            "reach_handsup2" => (TaskKind::Twister, vec![xy(0, 0.4, 0.7)?, up(1)?, up(2)?]),
            other => return Err(Error::Config(format!("unknown task '{other}'"))),
        };
        let d_min = goals
            .iter()
            .map(|g| match g.goal_kind {
                GoalKind::BoxToTarget => 0.05,
                _ => 0.02,
            })
            .collect::<Vec<_>>();
        let d_max = d_min.iter().map(|d| d + 1.0).collect();
        Ok(TaskSpec { task_kind: kind, goals, d_min, d_max, episode_length: DEFAULT_EPISODE_LENGTH })
    }
}

pub fn serialize_task(t: &TaskSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "task {} goals={} episode={}", t.task_kind.as_str(), t.goals.len(), t.episode_length);
    for (i, g) in t.goals.iter().enumerate() {
        let _ = writeln!(
            s,
            "goal {} {} {} {} {} {} {} {}",
            g.goal_kind.as_str(),
            g.target.render(),
            num(g.r_lo),
            num(g.r_hi),
            num(g.z_lo),
            num(g.z_hi),
            num(t.d_min[i]),
            num(t.d_max[i])
        );
    }
    s
}

pub fn parse_task(text: &str) -> Result<TaskSpec> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (ln, head) = lines.next().ok_or_else(|| Error::parse(1, "missing task header"))?;
    let h: Vec<&str> = head.split_whitespace().collect();
    if h.first() != Some(&"task") {
        return Err(Error::parse(ln, "expected 'task' header"));
    }
    let kind_s: String = field(ln, h.get(1), "task kind")?;
    let task_kind = TaskKind::parse(&kind_s).ok_or_else(|| Error::parse(ln, format!("unknown task kind '{kind_s}'")))?;
    let k: usize = keyed(ln, h.get(2), "goals")?;
    let episode_length: usize = keyed(ln, h.get(3), "episode")?;
    let mut last = ln;
    let (mut goals, mut d_min, mut d_max) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..k {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| Error::parse(last + 1, format!("missing goal section ({i} of {k} goal lines read)")))?;
        last = ln;
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.first() != Some(&"goal") {
            return Err(Error::parse(ln, "expected goal line"));
        }
        let gk: String = field(ln, t.get(1), "goal kind")?;
        let sel: String = field(ln, t.get(2), "node selector")?;
        goals.push(GoalTemplate {
            goal_kind: GoalKind::parse(&gk).ok_or_else(|| Error::parse(ln, format!("unknown goal kind '{gk}'")))?,
            target: NodeSelector::parse(&sel).ok_or_else(|| Error::parse(ln, format!("bad node selector '{sel}'")))?,
            r_lo: field(ln, t.get(3), "r_lo")?,
            r_hi: field(ln, t.get(4), "r_hi")?,
            z_lo: field(ln, t.get(5), "z_lo")?,
            z_hi: field(ln, t.get(6), "z_hi")?,
        });
        d_min.push(field(ln, t.get(7), "d_min")?);
        d_max.push(field(ln, t.get(8), "d_max")?);
    }
    if let Some((ln, l)) = lines.next() {
        return Err(Error::parse(ln, format!("trailing content '{l}'")));
    }
    Ok(TaskSpec { task_kind, goals, d_min, d_max, episode_length })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{canon, generate_morphology, Blueprint};

    #[test]
    fn task_text_roundtrip() {
        let g = generate_morphology(Blueprint::Ant, 4, None).unwrap();
        let mut t = TaskSpec::standard("reach_handsup2", &g).unwrap();
        for v in t.goals.iter_mut() {
            v.r_lo = canon(v.r_lo);
            v.r_hi = canon(v.r_hi);
        }
        let text = serialize_task(&t);
        assert!(text.starts_with("task twister goals=3 episode=500\n"));
        assert_eq!(parse_task(&text).unwrap(), t);
    }

    #[test]
    fn validation() {
        let g = generate_morphology(Blueprint::Ant, 3, None).unwrap();
        let mut t = TaskSpec::standard("reach", &g).unwrap();
        t.validate().unwrap();
        t.d_max[0] = t.d_min[0];
        assert!(matches!(t.validate(), Err(Error::Config(_))));
        let w = generate_morphology(Blueprint::Worm, 3, None).unwrap();
        assert!(TaskSpec::standard("reach_handsup", &w).is_err());
    }
}
