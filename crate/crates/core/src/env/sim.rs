use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kinematics::kinematic_frames;
use super::task::{GoalKind, TaskSpec};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};
use crate::morphology::MorphologyGraph;

/// Maximum joint speed at full actuation, rad/s.
pub const OMEGA_MAX: f64 = 2.0;
pub const DEFAULT_DT: f64 = 0.01;
pub const BALL_RADIUS: f64 = 0.1;
pub const BOX_RADIUS: f64 = 0.1;

/// Draws one value per goal template: planar goals uniformly in angle and
/// radius over their annulus, heights uniformly over their interval.
pub fn sample_goals(task: &TaskSpec, _graph: &MorphologyGraph, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_goals(task, &mut rng)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn draw_annulus(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    let angle = rng.gen_range(0.0..2.0 * PI);
    let r = uniform(rng, lo, hi);
    Vec3::new(r * angle.cos(), r * angle.sin(), 0.0)
}

fn draw_goals(task: &TaskSpec, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    task.goals
        .iter()
        .map(|t| match t.goal_kind {
            GoalKind::ZHeight => Vec3::new(0.0, 0.0, uniform(rng, t.z_lo, t.z_hi)),
            _ => draw_annulus(rng, t.r_lo, t.r_hi),
        })
        .collect()
}

/// Goal information for one goal, located at a body module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalInput {
    pub node: usize,
    pub value: Vec3,
}

#[derive(Debug, Clone)]
pub struct EnvState {
    pub graph: Arc<MorphologyGraph>,
    pub task: Arc<TaskSpec>,
    pub joint_angles: Vec<f64>,
    pub prev_joint_angles: Vec<f64>,
    pub poses: Vec<Pose>,
    pub prev_poses: Vec<Pose>,
    pub goals: Vec<Vec3>,
    pub goal_nodes: Vec<usize>,
    pub ball_pos: Option<Vec3>,
    pub box_pos: Option<Vec3>,
    pub step_count: usize,
    /// Duration of the last step, zero at reset.
    pub last_dt: f64,
    pub rng: ChaCha8Rng,
}

impl EnvState {
    /// Every joint starts at the middle of its range; goals and objects are
    /// drawn from `seed`.
    pub fn reset(graph: Arc<MorphologyGraph>, task: Arc<TaskSpec>, seed: u64) -> Result<EnvState> {
        task.validate()?;
        let goal_nodes = task.goals.iter().map(|g| g.target.resolve(&graph)).collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let goals = draw_goals(&task, &mut rng);
        let mut ball_pos = None;
        let mut box_pos = None;
        for (t, g) in task.goals.iter().zip(&goals) {
            match t.goal_kind {
                GoalKind::BallContact => ball_pos = Some(*g),
                GoalKind::BoxToTarget => {
                    // start the box on the same annulus, away from the goal
                    let mut b = draw_annulus(&mut rng, t.r_lo, t.r_hi);
                    for _ in 0..16 {
                        if (b - *g).planar_norm() > 2.0 * BOX_RADIUS {
                            break;
                        }
                        b = draw_annulus(&mut rng, t.r_lo, t.r_hi);
                    }
                    box_pos = Some(b);
                }
                _ => {}
            }
        }
        let joint_angles: Vec<f64> = graph.actuators().iter().map(|a| a.midpoint()).collect();
        let poses = kinematic_frames(&graph, &joint_angles)?.poses;
        Ok(EnvState {
            prev_joint_angles: joint_angles.clone(),
            prev_poses: poses.clone(),
            graph,
            task,
            joint_angles,
            poses,
            goals,
            goal_nodes,
            ball_pos,
            box_pos,
            step_count: 0,
            last_dt: 0.0,
            rng,
        })
    }

    pub fn is_done(&self) -> bool {
        self.step_count >= self.task.episode_length
    }

    pub fn action_dimension(&self) -> usize {
        self.joint_angles.len()
    }

    /// Advances joint angles by `gear * a * OMEGA_MAX * dt`, clamped to their
    /// ranges, then resolves box contacts quasi-statically. The box is an
    /// upright cylinder: any module whose horizontal distance to its axis is
    /// below the radius sum pushes it out along the horizontal normal.
    pub fn step(&self, actions: &[f64], dt: f64) -> Result<EnvState> {
        if self.is_done() {
            return Err(Error::EpisodeOver(self.step_count));
        }
        if actions.len() != self.action_dimension() {
            return Err(Error::Shape(format!(
                "expected {} actions, got {}",
                self.action_dimension(),
                actions.len()
            )));
        }
        let mut next = self.clone();
        next.prev_joint_angles = self.joint_angles.clone();
        next.prev_poses = self.poses.clone();
        for ((angle, act), &a) in next.joint_angles.iter_mut().zip(self.graph.actuators()).zip(actions) {
            let a = if a.is_nan() { 0.0 } else { a.clamp(-1.0, 1.0) };
            *angle = (*angle + act.gear * a * OMEGA_MAX * dt).clamp(act.range_lo, act.range_hi);
        }
        next.poses = kinematic_frames(&self.graph, &next.joint_angles)?.poses;
        if let Some(b) = next.box_pos {
            next.box_pos = Some(push_box(b, BOX_RADIUS, &next.poses, &self.graph));
        }
        next.step_count += 1;
        next.last_dt = dt;
        Ok(next)
    }

    pub fn node_position(&self, node: usize) -> Vec3 {
        self.poses[node].position
    }

    pub fn goal_distance(&self, goal_index: usize) -> f64 {
        let t = &self.task.goals[goal_index];
        let node = self.goal_nodes[goal_index];
        let p = self.node_position(node);
        let g = self.goals[goal_index];
        match t.goal_kind {
            GoalKind::XyPosition => (p - g).planar_norm(),
            GoalKind::ZHeight => (p.z - g.z).abs(),
            GoalKind::BallContact => {
                let ball = self.ball_pos.unwrap_or(g);
                ((p - ball).norm() - self.graph.nodes[node].radius - BALL_RADIUS).max(0.0)
            }
            GoalKind::BoxToTarget => (self.box_pos.unwrap_or_default() - g).planar_norm(),
        }
    }

    pub fn goal_distances(&self) -> Vec<f64> {
        (0..self.goals.len()).map(|i| self.goal_distance(i)).collect()
    }

    pub fn all_goals_met(&self) -> bool {
        self.goal_distances().iter().zip(&self.task.d_min).all(|(d, m)| d <= m)
    }

    /// Goal values paired with the module each goal refers to. Push tasks
    /// also expose the box position so the policy can see the object.
    pub fn goal_inputs(&self) -> Vec<GoalInput> {
        let mut out: Vec<GoalInput> = self
            .goals
            .iter()
            .zip(&self.goal_nodes)
            .map(|(&value, &node)| GoalInput { node, value })
            .collect();
        if let (Some(b), Some(&node)) = (self.box_pos, self.goal_nodes.first()) {
            if out.len() < 3 {
                out.push(GoalInput { node, value: b });
            }
        }
        out
    }
}

pub(crate) fn push_box(mut b: Vec3, box_radius: f64, poses: &[Pose], graph: &MorphologyGraph) -> Vec3 {
    for (pose, node) in poses.iter().zip(&graph.nodes) {
        if node.node_id == 0 {
            continue;
        }
        let horiz = Vec3::new(b.x - pose.position.x, b.y - pose.position.y, 0.0);
        let h = horiz.norm();
        let overlap = node.radius + box_radius - h;
        if overlap > 0.0 && h > 1e-12 {
            b = b + horiz.scale(overlap / h);
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::task::{GoalTemplate, NodeSelector, TaskKind};
    use crate::morphology::{generate_morphology, Blueprint};

    fn reach_task(lo: f64, hi: f64) -> TaskSpec {
        TaskSpec {
            task_kind: TaskKind::Reach,
            goals: vec![GoalTemplate {
                goal_kind: GoalKind::XyPosition,
                target: NodeSelector::EndEffector(0),
                r_lo: lo,
                r_hi: hi,
                z_lo: 0.0,
                z_hi: 0.0,
            }],
            d_min: vec![0.02],
            d_max: vec![1.0],
            episode_length: 500,
        }
    }

    fn ant(n: usize) -> Arc<MorphologyGraph> {
        Arc::new(generate_morphology(Blueprint::Ant, n, None).unwrap())
    }

    #[test]
    fn degenerate_annulus() {
        let g = ant(3);
        let t = reach_task(1.0, 1.0);
        for seed in 0..50 {
            let goals = sample_goals(&t, &g, seed);
            assert!((goals[0].planar_norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = ant(3);
        let t = TaskSpec::standard("reach_handsup2", &g).unwrap();
        assert_eq!(sample_goals(&t, &g, 7), sample_goals(&t, &g, 7));
        assert_ne!(sample_goals(&t, &g, 7), sample_goals(&t, &g, 8));
    }

    #[test]
    fn mean_radius_law_of_large_numbers() {
        let g = ant(3);
        let t = reach_task(0.5, 1.5);
        let n = 100_000;
        let mean: f64 = (0..n).map(|s| sample_goals(&t, &g, s).remove(0).planar_norm()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn zero_action_and_clamp() {
        let g = ant(4);
        let t = Arc::new(reach_task(0.3, 0.6));
        let s = EnvState::reset(g.clone(), t, 1).unwrap();
        let z = s.step(&vec![0.0; 8], DEFAULT_DT).unwrap();
        assert_eq!(z.joint_angles, s.joint_angles);
        assert_eq!(z.step_count, 1);

        let mut at_hi = s.clone();
        let hi = g.actuators()[1].range_hi;
        at_hi.joint_angles[1] = hi;
        let mut a = vec![0.0; 8];
        a[1] = 1.0;
        assert_eq!(at_hi.step(&a, DEFAULT_DT).unwrap().joint_angles[1], hi);
        a[1] = 5.0;
        let moved = s.step(&a, DEFAULT_DT).unwrap();
        assert!((moved.joint_angles[1] - s.joint_angles[1] - OMEGA_MAX * DEFAULT_DT).abs() < 1e-15);
    }

    #[test]
    fn episode_over() {
        let g = ant(2);
        let mut t = reach_task(0.3, 0.6);
        t.episode_length = 2;
        let s = EnvState::reset(g, Arc::new(t), 0).unwrap();
        let s = s.step(&[0.0; 4], 0.01).unwrap().step(&[0.0; 4], 0.01).unwrap();
        assert!(matches!(s.step(&[0.0; 4], 0.01), Err(Error::EpisodeOver(2))));
    }

    #[test]
    fn quasi_static_push() {
        let g = ant(2);
        let mut poses = vec![Pose::identity(); g.num_nodes()];
        for p in poses.iter_mut() {
            p.position = Vec3::new(-10.0, -10.0, 0.0);
        }
        poses[2].position = Vec3::zero();
        let pushed = push_box(Vec3::new(0.10, 0.0, 0.0), 0.05, &poses, &g);
        assert!((pushed.x - 0.13).abs() < 1e-12 && pushed.y == 0.0);
        let untouched = push_box(Vec3::new(0.2, 0.0, 0.0), 0.05, &poses, &g);
        assert_eq!(untouched, Vec3::new(0.2, 0.0, 0.0));
    }

    #[test]
    fn goal_distances() {
        let g = ant(2);
        let t = Arc::new(reach_task(0.3, 0.6));
        let mut s = EnvState::reset(g.clone(), t, 0).unwrap();
        let tip = s.goal_nodes[0];
        s.goals[0] = s.poses[tip].position;
        assert_eq!(s.goal_distance(0), 0.0);
        s.poses[tip].position = Vec3::new(1.0, 1.0, 0.0);
        s.goals[0] = Vec3::zero();
        assert!((s.goal_distance(0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ball_contact_is_surface_distance() {
        let g = ant(2);
        let t = Arc::new(TaskSpec::standard("touch", &g).unwrap());
        let mut s = EnvState::reset(g.clone(), t, 3).unwrap();
        let tip = s.goal_nodes[0];
        let r = g.nodes[tip].radius;
        let p = s.poses[tip].position;
        s.ball_pos = Some(p + Vec3::new(r + BALL_RADIUS, 0.0, 0.0));
        assert!(s.goal_distance(0).abs() < 1e-12);
        s.ball_pos = Some(p + Vec3::new(r + BALL_RADIUS + 0.3, 0.0, 0.0));
        assert!((s.goal_distance(0) - 0.3).abs() < 1e-12);
    }
}
