//! Jacobian-transpose controller standing in for trained single-task experts.

use super::kinematics::{kinematic_frames, position_jacobian};
use super::sim::{EnvState, BALL_RADIUS, BOX_RADIUS};
use super::task::GoalKind;
use crate::geometry::Vec3;

pub const DEFAULT_EXPERT_GAIN: f64 = 10.0;

/// Point the target module should move to for goal `i`, and the error
/// vector between it and the module.
fn goal_error(state: &EnvState, i: usize) -> Vec3 {
    let node = state.goal_nodes[i];
    let p = state.node_position(node);
    let g = state.goals[i];
    match state.task.goals[i].goal_kind {
        GoalKind::XyPosition => Vec3::new(p.x - g.x, p.y - g.y, 0.0),
        GoalKind::ZHeight => Vec3::new(0.0, 0.0, p.z - g.z),
        GoalKind::BallContact => {
            let ball = state.ball_pos.unwrap_or(g);
            let d = p - ball;
            let dist = d.norm();
            let contact = state.graph.nodes[node].radius + BALL_RADIUS;
            if dist <= contact {
                Vec3::zero()
            } else {
                d.scale(1.0 - contact / dist)
            }
        }
        GoalKind::BoxToTarget => {
            let b = state.box_pos.unwrap_or_default();
            let to_goal = Vec3::new(g.x - b.x, g.y - b.y, 0.0);
            let len = to_goal.norm();
            if len < 1e-9 {
                return Vec3::zero();
            }
            let dir = to_goal.scale(1.0 / len);
            let reach = state.graph.nodes[node].radius + BOX_RADIUS;
            let rel = Vec3::new(p.x - b.x, p.y - b.y, 0.0);
            // behind the box (relative to the goal) and lined up: push through,
            // otherwise go around to the staging point behind it
            let behind = -rel.dot(dir);
            let lateral = (rel + dir.scale(behind)).norm();
            let target = if behind > 0.0 && lateral < 0.5 * reach {
                b + dir.scale(0.5 * reach)
            } else {
                b - dir.scale(reach + 0.05)
            };
            Vec3::new(p.x - target.x, p.y - target.y, p.z)
        }
    }
}

/// Action `clamp(-gain * Jᵀ e, [-1, 1])` summed over goals, where `e` is the
/// error between the target module and its goal (the gradient of half the
/// squared goal distance). Returns zeros once every goal is within `d_min`.
pub fn scripted_expert(state: &EnvState, gain: f64) -> Vec<f64> {
    let dim = state.action_dimension();
    let mut action = vec![0.0; dim];
    if state.all_goals_met() {
        return action;
    }
    let frames = kinematic_frames(&state.graph, &state.joint_angles).expect("state angles match the morphology");
    let gears: Vec<f64> = state.graph.actuators().iter().map(|a| a.gear).collect();
    for i in 0..state.goals.len() {
        let e = goal_error(state, i);
        if e.norm() == 0.0 {
            continue;
        }
        let jac = position_jacobian(&state.graph, &frames, state.goal_nodes[i]);
        for (j, col) in jac.iter().enumerate() {
            action[j] -= gain * gears[j] * col.dot(e);
        }
    }
    for a in &mut action {
        *a = a.clamp(-1.0, 1.0);
    }
    action
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::sim::DEFAULT_DT;
    use crate::env::task::{GoalTemplate, NodeSelector, TaskKind, TaskSpec};
    use crate::morphology::{generate_morphology, Blueprint};
    use std::sync::Arc;

    #[test]
    fn zero_at_goal() {
        let g = Arc::new(generate_morphology(Blueprint::Ant, 3, None).unwrap());
        let t = Arc::new(TaskSpec::standard("reach_handsup", &g).unwrap());
        let mut s = EnvState::reset(g, t, 5).unwrap();
        for i in 0..s.goals.len() {
            let p = s.node_position(s.goal_nodes[i]);
            s.goals[i] = match s.task.goals[i].goal_kind {
                GoalKind::ZHeight => Vec3::new(0.0, 0.0, p.z),
                _ => p,
            };
        }
        assert!(scripted_expert(&s, 10.0).iter().all(|a| a.abs() < 1e-9));
    }

    #[test]
    fn one_step_decreases_distance() {
        let g = Arc::new(generate_morphology(Blueprint::Claw, 4, None).unwrap());
        let t = Arc::new(TaskSpec::standard("reach2_handsup", &g).unwrap());
        for seed in 0..20 {
            let s = EnvState::reset(g.clone(), t.clone(), seed).unwrap();
            let before: f64 = s.goal_distances().iter().sum();
            let next = s.step(&scripted_expert(&s, 10.0), DEFAULT_DT).unwrap();
            let after: f64 = next.goal_distances().iter().sum();
            assert!(after < before, "seed {seed}: {before} -> {after}");
        }
    }

    #[test]
    fn single_goal_leaves_other_legs_still() {
        let g = Arc::new(generate_morphology(Blueprint::Ant, 4, None).unwrap());
        let t = Arc::new(TaskSpec::standard("reach", &g).unwrap());
        let s = EnvState::reset(g.clone(), t, 9).unwrap();
        let a = scripted_expert(&s, 10.0);
        let leg0: Vec<usize> = g.legs()[0].segments.iter().flat_map(|&n| g.node_dofs(n)).collect();
        for (j, v) in a.iter().enumerate() {
            if !leg0.contains(&j) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn planar_two_link_converges() {
        let g = Arc::new(generate_morphology(Blueprint::Ant, 2, None).unwrap());
        let task = TaskSpec {
            task_kind: TaskKind::Reach,
            goals: vec![GoalTemplate {
                goal_kind: GoalKind::XyPosition,
                target: NodeSelector::EndEffector(0),
                r_lo: 0.5,
                r_hi: 0.5,
                z_lo: 0.0,
                z_hi: 0.0,
            }],
            d_min: vec![0.01],
            d_max: vec![1.0],
            episode_length: 500,
        };
        let mut s = EnvState::reset(g, Arc::new(task), 11).unwrap();
        for _ in 0..200 {
            s = s.step(&scripted_expert(&s, 10.0), DEFAULT_DT).unwrap();
        }
        assert!(s.goal_distance(0) <= 0.01, "{}", s.goal_distance(0));
    }
}
