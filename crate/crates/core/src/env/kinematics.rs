//! Forward kinematics and analytic Jacobians over a morphology tree.

use crate::error::{Error, Result};
use crate::geometry::{Pose, Quat, Vec3};
use crate::morphology::MorphologyGraph;
use crate::scalar::Real;

/// World-frame quantities for every module and actuator.
#[derive(Debug, Clone)]
pub struct Frames<T = f64> {
    /// Pose of each module: its distal end, oriented by its parent joint.
    pub poses: Vec<Pose<T>>,
    /// Rotation axis of each actuator, by global dof index.
    pub joint_axes: Vec<Vec3<T>>,
    /// Location of the joint each actuator belongs to.
    pub joint_origins: Vec<Vec3<T>>,
}

fn order_from_root(graph: &MorphologyGraph) -> Vec<usize> {
    let mut order = vec![0];
    let mut i = 0;
    while i < order.len() {
        let n = order[i];
        order.extend(graph.children(n));
        i += 1;
    }
    order
}

/// Root fixed at the origin with identity orientation. Each module's pose is
/// its parent's pose, moved by the attach offset, rotated about each of its
/// joint's actuator axes in turn, then advanced by the module length along
/// the local x axis.
pub fn kinematic_frames<T: Real>(graph: &MorphologyGraph, joint_angles: &[T]) -> Result<Frames<T>> {
    let dim = graph.action_dimension();
    if joint_angles.len() != dim {
        return Err(Error::Shape(format!(
            "{} expects {dim} joint angles, got {}",
            graph.blueprint_tag,
            joint_angles.len()
        )));
    }
    let n = graph.num_nodes();
    let mut poses = vec![Pose::identity(); n];
    let mut joint_axes = vec![Vec3::zero(); dim];
    let mut joint_origins = vec![Vec3::zero(); dim];
    for node in order_from_root(graph).into_iter().skip(1) {
        let edge = graph.parent_edge(node).expect("non-root nodes have a parent joint");
        let parent = poses[edge.parent_id];
        let m = &graph.nodes[node];
        let origin = parent.transform_point(m.attach_offset.cast());
        let mut q = parent.orientation;
        let first = m.dof_index.max(0) as usize;
        for (j, act) in edge.actuators.iter().enumerate() {
            let axis: Vec3<T> = act.axis.cast();
            joint_axes[first + j] = q.rotate(axis);
            joint_origins[first + j] = origin;
            q = q * Quat::from_axis_angle(axis, joint_angles[first + j]);
        }
        let position = origin + q.rotate(Vec3::new(T::lit(m.length), T::zero(), T::zero()));
        poses[node] = Pose { position, orientation: q };
    }
    Ok(Frames { poses, joint_axes, joint_origins })
}

pub fn forward_kinematics<T: Real>(graph: &MorphologyGraph, joint_angles: &[T]) -> Result<Vec<Pose<T>>> {
    kinematic_frames(graph, joint_angles).map(|f| f.poses)
}

/// Positional Jacobian of `node` with respect to every actuator: column `j`
/// is `d position / d angle_j`, zero for actuators off the root path.
pub fn position_jacobian<T: Real>(graph: &MorphologyGraph, frames: &Frames<T>, node: usize) -> Vec<Vec3<T>> {
    let target = frames.poses[node].position;
    let mut cols = vec![Vec3::zero(); graph.action_dimension()];
    for n in graph.root_path(node).into_iter().skip(1) {
        for j in graph.node_dofs(n) {
            cols[j] = frames.joint_axes[j].cross(target - frames.joint_origins[j]);
        }
    }
    cols
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::{generate_morphology, Actuator, Blueprint, JointEdge, ModuleKind, ModuleNode};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn chain(lengths: &[f64]) -> MorphologyGraph {
        let mut nodes = vec![ModuleNode {
            node_id: 0,
            kind: ModuleKind::Torso,
            radius: 0.25,
            length: 0.0,
            mass: 1.0,
            inertia: 0.01,
            attach_offset: Vec3::zero(),
            dof_index: -1,
        }];
        let mut edges = Vec::new();
        for (i, &l) in lengths.iter().enumerate() {
            nodes.push(ModuleNode {
                node_id: i + 1,
                kind: ModuleKind::LimbSegment,
                radius: 0.08,
                length: l,
                mass: 1.0,
                inertia: 0.01,
                attach_offset: Vec3::zero(),
                dof_index: -1,
            });
            edges.push(JointEdge {
                parent_id: i,
                child_id: i + 1,
                actuators: vec![Actuator { axis: Vec3::new(0.0, 0.0, 1.0), range_lo: -3.0, range_hi: 3.0, gear: 1.0 }],
            });
        }
        let mut g = MorphologyGraph { nodes, edges, blueprint_tag: "chain".into(), variation: None };
        g.assign_dofs();
        g
    }

    #[test]
    fn single_segment() {
        let g = chain(&[0.4]);
        let p = forward_kinematics(&g, &[0.0]).unwrap()[1].position;
        assert_eq!(p, Vec3::new(0.4, 0.0, 0.0));
        let p = forward_kinematics(&g, &[FRAC_PI_2]).unwrap()[1].position;
        assert!((p - Vec3::new(0.0, 0.4, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn planar_two_link() {
        let g = chain(&[0.4, 0.4]);
        let p = forward_kinematics(&g, &[FRAC_PI_4, FRAC_PI_4]).unwrap()[2].position;
        assert!((p.x - 0.28284).abs() < 1e-5 && (p.y - 0.68284).abs() < 1e-5 && p.z.abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let g = chain(&[0.4, 0.4]);
        assert!(matches!(forward_kinematics(&g, &[0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let g = generate_morphology(Blueprint::Claw, 3, None).unwrap();
        let angles: Vec<f64> = (0..g.action_dimension()).map(|i| 0.3 * (i as f64).sin()).collect();
        let frames = kinematic_frames(&g, &angles).unwrap();
        let node = g.end_effector(1).unwrap();
        let jac = position_jacobian(&g, &frames, node);
        let h = 1e-6;
        for j in 0..angles.len() {
            let mut plus = angles.clone();
            let mut minus = angles.clone();
            plus[j] += h;
            minus[j] -= h;
            let fd = (forward_kinematics(&g, &plus).unwrap()[node].position
                - forward_kinematics(&g, &minus).unwrap()[node].position)
                .scale(0.5 / h);
            assert!((fd - jac[j]).norm() < 1e-8, "dof {j}: {fd:?} vs {:?}", jac[j]);
        }
    }

    #[test]
    fn single_precision_agrees() {
        let g = generate_morphology(Blueprint::Centipede, 3, None).unwrap();
        let a64: Vec<f64> = (0..g.action_dimension()).map(|i| 0.1 * i as f64 - 0.5).collect();
        let a32: Vec<f32> = a64.iter().map(|&x| x as f32).collect();
        let p64 = forward_kinematics(&g, &a64).unwrap();
        let p32 = forward_kinematics(&g, &a32).unwrap();
        for (a, b) in p64.iter().zip(&p32) {
            assert!((a.position - b.position.cast()).norm() < 1e-5);
        }
    }
}
