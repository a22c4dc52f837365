use super::sim::EnvState;
use crate::control_graph::{ObsFlag, ObservationSpec};
use crate::geometry::Vec3;
use crate::morphology::ModuleKind;
use crate::tensor::Tensor;

/// Per-node feature rows laid out as `spec` describes. Velocity channels
/// are one-step finite differences and read zero right after a reset;
/// joint-derived channels of the root are zero.
pub fn local_observations(state: &EnvState, spec: &ObservationSpec) -> Tensor {
    let g = &state.graph;
    let n = g.num_nodes();
    let width = spec.width();
    let dims = g.action_dimension().max(1) as f64;
    let inv_dt = if state.last_dt > 0.0 { 1.0 / state.last_dt } else { 0.0 };
    let actuators = g.actuators();
    let mut out = Tensor::zeros(&[n, width]);
    for node in 0..n {
        let pose = state.poses[node];
        let prev = state.prev_poses[node];
        let dofs = g.node_dofs(node);
        let parent = g.parent(node);
        let m = &g.nodes[node];
        let row = out.row_mut(node);
        let mut c = 0;
        let mut put = |vals: &[f64], width: usize| {
            row[c..c + vals.len()].copy_from_slice(vals);
            c += width;
        };
        for &flag in spec.flags() {
            let w = flag.width();
            match flag {
                ObsFlag::P => put(&pose.position.to_array(), w),
                ObsFlag::V => put(&(pose.position - prev.position).scale(inv_dt).to_array(), w),
                ObsFlag::Q => put(&pose.orientation.to_array(), w),
                ObsFlag::A => {
                    let rel = prev.orientation.conjugate() * pose.orientation;
                    let omega = if inv_dt > 0.0 { rel.to_rotation_vector().scale(inv_dt) } else { Vec3::zero() };
                    put(&omega.to_array(), w)
                }
                ObsFlag::Ja => {
                    let v: Vec<f64> = dofs.clone().map(|j| state.joint_angles[j]).collect();
                    put(&v, w)
                }
                ObsFlag::Jr => {
                    let v: Vec<f64> =
                        dofs.clone().flat_map(|j| [actuators[j].range_lo, actuators[j].range_hi]).collect();
                    put(&v, w)
                }
                ObsFlag::Jv => {
                    let v: Vec<f64> = dofs
                        .clone()
                        .map(|j| (state.joint_angles[j] - state.prev_joint_angles[j]) * inv_dt)
                        .collect();
                    put(&v, w)
                }
                ObsFlag::Id => put(&[node as f64 / n as f64], w),
                ObsFlag::Rp | ObsFlag::Rr => {
                    if let Some(p) = parent {
                        let rel = state.poses[p].relative(&pose);
                        if flag == ObsFlag::Rp {
                            put(&rel.position.to_array(), w)
                        } else {
                            put(&rel.orientation.to_array(), w)
                        }
                    } else {
                        put(&[], w)
                    }
                }
                ObsFlag::M => {
                    let (gear, dof) = match parent {
                        Some(_) if !dofs.is_empty() => (actuators[dofs.start].gear, m.dof_index as f64 / dims),
                        _ => (0.0, 0.0),
                    };
                    put(
                        &[
                            m.radius,
                            m.length,
                            m.mass,
                            m.inertia,
                            gear,
                            dof,
                            (m.kind == ModuleKind::Torso) as u8 as f64,
                            (m.kind == ModuleKind::LimbSegment) as u8 as f64,
                        ],
                        w,
                    )
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{sim::DEFAULT_DT, TaskSpec};
    use crate::morphology::{generate_morphology, Blueprint};
    use std::sync::Arc;

    fn state() -> EnvState {
        let g = Arc::new(generate_morphology(Blueprint::Claw, 3, None).unwrap());
        let t = Arc::new(TaskSpec::standard("reach", &g).unwrap());
        EnvState::reset(g, t, 0).unwrap()
    }

    #[test]
    fn widths_and_reset_zeros() {
        let s = state();
        let spec = ObservationSpec::full();
        let obs = local_observations(&s, &spec);
        assert_eq!(obs.shape(), &[s.graph.num_nodes(), 41]);
        for flag in [ObsFlag::V, ObsFlag::A, ObsFlag::Jv] {
            let off = spec.offset(flag).unwrap();
            for r in 0..obs.rows() {
                assert!(obs.row(r)[off..off + flag.width()].iter().all(|&x| x == 0.0));
            }
        }
        assert_eq!(local_observations(&s, &ObservationSpec::base_set_m()).cols(), 30);
    }

    #[test]
    fn velocities_after_step() {
        let s = state();
        let mut a = vec![0.0; s.action_dimension()];
        a[0] = 1.0;
        let n = s.step(&a, DEFAULT_DT).unwrap();
        let spec = ObservationSpec::full();
        let obs = local_observations(&n, &spec);
        let jv = spec.offset(ObsFlag::Jv).unwrap();
        // node 1 is the first hip: its first actuator moved at full speed
        assert!((obs.at(1, jv) - 2.0).abs() < 1e-9);
        let av = spec.offset(ObsFlag::A).unwrap();
        let omega = Vec3::new(obs.at(1, av), obs.at(1, av + 1), obs.at(1, av + 2));
        assert!((omega.norm() - 2.0).abs() < 1e-9);
        // root is never actuated
        let ja = spec.offset(ObsFlag::Ja).unwrap();
        assert!(obs.row(0)[ja..ja + 3].iter().all(|&x| x == 0.0));
    }
}
