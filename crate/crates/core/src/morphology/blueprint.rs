use std::f64::consts::PI;

use super::{
    apply_mass_scaling, apply_missing, apply_size_scaling, canon, Actuator, JointEdge,
    ModuleKind, ModuleNode, MorphologyGraph, Variation,
};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const TORSO_RADIUS: f64 = 0.25;
const BODY_LENGTH: f64 = 0.5;
const SEGMENT_LENGTH: f64 = 0.4;
const SEGMENT_RADIUS: f64 = 0.08;
const MASS: f64 = 1.0;
const INERTIA: f64 = 0.01;
const GEAR: f64 = 1.0;

// Pitch ranges are asymmetric so the reset pose (range midpoints) is bent:
// a straight limb is a kinematic singularity for planar reaching.
const KNEE_RANGE: (f64, f64) = (-2.0, 0.5);
const CLAW_HIP_PITCH_RANGE: (f64, f64) = (-0.8, 0.2);
const CLAW_MID_RANGE: (f64, f64) = (-0.2, 1.2);
const CLAW_TIP_RANGE: (f64, f64) = (-0.2, 1.2);
const SPINE_RANGE: (f64, f64) = (-0.2, 1.2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Blueprint {
    Ant,
    Claw,
    Centipede,
    Worm,
}

impl Blueprint {
    pub fn as_str(self) -> &'static str {
        match self {
            Blueprint::Ant => "ant",
            Blueprint::Claw => "claw",
            Blueprint::Centipede => "centipede",
            Blueprint::Worm => "worm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ant" => Some(Blueprint::Ant),
            "claw" => Some(Blueprint::Claw),
            "centipede" => Some(Blueprint::Centipede),
            "worm" => Some(Blueprint::Worm),
            _ => None,
        }
    }

    /// Legal leg (ant, claw) or body (centipede, worm) counts.
    pub fn count_range(self) -> std::ops::RangeInclusive<usize> {
        match self {
            Blueprint::Ant | Blueprint::Claw => 2..=6,
            Blueprint::Centipede | Blueprint::Worm => 2..=7,
        }
    }
}

fn yaw(lo: f64, hi: f64) -> Actuator {
    Actuator { axis: Vec3::new(0.0, 0.0, 1.0), range_lo: canon(lo), range_hi: canon(hi), gear: GEAR }
}

fn pitch((lo, hi): (f64, f64)) -> Actuator {
    Actuator { axis: Vec3::new(0.0, 1.0, 0.0), range_lo: canon(lo), range_hi: canon(hi), gear: GEAR }
}

struct Builder {
    nodes: Vec<ModuleNode>,
    edges: Vec<JointEdge>,
}

impl Builder {
    fn new() -> Self {
        let root = ModuleNode {
            node_id: 0,
            kind: ModuleKind::Torso,
            radius: TORSO_RADIUS,
            length: 0.0,
            mass: MASS,
            inertia: INERTIA,
            attach_offset: Vec3::zero(),
            dof_index: -1,
        };
        Builder { nodes: vec![root], edges: Vec::new() }
    }

    fn add(&mut self, parent: usize, kind: ModuleKind, actuators: Vec<Actuator>) -> usize {
        let id = self.nodes.len();
        let (radius, length) = match kind {
            ModuleKind::LimbSegment => (SEGMENT_RADIUS, SEGMENT_LENGTH),
            _ => (TORSO_RADIUS, BODY_LENGTH),
        };
        self.nodes.push(ModuleNode {
            node_id: id,
            kind,
            radius,
            length,
            mass: MASS,
            inertia: INERTIA,
            attach_offset: Vec3::zero(),
            dof_index: -1,
        });
        self.edges.push(JointEdge { parent_id: parent, child_id: id, actuators });
        id
    }

    fn finish(self, tag: String) -> MorphologyGraph {
        let mut g = MorphologyGraph { nodes: self.nodes, edges: self.edges, blueprint_tag: tag, variation: None };
        g.assign_dofs();
        g
    }
}

/// Builds the morphology for `blueprint` with `count` legs (ant, claw) or
/// bodies (centipede, worm), then applies `variation` if given.
///
/// Legs radiate from the centre of their trunk module. The hip yaw range of
/// each leg is centred on its resting direction, so the reset pose (every
/// joint at the middle of its range) spreads the legs evenly.
pub fn generate_morphology(
    blueprint: Blueprint,
    count: usize,
    variation: Option<&Variation>,
) -> Result<MorphologyGraph> {
    if !blueprint.count_range().contains(&count) {
        return Err(Error::Range(format!(
            "{} count {count} outside {:?}",
            blueprint.as_str(),
            blueprint.count_range()
        )));
    }
    let mut b = Builder::new();
    match blueprint {
        Blueprint::Ant => {
            for k in 0..count {
                let dir = 2.0 * PI * k as f64 / count as f64;
                let hip = b.add(0, ModuleKind::LimbSegment, vec![yaw(dir - PI, dir + PI)]);
                b.add(hip, ModuleKind::LimbSegment, vec![pitch(KNEE_RANGE)]);
            }
        }
        Blueprint::Claw => {
            for k in 0..count {
                let dir = 2.0 * PI * k as f64 / count as f64;
                let hip = b.add(
                    0,
                    ModuleKind::LimbSegment,
                    vec![yaw(dir - PI, dir + PI), pitch(CLAW_HIP_PITCH_RANGE)],
                );
                let mid = b.add(hip, ModuleKind::LimbSegment, vec![pitch(CLAW_MID_RANGE)]);
                b.add(mid, ModuleKind::LimbSegment, vec![pitch(CLAW_TIP_RANGE)]);
            }
        }
        Blueprint::Centipede => {
            let mut body = 0;
            for i in 0..count {
                if i > 0 {
                    body = b.add(body, ModuleKind::Body, vec![yaw(SPINE_RANGE.0, SPINE_RANGE.1)]);
                }
                for side in [1.0, -1.0] {
                    let dir = side * PI / 2.0;
                    let hip = b.add(body, ModuleKind::LimbSegment, vec![yaw(dir - PI, dir + PI)]);
                    b.add(hip, ModuleKind::LimbSegment, vec![pitch(KNEE_RANGE)]);
                }
            }
        }
        Blueprint::Worm => {
            // the head joint turns freely so the chain can face any direction
            let mut body = b.add(0, ModuleKind::Body, vec![yaw(-PI, PI)]);
            for _ in 2..count {
                body = b.add(body, ModuleKind::Body, vec![yaw(SPINE_RANGE.0, SPINE_RANGE.1)]);
            }
        }
    }
    let mut g = b.finish(format!("{}_{count}", blueprint.as_str()));
    if let Some(v) = variation {
        if let Some(leg) = v.missing {
            g = apply_missing(&g, leg)?;
        }
        if let Some(s) = v.mass_scales {
            g = apply_mass_scaling(&g, s)?;
        }
        if let Some(s) = v.size_scales {
            g = apply_size_scaling(&g, s)?;
        }
    }
    Ok(g)
}

/// Splits a blueprint tag such as `ant_5_mass_0.5_1.0_3.0` into its parts.
pub(crate) fn parse_tag(tag: &str) -> Option<(Blueprint, usize, Variation)> {
    let parts: Vec<&str> = tag.split('_').collect();
    let blueprint = Blueprint::parse(parts.first()?)?;
    let count = parts.get(1)?.parse().ok()?;
    let mut v = Variation::default();
    let mut i = 2;
    let scales = |p: &[&str]| -> Option<[f64; 3]> {
        Some([p.first()?.parse().ok()?, p.get(1)?.parse().ok()?, p.get(2)?.parse().ok()?])
    };
    while i < parts.len() {
        match parts[i] {
            "missing" => {
                v.missing = Some(parts.get(i + 1)?.parse().ok()?);
                i += 2;
            }
            "mass" => {
                v.mass_scales = Some(scales(&parts[i + 1..])?);
                i += 4;
            }
            "size" => {
                v.size_scales = Some(scales(&parts[i + 1..])?);
                i += 4;
            }
            _ => return None,
        }
    }
    Some((blueprint, count, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphology::validate;

    #[test]
    fn blueprint_counts() {
        let cases = [
            (Blueprint::Ant, 4, 9, 8),
            (Blueprint::Worm, 5, 5, 4),
            (Blueprint::Centipede, 3, 15, 14),
            (Blueprint::Claw, 2, 7, 8),
        ];
        for (bp, count, nodes, dofs) in cases {
            let g = generate_morphology(bp, count, None).unwrap();
            assert_eq!(g.num_nodes(), nodes, "{bp:?}");
            assert_eq!(g.edges.len(), nodes - 1, "{bp:?}");
            assert_eq!(g.action_dimension(), dofs, "{bp:?}");
        }
    }

    #[test]
    fn count_out_of_range() {
        assert!(matches!(generate_morphology(Blueprint::Ant, 7, None), Err(Error::Range(_))));
        assert!(matches!(generate_morphology(Blueprint::Worm, 1, None), Err(Error::Range(_))));
    }

    #[test]
    fn every_blueprint_validates() {
        for bp in [Blueprint::Ant, Blueprint::Claw, Blueprint::Centipede, Blueprint::Worm] {
            for count in bp.count_range() {
                let g = generate_morphology(bp, count, None).unwrap();
                assert!(validate(&g).is_empty(), "{bp:?} {count}: {:?}", validate(&g));
            }
        }
    }

    #[test]
    fn tag_roundtrip() {
        let v = Variation { missing: Some(1), mass_scales: Some([0.5, 1.0, 3.0]), size_scales: None };
        let g = generate_morphology(Blueprint::Ant, 5, Some(&v)).unwrap();
        assert_eq!(g.blueprint_tag, "ant_5_missing_1_mass_0.5_1.0_3.0");
        let (bp, n, parsed) = parse_tag(&g.blueprint_tag).unwrap();
        assert_eq!((bp, n), (Blueprint::Ant, 5));
        assert_eq!(parsed, v);
    }
}
