use super::*;
use crate::control_graph::{CgVariant, ObservationSpec};
use crate::env::DEFAULT_EXPERT_GAIN;
use crate::error::Error;
use crate::nn::{init_params, Arch, PolicyConfig};

fn bounds(id: &str, d_min: &[f64], d_max: &[f64]) -> Bounds {
    Bounds { env_id: id.into(), family: id.into(), d_min: d_min.to_vec(), d_max: d_max.to_vec() }
}

fn episode(id: &str, seed: u64, d: &[f64]) -> Episode {
    Episode { env_id: id.into(), seed, final_distances: d.to_vec() }
}

#[test]
fn endpoints_are_exact() {
    let b = bounds("e", &[0.1, 0.3], &[8.75, 2.0]);
    let lo = normalized_final_distance(&[(b.clone(), vec![episode("e", 0, &[0.1, 0.3])])]).unwrap();
    assert_eq!(lo.mean, 0.0);
    let b1 = bounds("e", &[0.1], &[8.75]);
    let hi = normalized_final_distance(&[(b1, vec![episode("e", 0, &[8.75])])]).unwrap();
    assert_eq!(hi.mean, 1.0);
}

#[test]
fn midpoint_of_ant_reach_bounds() {
    let b = bounds("ant_reach_2", &[0.1], &[8.75]);
    let r = normalized_final_distance(&[(b, vec![episode("ant_reach_2", 0, &[4.425])])]).unwrap();
    assert!((r.mean - 0.5).abs() < 1e-15, "{}", r.mean);
}

#[test]
fn values_are_not_clamped() {
    let b = bounds("e", &[0.1], &[1.1]);
    let r = normalized_final_distance(&[(b, vec![episode("e", 0, &[2.1]), episode("e", 1, &[0.0])])]).unwrap();
    assert_eq!(r.rows[0].normalized, 2.0);
    assert!((r.rows[1].normalized + 0.1).abs() < 1e-15);
}

#[test]
fn inverted_bounds_are_config_errors() {
    let b = bounds("e", &[0.5], &[0.5]);
    assert!(matches!(normalized_final_distance(&[(b, vec![episode("e", 0, &[1.0])])]), Err(Error::Config(_))));
}

#[test]
fn subdomain_and_env_means_differ_when_families_are_unbalanced() {
    let mk = |id: &str, fam: &str, d: f64| {
        let mut b = bounds(id, &[0.0], &[1.0]);
        b.family = fam.into();
        (b, vec![episode(id, 0, &[d])])
    };
    let r = normalized_final_distance(&[mk("a1", "a", 0.0), mk("a2", "a", 0.0), mk("b1", "b", 0.9)]).unwrap();
    assert!((r.mean - 0.3).abs() < 1e-15);
    assert!((r.subdomain_mean - 0.45).abs() < 1e-15);
}

#[test]
fn csv_round_trip_preserves_aggregates() {
    let groups = vec![
        (bounds("ant_reach_3", &[0.02], &[0.4]), vec![episode("ant_reach_3", 1, &[0.3]), episode("ant_reach_3", 2, &[0.1])]),
        (bounds("ant_twister_3", &[0.02, 0.02], &[0.5, 0.2]), vec![episode("ant_twister_3", 1, &[0.25, 0.07])]),
    ];
    let r = normalized_final_distance(&groups).unwrap();
    let back = MetricResult::from_csv(&r.to_csv()).unwrap();
    assert_eq!(back.mean.to_bits(), r.mean.to_bits());
    assert_eq!(back.rows, r.rows);
    assert!(r.to_csv().starts_with("env_id,goal_index,seed,final_distance,normalized\n"));
}

#[test]
fn improvement_arithmetic() {
    assert!((percentage_improvement(0.3128, 0.4069).unwrap() - 23.13).abs() < 0.01);
    assert!((percentage_improvement(0.4066, 0.4940).unwrap() - 17.69).abs() < 0.01);
    assert!(matches!(percentage_improvement(0.4, 0.4), Err(Error::Ordering(_))));
    assert!(matches!(percentage_improvement(0.5, 0.4), Err(Error::Ordering(_))));
    let base = percentage_improvement(0.2, 0.7).unwrap();
    for c in [0.001, 3.0, 1e6] {
        assert!((percentage_improvement(0.2 * c, 0.7 * c).unwrap() - base).abs() < 1e-9);
    }
}

fn ids(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn morphology_split_holds_out_size_four() {
    let u = ids(&["ant_reach_2", "ant_reach_3", "ant_reach_4", "ant_reach_5", "ant_reach_6"]);
    let p = split_environments(&u, SplitKind::CompositionalMorphology, &Holdout::default()).unwrap();
    assert_eq!(p.train, ids(&["ant_reach_2", "ant_reach_3", "ant_reach_5", "ant_reach_6"]));
    assert_eq!(p.test, ids(&["ant_reach_4"]));
    let d = split_environments(&u, SplitKind::InDistribution, &Holdout::default()).unwrap();
    assert_eq!(d.test, u);
    assert_eq!(d.train, u);
}

#[test]
fn task_and_ood_splits() {
    let u = ids(&["ant_reach_3", "ant_reach_hard_3", "ant_touch_4", "ant_reach_hard_4_mass_0.5_1.0_3.0"]);
    let h = Holdout::default();
    let t = split_environments(&u, SplitKind::CompositionalTask, &h).unwrap();
    assert_eq!(t.train, ids(&["ant_reach_3", "ant_touch_4"]));
    assert_eq!(t.test, ids(&["ant_reach_hard_3"]));
    let o = split_environments(&u, SplitKind::OutOfDistribution, &h).unwrap();
    assert_eq!(o.test, ids(&["ant_reach_hard_4_mass_0.5_1.0_3.0"]));
    for p in [&t, &o] {
        assert!(p.train.iter().all(|e| !p.test.contains(e)));
    }
}

#[test]
fn holding_out_everything_is_a_config_error() {
    let u = ids(&["ant_reach_4", "claw_reach_4"]);
    assert!(matches!(
        split_environments(&u, SplitKind::CompositionalMorphology, &Holdout::default()),
        Err(Error::Config(_))
    ));
    assert!(split_environments(&[], SplitKind::InDistribution, &Holdout::default()).is_err());
}

#[test]
fn zero_controller_keeps_everything_constant() {
    let env = EnvSpec::from_id("ant_reach_3").unwrap();
    let t = rollout(Controller::Zero, &env, 3, 40).unwrap();
    assert_eq!(t.len(), 40);
    assert!(t.joint_angles.iter().all(|q| q == &t.joint_angles[0]));
    assert!(t.distances.iter().all(|d| d == &t.distances[0]));
}

#[test]
fn expert_rollout_reaches_goal_and_is_deterministic() {
    let env = EnvSpec::from_id("ant_reach_4").unwrap();
    let a = rollout(Controller::Expert(DEFAULT_EXPERT_GAIN), &env, 11, 10_000).unwrap();
    assert_eq!(a.len(), env.task.episode_length);
    assert!(a.final_distances()[0] <= env.task.d_min[0]);
    let b = rollout(Controller::Expert(DEFAULT_EXPERT_GAIN), &env, 11, 10_000).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
}

fn small(arch: Arch, variant: CgVariant) -> crate::nn::PolicyParams {
    let obs = ObservationSpec::base_set();
    let mut c = PolicyConfig::desk().with_inputs(&obs, variant, 1);
    c.arch = arch;
    c.embed = 8;
    c.attn_hidden = 16;
    c.mlp_hidden = 16;
    c.gnn_hidden = 8;
    c.layers = 2;
    init_params(&c, 5).unwrap()
}

#[test]
fn policy_rollout_produces_full_action_vectors() {
    let env = EnvSpec::from_id("ant_reach_4").unwrap();
    for (arch, v) in [(Arch::Mlp, CgVariant::V2), (Arch::Gnn, CgVariant::V1), (Arch::Transformer, CgVariant::V2)] {
        let p = small(arch, v);
        let t = rollout(Controller::Policy(&p), &env, 0, 5).unwrap();
        assert!(t.actions.iter().all(|a| a.len() == 8 && a.iter().all(|x| x.abs() <= 1.0)));
    }
}

#[test]
fn attention_export_shapes_and_rows() {
    let env = EnvSpec::from_id("ant_reach_3").unwrap();
    let p = small(Arch::Transformer, CgVariant::V2);
    let r = attention_report(&p, &env, 0, 6).unwrap();
    let n = env.graph.num_nodes() + 1;
    assert_eq!(r.shape(), [6, 2, 2, n, n]);
    for maps in &r.steps {
        for m in maps {
            for i in 0..n {
                assert!((m.row(i).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }
    let mass = r.goal_mass.as_ref().unwrap();
    assert!(mass.iter().all(|&g| (0.0..=1.0).contains(&g)));
    let index = AttentionReport::read_index(&r.to_bytes()).unwrap();
    assert_eq!(index.len(), 6 * 2 * 2 + 1);
    assert_eq!(index[5], ("attn/1/0/1".to_string(), vec![n, n]));

    let v1 = small(Arch::Transformer, CgVariant::V1);
    let r1 = attention_report(&v1, &env, 0, 2).unwrap();
    assert!(r1.goal_mass.is_none());
    assert_eq!(r1.steps.len(), 2);
    let mlp = small(Arch::Mlp, CgVariant::V2);
    assert!(matches!(attention_report(&mlp, &env, 0, 2), Err(Error::Unsupported(_))));
}
