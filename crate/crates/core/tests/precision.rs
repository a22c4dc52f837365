//! The same policy evaluated in single and double precision.

use ctrlgraph::control_graph::{build_cg, CgVariant, ObservationSpec};
use ctrlgraph::env::{local_observations, EnvSpec};
use ctrlgraph::nn::{init_params, policy_act, Arch, PolicyConfig};
use ctrlgraph::{Policy, Policy32, PolicyInput, PolicyInput32};

#[test]
fn single_precision_tracks_double() {
    let env = EnvSpec::from_id("claw_reach_4").unwrap();
    let obs = ObservationSpec::base_set_m();
    let state = env.reset(11).unwrap();
    let cg = build_cg(CgVariant::V2, &local_observations(&state, &obs), &state.goal_inputs(), &env.graph, &obs)
        .unwrap();
    for arch in [Arch::Mlp, Arch::Transformer] {
        let config = PolicyConfig { arch, ..PolicyConfig::desk() }.with_inputs(&obs, CgVariant::V2, 1);
        let p64: Policy = init_params(&config, 2).unwrap();
        let p32: Policy32 = p64.cast();
        let (a64, _) = policy_act(&p64, &PolicyInput::from_cg(&cg, &config).unwrap()).unwrap();
        let (a32, _) = policy_act(&p32, &PolicyInput32::from_cg(&cg, &config).unwrap()).unwrap();
        assert_eq!(a64.len(), a32.len());
        for (x, y) in a64.iter().zip(&a32) {
            assert!((x - *y as f64).abs() < 1e-4, "{arch}: {x} vs {y}");
        }
    }
}
