use ctrlgraph::control_graph::{mu_law, mu_law_inverse, quantize, N_BINS};
use ctrlgraph::morphology::{generate_morphology, parse_morphology, serialize_morphology, validate, Blueprint};
use proptest::prelude::*;

fn blueprint() -> impl Strategy<Value = Blueprint> {
    prop_oneof![Just(Blueprint::Ant), Just(Blueprint::Claw), Just(Blueprint::Centipede), Just(Blueprint::Worm)]
}

proptest! {
    #[test]
    fn mu_law_is_odd_and_monotone(a in -256.0f64..256.0, b in -256.0f64..256.0) {
        prop_assert_eq!(mu_law(-a), -mu_law(a));
        if a < b {
            prop_assert!(mu_law(a) < mu_law(b));
        }
    }

    #[test]
    fn mu_law_inverts(x in -256.0f64..256.0) {
        let back = mu_law_inverse(mu_law(x));
        prop_assert!((back - x).abs() <= 1e-9 * (1.0 + x.abs()));
    }

    #[test]
    fn quantize_stays_in_range(y in -2.0f64..2.0) {
        prop_assert!(quantize(y, N_BINS) < N_BINS);
    }

    #[test]
    fn generated_morphologies_are_valid_and_round_trip(b in blueprint(), k in 0usize..6) {
        let range = b.count_range();
        let count = range.start() + k % (range.end() - range.start() + 1);
        let g = generate_morphology(b, count, None).unwrap();
        prop_assert!(validate(&g).is_empty());
        let text = serialize_morphology(&g);
        let back = parse_morphology(&text).unwrap();
        prop_assert_eq!(serialize_morphology(&back), text);
    }
}
