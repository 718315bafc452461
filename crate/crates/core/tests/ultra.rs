use fiberdim::ultra::{holder_profile, monotone_map, pushforward_check, UltrametricTree};
use fiberdim::Rational;
use proptest::prelude::*;

fn weights() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(1i64..10, 2..=3).prop_map(|w| {
        let total: i64 = w.iter().sum();
        w.iter().map(|&v| Rational::new(v.into(), total.into())).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn weighted_tree_invariants(w in weights(), depth in 1usize..=4) {
        let t = UltrametricTree::weighted(&w, depth).unwrap();
        let h = monotone_map(&t);
        for pair in h.windows(2) {
            prop_assert!(pair[0] < pair[1]);
        }
        prop_assert!(pushforward_check(&t).iter().all(|c| c.pass));
        prop_assert!(t.ultrametric_holds().unwrap());
        prop_assert!(t.balls_nested_or_disjoint().unwrap());
        prop_assert!(t.one_monotone().unwrap());
    }

    #[test]
    fn uniform_exponent(b in 2u32..=5, depth in 2usize..=4) {
        let t = UltrametricTree::<Rational>::uniform(b, depth).unwrap();
        let p = holder_profile(&t, 0, 0);
        let e = p.min_exponent.unwrap();
        prop_assert!((e - (b as f64).ln() / 2f64.ln()).abs() < 1e-12);
    }
}
