use fiberdim::dimension::{
    banach_indicatrix_check, box_count, Anchor, PointSet,
};
use fiberdim::num::pow2;
use fiberdim::{GridFunction, IntervalUnion, Rational};
use proptest::prelude::*;

fn union() -> impl Strategy<Value = Vec<(i64, i64)>> {
    prop::collection::vec((0i64..4096, 0i64..64), 1..20)
}

fn intervals(parts: &[(i64, i64)], den: i64) -> IntervalUnion<Rational> {
    IntervalUnion::from_parts(
        parts
            .iter()
            .map(|&(a, l)| (Rational::new(a.into(), den.into()), Rational::new((a + l).into(), den.into())))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_grow_on_finer_grids(parts in union(), k in 0i64..10) {
        let set = PointSet::Intervals(intervals(&parts, 4096));
        let coarse = box_count(&set, &pow2(-k - 1), Anchor::Binary).unwrap();
        let fine = box_count(&set, &pow2(-k - 2), Anchor::Binary).unwrap();
        prop_assert!(fine >= coarse);
    }

    #[test]
    fn halving_the_set_halves_the_scale(parts in union(), k in 0i64..10) {
        let set = PointSet::Intervals(intervals(&parts, 4096));
        let half = PointSet::Intervals(intervals(&parts, 8192));
        let d = pow2(-k - 1);
        prop_assert_eq!(
            box_count(&half, &(&d / Rational::from_integer(2.into())), Anchor::Binary).unwrap(),
            box_count(&set, &d, Anchor::Binary).unwrap()
        );
    }

    #[test]
    fn indicatrix_is_exact(ys in prop::collection::vec(-20i64..20, 2..40)) {
        let n = ys.len() as i64 - 1;
        let xs = (0..=n).map(|i| Rational::new(i.into(), n.into())).collect();
        let ys = ys.iter().map(|&y| Rational::new(y.into(), 7.into())).collect();
        let f = GridFunction::linear(xs, ys).unwrap();
        let r = banach_indicatrix_check(&f).unwrap();
        prop_assert_eq!(&r.integral, &r.total_variation);
        prop_assert!(r.total_variation <= &r.lip * &r.domain);
        prop_assert!(r.pass);
    }
}
