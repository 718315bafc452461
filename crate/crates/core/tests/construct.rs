use fiberdim::construct::{
    cone_function, random_lipschitz_pl, staircase_g, Modulus, SawtoothSum, StaircaseConfig,
};
use fiberdim::num::pow2;
use fiberdim::Rational;
use num_bigint::BigUint;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

fn alphas() -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec(0u32..3, 2..=6).prop_map(|extra| {
        let mut a = Rational::new(1.into(), 2.into());
        extra
            .iter()
            .map(|&e| {
                a = &a / Rational::from_integer((2 + e).into());
                a.clone()
            })
            .collect()
    })
}

fn rat(p: i64, q: i64) -> Rational {
    Rational::new(p.into(), q.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn staircase_is_monotone(alpha in alphas()) {
        let g = staircase_g(&StaircaseConfig::new(alpha).unwrap());
        let pts = g.points();
        for w in pts.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 <= w[1].1);
        }
        for (z, v) in &pts {
            prop_assert_eq!(&g.eval(z), v);
        }
    }

    #[test]
    fn truncated_preimage_diameters(alpha in alphas()) {
        let depth = alpha.len();
        let g = staircase_g(&StaircaseConfig::new(alpha.clone()).unwrap());
        for n in 1..depth.saturating_sub(1) {
            let expect = alpha[n..].iter().fold(Rational::zero(), |s, a| s + a) * rat(2, 1);
            for i in 1..=(1u64 << n) {
                prop_assert_eq!(g.preimage_diameter(n, i), Some(expect.clone()));
            }
        }
    }

    #[test]
    fn sawtooth_lipschitz_and_tail(a in prop::collection::vec(2u64..6, 1..=4), p in 0i64..1000, q in 1i64..1000) {
        let a: Vec<BigUint> = a.iter().map(|&v| v.into()).collect();
        let saw = SawtoothSum::new(&a).unwrap();
        let depth = a.len();
        let x = rat(p, q);
        for n in 0..=depth {
            let bound = (1..=n).fold(Rational::zero(), |s, i| s + saw.lip_term(i));
            if n > 0 {
                prop_assert!(saw.to_grid(n).unwrap().lip().unwrap() <= bound);
            }
            let tail = (saw.partial(depth, &x) - saw.partial(n, &x)).abs();
            prop_assert!(tail <= pow2(-(n as i64)));
        }
    }

    #[test]
    fn cone_dominates_family(seed in any::<u64>(), index in 0u64..1000, x0 in 0i64..=16) {
        let x0 = rat(x0, 16);
        let y0 = Rational::zero();
        let cone = cone_function(&x0, &y0, &Modulus::Linear { c: rat(2, 1) });
        let f = random_lipschitz_pl(&rat(1, 1), 16, &x0, &y0, seed, index);
        for x in cone.grid_points().iter().step_by(7) {
            let (v, g) = (f.eval(x), cone.eval_rational(x));
            if *x == x0 {
                prop_assert_eq!(v, g);
            } else {
                prop_assert!(v < g);
            }
        }
    }
}
