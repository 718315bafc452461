use fiberdim::cantor::build_fat_cantor;
use fiberdim::num::pow2;
use fiberdim::perturb::{occupation_histogram, refine_cover, sample_run};
use fiberdim::Rational;
use num_bigint::BigUint;
use num_traits::Signed;
use proptest::prelude::*;

fn tree(a: &[u64]) -> fiberdim::cantor::CantorTree {
    let a: Vec<BigUint> = a.iter().map(|&v| v.into()).collect();
    build_fat_cantor(&a, &Rational::new(1.into(), 4.into()), a.len()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn amplitude_per_level(a in prop::collection::vec(1u64..=5, 1..=4), d in 1usize..=3, seed in any::<u64>()) {
        let t = tree(&a);
        let run = sample_run(&t, d, None, seed).unwrap();
        for n in 1..=a.len() {
            prop_assert!(run.max_amplitude(n) <= pow2(1 - n as i64));
        }
    }

    #[test]
    fn occupation_mass_is_conserved(a in prop::collection::vec(1u64..=5, 1..=4), d in 1usize..=2,
                                    bins in 2usize..40, seed in any::<u64>()) {
        let t = tree(&a);
        let run = sample_run(&t, d, None, seed).unwrap();
        let h = occupation_histogram(&run, bins).unwrap();
        prop_assert_eq!(&h.total(), t.total_measure());
    }

    #[test]
    fn runs_are_pure_functions_of_the_seed(a in prop::collection::vec(2u64..=4, 1..=3), seed in any::<u64>()) {
        let t = tree(&a);
        prop_assert_eq!(sample_run(&t, 2, None, seed).unwrap(), sample_run(&t, 2, None, seed).unwrap());
    }

    #[test]
    fn refined_balls_cover_the_parent(z in prop::collection::vec(-8i64..8, 1..=3), n in 0u32..4) {
        let z: Vec<Rational> = z.iter().map(|&v| Rational::new(v.into(), 8.into())).collect();
        let balls = refine_cover(&z, n);
        prop_assert_eq!(balls.len(), 1 << z.len());
        let step = pow2(-(n as i64)) / Rational::from_integer(8.into());
        let d = z.len();
        // grid of offsets k * 2^-n / 8, |k| <= 9, in every coordinate
        let total = 19usize.pow(d as u32);
        for flat in 0..total {
            let ks: Vec<i64> = (0..d).map(|j| (flat / 19usize.pow(j as u32) % 19) as i64 - 9).collect();
            let p: Vec<Rational> = z.iter().zip(&ks).map(|(c, &k)| c + &step * Rational::from_integer(k.into())).collect();
            let in_parent = ks.iter().all(|k| k.abs() <= 8);
            let in_union = balls.iter().any(|(c, r)| {
                c.iter().zip(&p).all(|(ci, pi)| (pi - ci).abs() <= *r)
            });
            prop_assert_eq!(in_parent, in_union);
        }
    }
}
