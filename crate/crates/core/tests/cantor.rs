use fiberdim::cantor::{
    build_compact_type, build_fat_cantor, natural_measure, select_subset, verify_mass_bound,
    Selector, WindowProfile,
};
use fiberdim::num::{pow2, product, ubig_to_rat};
use fiberdim::Rational;
use num_bigint::BigUint;
use num_traits::Zero;
use proptest::prelude::*;

fn schedule() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(1u64..=5, 1..=4)
}

fn epsilon() -> impl Strategy<Value = Rational> {
    (2i64..20).prop_flat_map(|q| (1..q).prop_map(move |p| Rational::new(p.into(), q.into())))
}

fn bigs(a: &[u64]) -> Vec<BigUint> {
    a.iter().map(|&v| v.into()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn level_measures_sum_to_total(a in schedule(), eps in epsilon()) {
        let a = bigs(&a);
        let t = build_fat_cantor(&a, &eps, a.len()).unwrap();
        let total = Rational::from_integer(1.into()) - &eps;
        prop_assert_eq!(t.total_measure(), &total);
        for n in 0..=a.len() {
            let count = ubig_to_rat(&product(&a[..n]));
            prop_assert_eq!(t.piece_measure(n) * &count, total.clone());
            // each hull loses eps 2^-n / P_n to later stages
            let tail = &eps * pow2(-(n as i64)) / &count;
            let sum = t
                .level_hulls(n)
                .unwrap()
                .into_iter()
                .fold(Rational::zero(), |s, (lo, hi)| s + hi - lo - &tail);
            prop_assert_eq!(sum, total.clone());
        }
    }

    #[test]
    fn pieces_nested_and_disjoint(a in schedule(), eps in epsilon()) {
        let a = bigs(&a);
        let t = build_fat_cantor(&a, &eps, a.len()).unwrap();
        for n in 1..=a.len() {
            let parents = t.level_hulls(n - 1).unwrap();
            let kids = t.level_hulls(n).unwrap();
            let an = kids.len() / parents.len();
            for (i, (lo, hi)) in kids.iter().enumerate() {
                prop_assert!(lo < hi);
                let (plo, phi) = &parents[i / an];
                prop_assert!(plo <= lo && hi <= phi);
                if let Some((next, _)) = kids.get(i + 1) {
                    prop_assert!(hi < next);
                }
            }
        }
    }

    #[test]
    fn float_hulls_agree(a in schedule(), eps in epsilon()) {
        let a = bigs(&a);
        let t = build_fat_cantor(&a, &eps, a.len()).unwrap();
        let exact = t.level_hulls(a.len()).unwrap();
        let float = t.level_hulls_f64(a.len()).unwrap();
        for ((lo, hi), (x, y)) in exact.iter().zip(&float) {
            prop_assert!((fiberdim::num::ratio_to_f64(lo) - x).abs() < 1e-12);
            prop_assert!((fiberdim::num::ratio_to_f64(hi) - y).abs() < 1e-12);
        }
    }

    #[test]
    fn children_sum_law(ab in prop::collection::vec((1u64..=6, 0.0f64..1.0), 1..=3), seed in 0u64..1000) {
        let a: Vec<u64> = ab.iter().map(|p| p.0).collect();
        let b: Vec<u64> = ab.iter().map(|&(a, f)| 1 + (f * a as f64) as u64 % a).collect();
        let t = build_compact_type(&bigs(&a), a.len()).unwrap();
        let s = select_subset(&t, &b, &Selector::Random(seed)).unwrap();
        prop_assert_eq!(s.selected_hulls(a.len()).unwrap().len() as u64, b.iter().product::<u64>());
        let m = natural_measure(&s);
        prop_assert!(m.children_sum_holds());
    }

    #[test]
    fn window_ratio_grows_with_exponent(seed in 0u64..1000, e1 in 0.0f64..1.0, e2 in 0.0f64..1.0) {
        let t = build_compact_type(&bigs(&[4, 6, 4]), 3).unwrap();
        let s = select_subset(&t, &[2, 3, 2], &Selector::Random(seed)).unwrap();
        let m = natural_measure(&s);
        let prof = WindowProfile::new(&m, None, None).unwrap();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let r_lo = prof.ratios(|d| d.powf(lo));
        let r_hi = prof.ratios(|d| d.powf(hi));
        for (x, y) in r_lo.iter().zip(&r_hi) {
            prop_assert!(x <= &(y * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn construction_is_deterministic(a in schedule(), eps in epsilon(), seed in 0u64..1000) {
        let a = bigs(&a);
        let t1 = build_fat_cantor(&a, &eps, a.len()).unwrap();
        let t2 = build_fat_cantor(&a, &eps, a.len()).unwrap();
        prop_assert_eq!(&t1, &t2);
        let b = vec![1u64; a.len()];
        let s1 = select_subset(&t1, &b, &Selector::Random(seed)).unwrap();
        let s2 = select_subset(&t2, &b, &Selector::Random(seed)).unwrap();
        prop_assert_eq!(s1.selected_hulls(a.len()).unwrap(), s2.selected_hulls(a.len()).unwrap());
    }
}

#[test]
fn mass_bound_example_schedule() {
    let t = build_compact_type(&bigs(&[16, 512]), 2).unwrap();
    let s = select_subset(&t, &[8, 256], &Selector::First).unwrap();
    let r = verify_mass_bound(&natural_measure(&s), 2).unwrap();
    assert!(r.pass);
    assert_eq!(r.windows_scanned, 2048);
}
