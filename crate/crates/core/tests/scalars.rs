use fiberdim::dimension::{box_count, dyadic_scales, Anchor, PointSet};
use fiberdim::ultra::{monotone_map, pushforward_check, UltrametricTree};
use fiberdim::{GridFunction, IntervalUnion, Rational, Scalar};

fn counts<T: Scalar>() -> Vec<u64> {
    let third = T::one() / T::from_i64_exact(3);
    let set = PointSet::Intervals(IntervalUnion::from_parts(vec![
        (T::zero(), third.clone()),
        (third.clone() + third, T::one()),
    ]));
    dyadic_scales::<T>(1, 8)
        .iter()
        .map(|d| box_count(&set, d, Anchor::Binary).unwrap())
        .collect()
}

fn total_variation<T: Scalar>() -> T {
    let xs = (0..5).map(T::from_i64_exact).collect();
    let ys = [0, 3, -1, 2, 2].into_iter().map(T::from_i64_exact).collect();
    GridFunction::linear(xs, ys).unwrap().total_variation()
}

#[test]
fn same_counts_for_every_scalar() {
    let exact = counts::<Rational>();
    assert_eq!(counts::<f64>(), exact);
    assert_eq!(counts::<f32>(), exact);
}

#[test]
fn grid_functions_over_every_scalar() {
    assert_eq!(total_variation::<Rational>(), Rational::from_integer(10.into()));
    assert_eq!(total_variation::<f64>(), 10.0);
    assert_eq!(total_variation::<f32>(), 10.0);
}

#[test]
fn ultrametric_over_floats() {
    let t = UltrametricTree::<f64>::weighted(&[0.25, 0.75], 3).unwrap();
    let h = monotone_map(&t);
    assert!(h.windows(2).all(|w| w[0] < w[1]));
    assert!(pushforward_check(&t).iter().all(|c| c.pass));
}
