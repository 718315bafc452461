//! Fat Cantor sets, gauge functions, randomized perturbations and fiber
//! dimension computations on the unit interval.

pub mod cantor;
pub mod construct;
pub mod dimension;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod num;
pub mod par;
pub mod perturb;
pub mod rng;
pub mod ultra;

pub use error::{Error, Result};
pub use grid::{GridFunction, Interp, IntervalUnion};
pub use num::{Rational, Scalar};

pub type ExactGrid = GridFunction<Rational>;
pub type FloatGrid = GridFunction<f64>;
pub type ExactIntervals = IntervalUnion<Rational>;
pub type SelfSimilarTreeF64 = cantor::SelfSimilarTree<f64>;
pub type GaugeF64 = gauge::Gauge<f64>;
pub type FloatIntervals = IntervalUnion<f64>;
pub type ExactPointSet = dimension::PointSet<Rational>;
pub type FloatPointSet = dimension::PointSet<f64>;
pub type ExactUltrametric = ultra::UltrametricTree<Rational>;
pub type FloatUltrametric = ultra::UltrametricTree<f64>;
