//! Piecewise-linear and piecewise-constant functions on explicit breakpoints,
//! and finite unions of closed intervals.

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interp {
    /// Affine between consecutive breakpoints.
    Linear,
    /// `ys[i]` on `[xs[i], xs[i+1])`, last value at the last breakpoint.
    Constant,
}

/// Real function on `[xs[0], xs[last]]` given by breakpoints and values.
/// Evaluation clamps to the end values outside the breakpoint range.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    interp: Interp,
}

impl<T: Scalar> GridFunction<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>, interp: Interp) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid(
                "breakpoints",
                "need equally many (>= 1) breakpoints and values",
            ));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("breakpoints", "must be strictly increasing"));
        }
        Ok(Self { xs, ys, interp })
    }

    pub fn linear(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        Self::new(xs, ys, Interp::Linear)
    }

    pub fn constant(c: T) -> Self {
        Self {
            xs: vec![T::zero(), T::one()],
            ys: vec![c.clone(), c],
            interp: Interp::Linear,
        }
    }

    pub fn identity() -> Self {
        Self {
            xs: vec![T::zero(), T::one()],
            ys: vec![T::zero(), T::one()],
            interp: Interp::Linear,
        }
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn eval(&self, x: &T) -> T {
        let n = self.xs.len();
        if *x <= self.xs[0] {
            return self.ys[0].clone();
        }
        if *x >= self.xs[n - 1] {
            return self.ys[n - 1].clone();
        }
        // first index with xs[i] > x; 1 <= i <= n-1
        let i = self.xs.partition_point(|v| v <= x);
        match self.interp {
            Interp::Constant => self.ys[i - 1].clone(),
            Interp::Linear => {
                let (x0, x1) = (&self.xs[i - 1], &self.xs[i]);
                let (y0, y1) = (&self.ys[i - 1], &self.ys[i]);
                y0.clone()
                    + (y1.clone() - y0.clone()) * (x.clone() - x0.clone())
                        / (x1.clone() - x0.clone())
            }
        }
    }

    /// Slopes of the affine pieces (Linear only).
    pub fn slopes(&self) -> Result<Vec<T>> {
        if self.interp != Interp::Linear {
            return Err(Error::invalid(
                "interp",
                "slopes need a piecewise-linear function",
            ));
        }
        Ok(self
            .xs
            .windows(2)
            .zip(self.ys.windows(2))
            .map(|(x, y)| (y[1].clone() - y[0].clone()) / (x[1].clone() - x[0].clone()))
            .collect())
    }

    /// Largest slope magnitude; zero for a single breakpoint.
    pub fn lip(&self) -> Result<T> {
        let mut best = T::zero();
        for s in self.slopes()? {
            let a = s.abs();
            if a > best {
                best = a;
            }
        }
        Ok(best)
    }

    /// Sum of |y_{i+1} - y_i|.
    pub fn total_variation(&self) -> T {
        self.ys.windows(2).fold(T::zero(), |acc, w| {
            acc + (w[1].clone() - w[0].clone()).abs()
        })
    }

    pub fn min_max_value(&self) -> (T, T) {
        crate::num::min_max(&self.ys).expect("non-empty")
    }

    pub fn map_values(&self, f: impl Fn(&T) -> T) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.iter().map(f).collect(),
            interp: self.interp,
        }
    }

    pub fn convert<U: Scalar>(&self, f: impl Fn(&T) -> U) -> GridFunction<U> {
        GridFunction {
            xs: self.xs.iter().map(&f).collect(),
            ys: self.ys.iter().map(&f).collect(),
            interp: self.interp,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "interp": match self.interp { Interp::Linear => "linear", Interp::Constant => "constant" },
            "x": self.xs.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "y": self.ys.iter().map(Scalar::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Finite union of closed intervals, kept sorted and merged.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalUnion<T> {
    parts: Vec<(T, T)>,
}

impl<T: Scalar> IntervalUnion<T> {
    pub fn empty() -> Self {
        Self { parts: Vec::new() }
    }

    pub fn interval(lo: T, hi: T) -> Self {
        Self::from_parts(vec![(lo, hi)])
    }

    /// Sorts and merges overlapping or touching parts; drops reversed ones.
    pub fn from_parts(mut parts: Vec<(T, T)>) -> Self {
        parts.retain(|(a, b)| a <= b);
        parts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("comparable"));
        let mut out: Vec<(T, T)> = Vec::with_capacity(parts.len());
        for (a, b) in parts {
            if let Some(last) = out.last_mut() {
                if a <= last.1 {
                    if b > last.1 {
                        last.1 = b;
                    }
                    continue;
                }
            }
            out.push((a, b));
        }
        Self { parts: out }
    }

    pub fn parts(&self) -> &[(T, T)] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn measure(&self) -> T {
        self.parts
            .iter()
            .fold(T::zero(), |acc, (a, b)| acc + (b.clone() - a.clone()))
    }

    pub fn contains(&self, x: &T) -> bool {
        let i = self.parts.partition_point(|(a, _)| a <= x);
        i > 0 && *x <= self.parts[i - 1].1
    }

    /// Removes the open interval `(lo, hi)`.
    pub fn remove_open(&self, lo: &T, hi: &T) -> Self {
        let mut out = Vec::with_capacity(self.parts.len() + 1);
        for (a, b) in &self.parts {
            if b <= lo || a >= hi {
                out.push((a.clone(), b.clone()));
                continue;
            }
            if a <= lo {
                out.push((a.clone(), lo.clone()));
            }
            if b >= hi {
                out.push((hi.clone(), b.clone()));
            }
        }
        Self { parts: out }
    }

    pub fn intersect_interval(&self, lo: &T, hi: &T) -> Self {
        let mut out = Vec::new();
        for (a, b) in &self.parts {
            let l = if a > lo { a.clone() } else { lo.clone() };
            let h = if b < hi { b.clone() } else { hi.clone() };
            if l <= h {
                out.push((l, h));
            }
        }
        Self { parts: out }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.parts
                .iter()
                .map(|(a, b)| serde_json::json!([a.to_json(), b.to_json()]))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat, Rational};

    #[test]
    fn linear_eval_and_clamp() {
        let f = GridFunction::linear(
            vec![int(0), rat(1, 2), int(1)],
            vec![int(0), int(1), int(0)],
        )
        .unwrap();
        assert_eq!(f.eval(&rat(1, 4)), rat(1, 2));
        assert_eq!(f.eval(&rat(3, 4)), rat(1, 2));
        assert_eq!(f.eval(&int(2)), int(0));
        assert_eq!(f.lip().unwrap(), int(2));
        assert_eq!(f.total_variation(), int(2));
    }

    #[test]
    fn constant_interp() {
        let f =
            GridFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 2.0, 3.0], Interp::Constant).unwrap();
        assert_eq!(f.eval(&0.25), 1.0);
        assert_eq!(f.eval(&0.5), 2.0);
        assert_eq!(f.eval(&1.0), 3.0);
        assert!(f.lip().is_err());
    }

    #[test]
    fn rejects_unsorted() {
        assert!(GridFunction::linear(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn interval_union_ops() {
        let u: IntervalUnion<Rational> = IntervalUnion::interval(int(0), int(1));
        let v = u
            .remove_open(&rat(-1, 8), &rat(1, 8))
            .remove_open(&rat(3, 8), &rat(5, 8))
            .remove_open(&rat(7, 8), &rat(9, 8));
        assert_eq!(v.parts(), &[(rat(1, 8), rat(3, 8)), (rat(5, 8), rat(7, 8))]);
        assert_eq!(v.measure(), rat(1, 2));
        assert!(v.contains(&rat(1, 8)));
        assert!(!v.contains(&rat(1, 2)));
        let merged = IntervalUnion::from_parts(vec![(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)]);
        assert_eq!(merged.parts(), &[(0.0, 2.0), (3.0, 4.0)]);
    }
}
