//! Box counting on anchored grids, log-log fits, mass-distribution lower
//! bounds and the Banach indicatrix check.

use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde_json::{json, Value};

use crate::cantor::{
    natural_measure, select_subset, triadic_tree, MassDistribution, Selector, WindowProfile,
};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, Interp, IntervalUnion};
use crate::num::{fmt_rational, Rational, Scalar};
use crate::par;

/// Bounded subset of `[0,1]` or a graph cloud in `R^(1+d)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSet<T> {
    Empty,
    Intervals(IntervalUnion<T>),
    Cloud { dim: usize, points: Vec<Vec<f64>> },
}

/// Dimension reported for the empty set.
pub const EMPTY_DIMENSION: f64 = -1.0;

/// Cell side convention for a requested `delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Anchor {
    /// Cells of side `2 delta` anchored at 0.
    #[default]
    Binary,
    /// Cells of side `3^-j` anchored at 0, with `3^-j` the power of three nearest to `2 delta`.
    Ternary,
}

impl<T: Scalar> PointSet<T> {
    pub fn from_intervals(u: IntervalUnion<T>) -> Self {
        if u.is_empty() {
            PointSet::Empty
        } else {
            PointSet::Intervals(u)
        }
    }

    pub fn cloud(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Ok(PointSet::Empty);
        };
        let dim = first.len();
        if dim == 0
            || points
                .iter()
                .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(
                "points",
                "need finite points of one common dimension",
            ));
        }
        Ok(PointSet::Cloud { dim, points })
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            PointSet::Cloud { dim, .. } => *dim,
            _ => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, PointSet::Empty)
    }
}

/// Snaps float quotients that sit within rounding of an integer.
fn snap<T: Scalar>(v: &T) -> T {
    if T::EXACT {
        return v.clone();
    }
    let f = v.to_f64_lossy();
    let r = f.round();
    if (f - r).abs() <= 1e-9 * r.abs().max(1.0) {
        T::from_f64(r).unwrap_or_else(|| v.clone())
    } else {
        v.clone()
    }
}

fn floor_div<T: Scalar>(x: &T, s: &T) -> i64 {
    snap(&(x.clone() / s.clone())).floor_i64()
}

fn ceil_div<T: Scalar>(x: &T, s: &T) -> i64 {
    let v = snap(&(x.clone() / s.clone()));
    -(-v).floor_i64()
}

fn ternary_side<T: Scalar>(delta: &T) -> T {
    let two_d = (delta.clone() + delta.clone()).to_f64_lossy();
    let j = (-two_d.ln() / 3f64.ln()).round().max(0.0) as i64;
    let three = T::from_i64_exact(3);
    let mut s = T::one();
    for _ in 0..j {
        s = s / three.clone();
    }
    s
}

/// Cell side used for `delta` under `anchor`.
pub fn cell_side<T: Scalar>(delta: &T, anchor: Anchor) -> T {
    match anchor {
        Anchor::Binary => delta.clone() + delta.clone(),
        Anchor::Ternary => ternary_side(delta),
    }
}

/// Number of anchored grid cells meeting the set. An interval of positive
/// length meets the cells whose interiors it meets; a point meets its half-open cell.
pub fn box_count<T: Scalar>(set: &PointSet<T>, delta: &T, anchor: Anchor) -> Result<u64> {
    if *delta <= T::zero() {
        return Err(Error::invalid("delta", "must be positive"));
    }
    let s = cell_side(delta, anchor);
    match set {
        PointSet::Empty => Ok(0),
        PointSet::Intervals(u) => {
            let mut count = 0u64;
            let mut last: Option<i64> = None;
            for (lo, hi) in u.parts() {
                let (a, b) = if lo < hi {
                    (floor_div(lo, &s), ceil_div(hi, &s) - 1)
                } else {
                    let k = floor_div(lo, &s);
                    (k, k)
                };
                let a = match last {
                    Some(l) if a <= l => l + 1,
                    _ => a,
                };
                if b >= a {
                    count += (b - a + 1) as u64;
                }
                last = Some(last.map_or(b, |l| l.max(b)));
            }
            Ok(count)
        }
        PointSet::Cloud { points, .. } => {
            let sf = s.to_f64_lossy();
            let cell = |v: f64| floor_div(&v, &sf);
            if points.first().is_some_and(|p| p.len() <= 2) {
                let mut cells: Vec<(i64, i64)> =
                    par::map_slice(points, |p| (cell(p[0]), p.get(1).map_or(0, |v| cell(*v))));
                cells.sort_unstable();
                cells.dedup();
                return Ok(cells.len() as u64);
            }
            let mut cells: Vec<Vec<i64>> = par::map_slice(points, |p| p.iter().map(|v| cell(*v)).collect());
            cells.sort_unstable();
            cells.dedup();
            Ok(cells.len() as u64)
        }
    }
}

/// Result of an ordinary least-squares fit of `log N` against `log(1/delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionFit {
    pub scales: Vec<f64>,
    pub counts: Vec<u64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Inclusive index range of `scales` used in the regression.
    pub window: (usize, usize),
    pub anchor: Anchor,
}

/// Least squares `y = slope x + intercept`; returns `(slope, intercept, r2)`.
pub fn ols(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::invalid("scales", "need at least 3 usable scales"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("scales", "scales must be distinct"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

impl DimensionFit {
    /// Fit of precomputed counts over the window `lo..=hi`.
    pub fn from_counts(
        scales: Vec<f64>,
        counts: Vec<u64>,
        window: (usize, usize),
        anchor: Anchor,
    ) -> Result<Self> {
        let (lo, hi) = window;
        if scales.len() != counts.len() || hi >= scales.len() || lo > hi {
            return Err(Error::invalid("window", "outside the scale list"));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for i in lo..=hi {
            if counts[i] > 0 {
                x.push(-scales[i].ln());
                y.push((counts[i] as f64).ln());
            }
        }
        let (slope, intercept, r2) = ols(&x, &y)?;
        Ok(Self {
            scales,
            counts,
            slope,
            intercept,
            r2,
            window,
            anchor,
        })
    }

    fn empty(scales: Vec<f64>, anchor: Anchor) -> Self {
        let n = scales.len();
        Self {
            counts: vec![0; n],
            scales,
            slope: EMPTY_DIMENSION,
            intercept: 0.0,
            r2: 1.0,
            window: (0, n.saturating_sub(1)),
            anchor,
        }
    }

    /// Counts never decrease as the scale shrinks.
    pub fn counts_monotone(&self) -> bool {
        self.counts.windows(2).all(|w| w[1] >= w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("delta,count,log_inv_delta,log_count\n");
        for (d, c) in self.scales.iter().zip(&self.counts) {
            let lc = if *c > 0 {
                (*c as f64).ln()
            } else {
                f64::NEG_INFINITY
            };
            let _ = writeln!(s, "{d:e},{c},{},{lc}", -d.ln());
        }
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "label": "upper-box estimate",
            "anchor": match self.anchor { Anchor::Binary => "binary", Anchor::Ternary => "ternary" },
            "scales": self.scales,
            "counts": self.counts,
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r2,
            "window": [self.window.0, self.window.1],
        })
    }

    /// Log-log scatter with the fitted line.
    pub fn to_svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .scales
            .iter()
            .zip(&self.counts)
            .filter(|(_, c)| **c > 0)
            .map(|(d, c)| (-d.ln(), (*c as f64).ln()))
            .collect();
        let (w, h, pad) = (480.0, 360.0, 40.0);
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts
            .iter()
            .map(|p| p.1)
            .chain(xs.iter().map(|x| self.slope * x + self.intercept))
            .collect();
        let (x0, x1) = crate::num::min_max(&xs).unwrap_or((0.0, 1.0));
        let (y0, y1) = crate::num::min_max(&ys).unwrap_or((0.0, 1.0));
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
        let mut s =
            format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
        let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"steelblue\"/>",
            sx(x0),
            sy(self.slope * x0 + self.intercept),
            sx(x1),
            sy(self.slope * x1 + self.intercept)
        );
        for (x, y) in &pts {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"black\"/>",
                sx(*x),
                sy(*y)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"{pad}\" y=\"20\" font-family=\"monospace\" font-size=\"12\">slope {:.4}  r2 {:.4}</text>",
            self.slope, self.r2
        );
        s.push_str("</svg>\n");
        s
    }
}

/// Counts at every scale, regression over the whole list.
pub fn fit_dimension<T: Scalar>(
    set: &PointSet<T>,
    scales: &[T],
    anchor: Anchor,
) -> Result<DimensionFit> {
    if scales.len() < 3 {
        return Err(Error::invalid("scales", "need at least 3 scales"));
    }
    let sf: Vec<f64> = scales
        .iter()
        .map(|d| cell_side(d, anchor).to_f64_lossy() / 2.0)
        .collect();
    if set.is_empty() {
        return Ok(DimensionFit::empty(sf, anchor));
    }
    let counts = scales
        .iter()
        .map(|d| box_count(set, d, anchor))
        .collect::<Result<Vec<_>>>()?;
    let n = counts.len();
    DimensionFit::from_counts(sf, counts, (0, n - 1), anchor)
}

/// `delta = 2^-k / 2` for `k` in `lo..=hi`, so that cells have side `2^-k`.
pub fn dyadic_scales<T: Scalar>(lo: u32, hi: u32) -> Vec<T> {
    let two = T::from_i64_exact(2);
    (lo..=hi)
        .map(|k| {
            let mut s = T::one();
            for _ in 0..=k {
                s = s / two.clone();
            }
            s
        })
        .collect()
}

/// `delta = 3^-k / 2` for `k` in `lo..=hi`.
pub fn ternary_scales<T: Scalar>(lo: u32, hi: u32) -> Vec<T> {
    let (two, three) = (T::from_i64_exact(2), T::from_i64_exact(3));
    (lo..=hi)
        .map(|k| {
            let mut s = T::one() / two.clone();
            for _ in 0..k {
                s = s / three.clone();
            }
            s
        })
        .collect()
}

/// Standard middle-thirds construction at `depth`.
pub fn triadic_cantor(depth: usize) -> Result<IntervalUnion<Rational>> {
    let t = triadic_tree(depth);
    let s = select_subset(
        &t,
        &vec![2; depth],
        &Selector::Explicit(vec![vec![0, 2]; depth]),
    )?;
    Ok(IntervalUnion::from_parts(s.selected_hulls(depth)?))
}

/// Natural measure on the middle-thirds construction.
pub fn triadic_measure(depth: usize) -> Result<MassDistribution> {
    let t = triadic_tree(depth);
    let s = select_subset(
        &t,
        &vec![2; depth],
        &Selector::Explicit(vec![vec![0, 2]; depth]),
    )?;
    Ok(natural_measure(&s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBound {
    pub c: f64,
    /// `(s, sup mu(B) / diam(B)^s, certified)`.
    pub rows: Vec<(f64, f64, bool)>,
    pub certified: Option<f64>,
    pub windows_scanned: u64,
}

impl LowerBound {
    pub fn to_json(&self) -> Value {
        json!({
            "c": self.c,
            "certified_s": self.certified,
            "windows_scanned": self.windows_scanned,
            "rows": self.rows.iter().map(|(s, r, ok)| json!({"s": s, "sup_ratio": r, "certified": ok})).collect::<Vec<_>>(),
        })
    }
}

/// Default certification constant.
pub const DEFAULT_C: f64 = 4.0;

/// Largest `s` on the grid with `sup_B mu(B) / diam(B)^s <= c` over boundary-aligned windows.
pub fn hausdorff_lower_bound(
    mass: &MassDistribution,
    s_grid: &[f64],
    max_windows: Option<u64>,
    c: f64,
) -> Result<LowerBound> {
    if s_grid.iter().any(|s| !s.is_finite() || *s < 0.0) || !(c > 0.0) {
        return Err(Error::invalid("s", "need finite s >= 0 and c > 0"));
    }
    let profile = WindowProfile::new(mass, None, max_windows)?;
    let rows: Vec<(f64, f64, bool)> = s_grid
        .iter()
        .map(|&s| {
            let sup = profile
                .ratios(|d| d.powf(s))
                .into_iter()
                .fold(0.0, f64::max);
            (s, sup, sup <= c)
        })
        .collect();
    let certified = rows
        .iter()
        .filter(|r| r.2)
        .map(|r| r.0)
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |v| v.max(s))));
    Ok(LowerBound {
        c,
        rows,
        certified,
        windows_scanned: profile.scanned(),
    })
}

/// Points `(x, f(x))` at the breakpoints and at `resolution` equal steps of the domain.
pub fn graph_points<T: Scalar>(f: &GridFunction<T>, resolution: usize) -> PointSet<T> {
    let xs = f.xs();
    let (a, b) = (xs[0].to_f64_lossy(), xs[xs.len() - 1].to_f64_lossy());
    let mut pts: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| vec![x.to_f64_lossy(), f.eval(x).to_f64_lossy()])
        .collect();
    if resolution > 0 && b > a {
        for i in 0..=resolution {
            let x = a + (b - a) * i as f64 / resolution as f64;
            let xt = T::from_f64(x).expect("finite");
            pts.push(vec![x, f.eval(&xt).to_f64_lossy()]);
        }
    }
    PointSet::Cloud {
        dim: 2,
        points: pts,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndicatrixReport {
    /// `integral N(y) dy`, computed by sweeping the value axis.
    pub integral: Rational,
    pub total_variation: Rational,
    pub lip: Rational,
    pub domain: Rational,
    pub pass: bool,
    pub equality: bool,
}

impl IndicatrixReport {
    pub fn to_json(&self) -> Value {
        json!({
            "integral_n": fmt_rational(&self.integral),
            "total_variation": fmt_rational(&self.total_variation),
            "lip": fmt_rational(&self.lip),
            "domain": fmt_rational(&self.domain),
            "pass": self.pass,
            "equality": self.equality,
        })
    }
}

/// `integral N(y) dy` for a piecewise-linear `f`: on each value interval between
/// consecutive breakpoint values, `N` is the number of pieces crossing it.
pub fn indicatrix_integral(f: &GridFunction<Rational>) -> Rational {
    let mut levels: Vec<Rational> = f.ys().to_vec();
    levels.sort();
    levels.dedup();
    let pieces: Vec<(Rational, Rational)> = f
        .ys()
        .windows(2)
        .map(|w| {
            if w[0] <= w[1] {
                (w[0].clone(), w[1].clone())
            } else {
                (w[1].clone(), w[0].clone())
            }
        })
        .collect();
    levels
        .windows(2)
        .map(|w| {
            let n = pieces
                .iter()
                .filter(|(lo, hi)| *lo <= w[0] && w[1] <= *hi)
                .count();
            Rational::from_integer(n.into()) * (&w[1] - &w[0])
        })
        .sum()
}

/// Checks `integral N = TV(f) <= Lip(f) |domain|` exactly.
pub fn banach_indicatrix_check(f: &GridFunction<Rational>) -> Result<IndicatrixReport> {
    if f.interp() != Interp::Linear {
        return Err(Error::invalid("f", "must be piecewise linear"));
    }
    let integral = indicatrix_integral(f);
    let tv = f.total_variation();
    let lip = f.lip()?;
    let xs = f.xs();
    let domain = &xs[xs.len() - 1] - &xs[0];
    let bound = &lip * &domain;
    debug_assert!(integral == tv);
    Ok(IndicatrixReport {
        pass: tv <= bound && integral == tv,
        equality: tv == bound,
        integral,
        total_variation: tv,
        lip,
        domain,
    })
}

/// Whether every piece is monotone in the same direction (equality case).
pub fn is_monotone(f: &GridFunction<Rational>) -> bool {
    let s = f.ys().windows(2).map(|w| &w[1] - &w[0]).collect::<Vec<_>>();
    s.iter().all(|d| !d.is_negative()) || s.iter().all(|d| !d.is_positive())
}

/// Absolute slopes all equal (single-tooth equality case).
pub fn constant_speed(f: &GridFunction<Rational>) -> bool {
    match f.slopes() {
        Ok(s) => s.windows(2).all(|w| w[0].abs() == w[1].abs()) || s.iter().all(Zero::is_zero),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_compact_type, prescribed_dimension_cantor};
    use crate::construct::SawtoothSum;
    use crate::num::{big, int, rat};

    #[test]
    fn unit_interval_counts() {
        let u = PointSet::Intervals(IntervalUnion::interval(int(0), int(1)));
        for k in 0..10u32 {
            let d = crate::num::pow2(-(k as i64) - 1);
            assert_eq!(box_count(&u, &d, Anchor::Binary).unwrap(), 1 << k);
        }
        let fit = fit_dimension(&u, &dyadic_scales::<Rational>(3, 10), Anchor::Binary).unwrap();
        assert_eq!(fit.slope, 1.0);
        assert!(box_count(&u, &int(0), Anchor::Binary).is_err());
        assert_eq!(
            box_count(&PointSet::<Rational>::Empty, &rat(1, 2), Anchor::Binary).unwrap(),
            0
        );
    }

    #[test]
    fn triadic_counts() {
        for k in 1..=8usize {
            let c = PointSet::Intervals(triadic_cantor(k).unwrap());
            let d = Rational::new(1.into(), (2 * 3i64.pow(k as u32)).into());
            assert_eq!(box_count(&c, &d, Anchor::Ternary).unwrap(), 1 << k);
            let cf = PointSet::Intervals(IntervalUnion::from_parts(
                triadic_cantor(k)
                    .unwrap()
                    .parts()
                    .iter()
                    .map(|(a, b)| (crate::num::ratio_to_f64(a), crate::num::ratio_to_f64(b)))
                    .collect(),
            ));
            assert_eq!(
                box_count(&cf, &crate::num::ratio_to_f64(&d), Anchor::Ternary).unwrap(),
                1 << k
            );
        }
    }

    #[test]
    fn triadic_fit() {
        let c = PointSet::Intervals(triadic_cantor(12).unwrap());
        let fit = fit_dimension(&c, &ternary_scales::<Rational>(3, 9), Anchor::Ternary).unwrap();
        assert!((fit.slope - 2f64.ln() / 3f64.ln()).abs() < 0.03);
        assert!(fit.counts_monotone());
    }

    #[test]
    fn prescribed_fit() {
        let t = prescribed_dimension_cantor(0.5f64, 10).unwrap();
        let set = PointSet::Intervals(IntervalUnion::from_parts(t.level_hulls(10)));
        let fit = fit_dimension(&set, &dyadic_scales::<f64>(3, 16), Anchor::Binary).unwrap();
        assert!((fit.slope - 0.5).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn lower_bounds() {
        let m = triadic_measure(7).unwrap();
        let target = 2f64.ln() / 3f64.ln() - 0.01;
        let lb = hausdorff_lower_bound(&m, &[0.0, 0.3, target], None, DEFAULT_C).unwrap();
        assert!(lb.rows.iter().all(|r| r.2));
        assert_eq!(lb.certified, Some(target));
        let full = build_compact_type(&vec![big(2); 8], 8).unwrap();
        let fm = natural_measure(&select_subset(&full, &[2; 8], &Selector::First).unwrap());
        let lb = hausdorff_lower_bound(&fm, &[0.5, 0.9, 0.99], None, DEFAULT_C).unwrap();
        assert_eq!(lb.certified, Some(0.99));
    }

    #[test]
    fn graph_clouds() {
        let scales = dyadic_scales::<f64>(3, 10);
        for f in [
            GridFunction::<f64>::identity(),
            GridFunction::linear(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap(),
        ] {
            let fit = fit_dimension(&graph_points(&f, 1 << 12), &scales, Anchor::Binary).unwrap();
            assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
        }
    }

    #[test]
    fn indicatrix_examples() {
        let id = GridFunction::<Rational>::identity();
        let r = banach_indicatrix_check(&id).unwrap();
        assert!(r.pass && r.equality);
        assert_eq!(r.total_variation, int(1));
        let tooth = SawtoothSum::new(&[big(4)]).unwrap().to_grid(1).unwrap();
        let r = banach_indicatrix_check(&tooth).unwrap();
        assert_eq!((r.total_variation.clone(), r.lip.clone()), (int(4), int(4)));
        assert!(r.pass && r.equality);
        let c = GridFunction::linear(vec![int(0), int(1)], vec![int(3), int(3)]).unwrap();
        let r = banach_indicatrix_check(&c).unwrap();
        assert!(r.pass && r.equality && r.lip.is_zero());
        let step = GridFunction::new(vec![int(0), int(1)], vec![int(0), int(1)], Interp::Constant)
            .unwrap();
        assert!(banach_indicatrix_check(&step).is_err());
    }

    #[test]
    fn fit_outputs() {
        let u = PointSet::Intervals(IntervalUnion::interval(int(0), int(1)));
        let fit = fit_dimension(&u, &dyadic_scales::<Rational>(1, 4), Anchor::Binary).unwrap();
        assert_eq!(fit.to_csv().lines().count(), 5);
        assert!(fit.to_svg().starts_with("<svg"));
        assert_eq!(fit.to_json()["label"], "upper-box estimate");
        let e = fit_dimension(
            &PointSet::<Rational>::Empty,
            &dyadic_scales::<Rational>(1, 4),
            Anchor::Binary,
        )
        .unwrap();
        assert_eq!(e.slope, EMPTY_DIMENSION);
    }
}
