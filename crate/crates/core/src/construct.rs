//! Deterministic counterexample functions: moduli, the cone function, the
//! staircase with its `C_n` / `Gamma_n` sets, and the sawtooth sum with its
//! witness level-set tree.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, Interp, IntervalUnion};
use crate::num::{
    f64_to_ratio, floor_rat, fmt_rational, pow2, ratio_to_f64, ubig_to_rat, Rational,
};
use crate::par;
use crate::rng::{ns, CounterRng};

/// Strictly increasing `h` on `[0, 1]` with `h(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Modulus {
    Linear { c: Rational },
    Hoelder { c: Rational, alpha: f64 },
}

/// Families with a uniform oscillation bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Lipschitz(Rational),
    Hoelder(Rational, f64),
}

/// `h = 2L t` (resp. `2c t^alpha`), which strictly dominates the family's oscillation.
pub fn modulus_for_family(family: &Family) -> Result<Modulus> {
    let two = Rational::from_integer(2.into());
    match family {
        Family::Lipschitz(l) => Modulus::linear(l * two),
        Family::Hoelder(c, a) => Modulus::hoelder(c * two, *a),
    }
}

impl Modulus {
    pub fn linear(c: Rational) -> Result<Self> {
        if !c.is_positive() {
            return Err(Error::invalid("c", "must be positive"));
        }
        Ok(Modulus::Linear { c })
    }

    pub fn hoelder(c: Rational, alpha: f64) -> Result<Self> {
        if !c.is_positive() || !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha", "need c > 0 and 0 < alpha <= 1"));
        }
        Ok(Modulus::Hoelder { c, alpha })
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        match self {
            Modulus::Linear { c } => ratio_to_f64(c) * t,
            Modulus::Hoelder { c, alpha } => ratio_to_f64(c) * t.max(0.0).powf(*alpha),
        }
    }

    /// Exact value when the family allows it.
    pub fn eval_exact(&self, t: &Rational) -> Option<Rational> {
        match self {
            Modulus::Linear { c } => Some(c * t),
            Modulus::Hoelder { c, alpha } if *alpha == 1.0 => Some(c * t),
            Modulus::Hoelder { .. } => None,
        }
    }

    /// Exact value, or the nearest double converted exactly.
    pub fn eval_rational(&self, t: &Rational) -> Rational {
        self.eval_exact(t)
            .unwrap_or_else(|| f64_to_ratio(self.eval_f64(ratio_to_f64(t))).expect("finite"))
    }

    /// Closed-form inverse.
    pub fn inverse_f64(&self, v: f64) -> f64 {
        match self {
            Modulus::Linear { c } => v / ratio_to_f64(c),
            Modulus::Hoelder { c, alpha } => (v / ratio_to_f64(c)).powf(1.0 / alpha),
        }
    }

    pub fn inverse_exact(&self, v: &Rational) -> Option<Rational> {
        match self {
            Modulus::Linear { c } => Some(v / c),
            Modulus::Hoelder { c, alpha } if *alpha == 1.0 => Some(v / c),
            Modulus::Hoelder { .. } => None,
        }
    }

    /// Inverse by bisection on `[0, hi]`.
    pub fn inverse_bisect(&self, v: f64, hi: f64, iters: u32) -> f64 {
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..iters {
            let mid = 0.5 * (lo + hi);
            if self.eval_f64(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn to_json(&self) -> Value {
        match self {
            Modulus::Linear { c } => json!({"family": "linear", "c": fmt_rational(c)}),
            Modulus::Hoelder { c, alpha } => {
                json!({"family": "hoelder", "c": fmt_rational(c), "alpha": alpha})
            }
        }
    }
}

/// `g(x) = y0 + h(|x - x0|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cone {
    pub x0: Rational,
    pub y0: Rational,
    pub h: Modulus,
}

pub const CONE_GRID: i64 = 4096;

pub fn cone_function(x0: &Rational, y0: &Rational, h: &Modulus) -> Cone {
    Cone {
        x0: x0.clone(),
        y0: y0.clone(),
        h: h.clone(),
    }
}

impl Cone {
    pub fn eval_rational(&self, x: &Rational) -> Rational {
        &self.y0 + self.h.eval_rational(&(x - &self.x0).abs())
    }

    /// Grid points `i / 4096` together with `x0`.
    pub fn grid_points(&self) -> Vec<Rational> {
        let mut xs: Vec<Rational> = (0..=CONE_GRID)
            .map(|i| Rational::new(i.into(), CONE_GRID.into()))
            .collect();
        if !xs.contains(&self.x0) && self.x0 >= Rational::zero() && self.x0 <= Rational::one() {
            xs.push(self.x0.clone());
            xs.sort();
        }
        xs
    }

    /// Piecewise-linear interpolant on the grid (exact at grid points).
    pub fn to_grid(&self) -> GridFunction<Rational> {
        let xs = self.grid_points();
        let ys = xs.iter().map(|x| self.eval_rational(x)).collect();
        GridFunction::linear(xs, ys).expect("sorted grid")
    }
}

/// Seeded piecewise-linear `f` on `breaks` equal pieces with slopes `lip * k / 64`,
/// `|k| <= 64`, shifted so that `f(x0) = y0`.
pub fn random_lipschitz_pl(
    lip: &Rational,
    breaks: usize,
    x0: &Rational,
    y0: &Rational,
    seed: u64,
    index: u64,
) -> GridFunction<Rational> {
    let mut r = CounterRng::new(seed).stream(CounterRng::stream_id(ns::SAMPLER, 0, index));
    let n = breaks.max(1);
    let xs: Vec<Rational> = (0..=n)
        .map(|i| Rational::new(i.into(), (n as i64).into()))
        .collect();
    let mut ys = vec![Rational::zero()];
    let step = Rational::new(1.into(), (n as i64).into());
    for _ in 0..n {
        let k: i64 = r.gen_range(-64..=64);
        let s = lip * Rational::new(k.into(), 64.into());
        let next = ys.last().expect("non-empty") + s * &step;
        ys.push(next);
    }
    let f = GridFunction::linear(xs, ys).expect("sorted grid");
    let shift = y0 - f.eval(x0);
    f.map_values(|v| v + &shift)
}

/// `alpha_1 .. alpha_N` with `alpha_0 = 1/2` and `alpha_{n+1} <= alpha_n / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaircaseConfig {
    alpha: Vec<Rational>,
}

impl StaircaseConfig {
    pub fn new(alpha: Vec<Rational>) -> Result<Self> {
        let mut prev = Rational::new(1.into(), 2.into());
        for (n, a) in alpha.iter().enumerate() {
            if !a.is_positive() {
                return Err(Error::invalid(
                    "alpha",
                    format!("alpha_{} must be positive", n + 1),
                ));
            }
            if a * Rational::from_integer(2.into()) > prev {
                return Err(Error::invalid(
                    "alpha",
                    format!("halving fails at alpha_{}", n + 1),
                ));
            }
            prev = a.clone();
        }
        Ok(Self { alpha })
    }

    /// `alpha_k = 2^-(k+1)` for `k = 1..=depth`.
    pub fn geometric(depth: usize) -> Self {
        Self {
            alpha: (1..=depth).map(|k| pow2(-(k as i64 + 1))).collect(),
        }
    }

    pub fn depth(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self, k: usize) -> &Rational {
        &self.alpha[k - 1]
    }

    pub fn alphas(&self) -> &[Rational] {
        &self.alpha
    }

    /// `z = 1/2 + sum k_i alpha_i` for signs `k`.
    pub fn z(&self, k: &[i8]) -> Rational {
        let mut z = Rational::new(1.into(), 2.into());
        for (i, s) in k.iter().enumerate() {
            if *s > 0 {
                z += &self.alpha[i];
            } else {
                z -= &self.alpha[i];
            }
        }
        z
    }

    /// `g(z) = 1/2 + sum k_i 2^-(i+1)`.
    pub fn g_at(k: &[i8]) -> Rational {
        let mut v = Rational::new(1.into(), 2.into());
        for (i, s) in k.iter().enumerate() {
            let t = pow2(-(i as i64 + 2));
            if *s > 0 {
                v += t;
            } else {
                v -= t;
            }
        }
        v
    }
}

/// Signs of the `i`-th (1-based) element of `{-1, 1}^n` in lexicographic order.
pub fn phi_signs(i: u64, n: usize) -> Vec<i8> {
    (0..n)
        .map(|b| {
            if ((i - 1) >> (n - 1 - b)) & 1 == 1 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// The truncated staircase: `g(x) = max{ g(z) : z in Z_N, z <= x }`, `g(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Staircase {
    cfg: StaircaseConfig,
}

pub fn staircase_g(cfg: &StaircaseConfig) -> Staircase {
    Staircase { cfg: cfg.clone() }
}

impl Staircase {
    pub fn config(&self) -> &StaircaseConfig {
        &self.cfg
    }

    /// Largest truncated point `z <= x` found by descending the sign tree.
    pub fn floor_point(&self, x: &Rational) -> Option<Vec<i8>> {
        let mut best = None;
        let mut k: Vec<i8> = Vec::new();
        loop {
            let z = self.cfg.z(&k);
            let go_right = *x >= z;
            if go_right {
                best = Some(k.clone());
            }
            if k.len() == self.cfg.depth() {
                break;
            }
            k.push(if go_right { 1 } else { -1 });
        }
        best
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        if x.is_negative() {
            return Rational::zero();
        }
        match self.floor_point(x) {
            Some(k) => StaircaseConfig::g_at(&k),
            None => Rational::zero(),
        }
    }

    /// All truncated points `(z, g(z))` in increasing order, starting with `(0, 0)`.
    pub fn points(&self) -> Vec<(Rational, Rational)> {
        let mut out = vec![(Rational::zero(), Rational::zero())];
        let n = self.cfg.depth();
        let mut all: Vec<Vec<i8>> = vec![Vec::new()];
        for level in 1..=n {
            for i in 1..=(1u64 << level) {
                all.push(phi_signs(i, level));
            }
        }
        let mut pts: Vec<(Rational, Rational)> = all
            .iter()
            .map(|k| (self.cfg.z(k), StaircaseConfig::g_at(k)))
            .collect();
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        out.extend(pts);
        out
    }

    /// Step function on the truncated points.
    pub fn to_grid(&self) -> GridFunction<Rational> {
        let (xs, ys): (Vec<_>, Vec<_>) = self.points().into_iter().unzip();
        GridFunction::new(xs, ys, Interp::Constant).expect("distinct sorted points")
    }

    /// Value at the largest truncated point: `1 - 2^-(N+1)` rather than 1.
    pub fn top_value(&self) -> Rational {
        Rational::one() - pow2(-(self.cfg.depth() as i64 + 1))
    }

    /// Diameter of the truncated points whose value lies in the open interval `((i-1)/2^n, i/2^n)`.
    pub fn preimage_diameter(&self, n: usize, i: u64) -> Option<Rational> {
        let lo = Rational::from_integer((i - 1).into()) * pow2(-(n as i64));
        let hi = Rational::from_integer(i.into()) * pow2(-(n as i64));
        let zs: Vec<Rational> = self
            .points()
            .into_iter()
            .filter(|(_, g)| *g > lo && *g < hi)
            .map(|(z, _)| z)
            .collect();
        Some(zs.last()? - zs.first()?)
    }
}

/// One level of the `C_n` / `Gamma_n` construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CGammaLevel {
    pub n: usize,
    pub c: IntervalUnion<Rational>,
    /// `(z_{phi(i,n)}, [(i-1)/2^n, i/2^n] ∩ C_n)` for `i = 1..2^n`.
    pub gamma: Vec<(Rational, IntervalUnion<Rational>)>,
}

impl CGammaLevel {
    pub fn empty_segments(&self) -> usize {
        self.gamma.iter().filter(|(_, j)| j.is_empty()).count()
    }
}

fn next_c_gamma(
    prev: &IntervalUnion<Rational>,
    cfg: &StaircaseConfig,
    h: &Modulus,
    n1: usize,
) -> Result<CGammaLevel> {
    let r = h.eval_rational(&(cfg.alpha(n1) * Rational::from_integer(4.into())));
    if r >= pow2(-(n1 as i64 + 1)) {
        return Err(Error::Precondition(format!(
            "h(4 alpha_{n1}) >= 2^-{}: C_{n1} degenerates, shrink alpha",
            n1 + 1
        )));
    }
    let step = pow2(-(n1 as i64));
    let mut c = prev.clone();
    for i in 0..=(1u64 << n1) {
        let centre = Rational::from_integer(i.into()) * &step;
        c = c.remove_open(&(&centre - &r), &(&centre + &r));
    }
    let gamma = (1..=(1u64 << n1))
        .map(|i| {
            let z = cfg.z(&phi_signs(i, n1));
            let lo = Rational::from_integer((i - 1).into()) * &step;
            let hi = Rational::from_integer(i.into()) * &step;
            (z, c.intersect_interval(&lo, &hi))
        })
        .collect();
    Ok(CGammaLevel { n: n1, c, gamma })
}

/// `C_0 = [0,1]`, `Gamma_0 = {1/2} x [0,1]`, then the recursive removals up to `depth`.
pub fn c_gamma_sets(cfg: &StaircaseConfig, h: &Modulus, depth: usize) -> Result<Vec<CGammaLevel>> {
    if depth > cfg.depth() {
        return Err(Error::invalid("depth", "exceeds the alpha schedule"));
    }
    let unit = IntervalUnion::interval(Rational::zero(), Rational::one());
    let mut out = vec![CGammaLevel {
        n: 0,
        c: unit.clone(),
        gamma: vec![(Rational::new(1.into(), 2.into()), unit)],
    }];
    for n1 in 1..=depth {
        let next = next_c_gamma(&out[n1 - 1].c, cfg, h, n1)?;
        out.push(next);
    }
    Ok(out)
}

/// Whether `f(z) ∈ J` for some segment `{z} x J`.
pub fn gamma_membership(
    f: &GridFunction<Rational>,
    gamma: &[(Rational, IntervalUnion<Rational>)],
) -> bool {
    gamma.iter().any(|(z, j)| j.contains(&f.eval(z)))
}

/// Seeded source of test functions.
pub trait FunctionSampler: Sync {
    fn sample(&self, seed: u64, index: u64) -> GridFunction<Rational>;
    /// Whether `f` respects the modulus `h` (spot check).
    fn respects(&self, f: &GridFunction<Rational>, h: &Modulus) -> bool {
        match f.lip() {
            Ok(l) => match h {
                Modulus::Linear { c } => l < *c,
                Modulus::Hoelder { .. } => {
                    let xs = f.xs();
                    xs.windows(2).all(|w| {
                        let dx = ratio_to_f64(&(&w[1] - &w[0]));
                        ratio_to_f64(&(f.eval(&w[1]) - f.eval(&w[0])).abs()) < h.eval_f64(dx)
                    })
                }
            },
            Err(_) => false,
        }
    }
}

/// Constants uniform on `[lo, hi]` at resolution `2^-32`.
#[derive(Debug, Clone)]
pub struct ConstantSampler {
    pub lo: Rational,
    pub hi: Rational,
}

impl FunctionSampler for ConstantSampler {
    fn sample(&self, seed: u64, index: u64) -> GridFunction<Rational> {
        let mut r = CounterRng::new(seed).stream(CounterRng::stream_id(ns::SAMPLER, 1, index));
        let k: u64 = r.gen_range(0..=(1u64 << 32));
        let c = &self.lo + (&self.hi - &self.lo) * Rational::from_integer(k.into()) * pow2(-32);
        GridFunction::constant(c)
    }
}

/// Piecewise-linear functions with slopes in `lip * [-1, 1]` and `f(0)` uniform on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct LipschitzSampler {
    pub lip: Rational,
    pub breaks: usize,
}

impl FunctionSampler for LipschitzSampler {
    fn sample(&self, seed: u64, index: u64) -> GridFunction<Rational> {
        let mut r = CounterRng::new(seed).stream(CounterRng::stream_id(ns::SAMPLER, 2, index));
        let k: u64 = r.gen_range(0..=(1u64 << 32));
        let y0 = Rational::from_integer(k.into()) * pow2(-32);
        random_lipschitz_pl(&self.lip, self.breaks, &Rational::zero(), &y0, seed, index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaLevel {
    pub n: usize,
    pub alpha: Rational,
    pub halvings: u32,
    /// Fraction of samples in `pi(Gamma_{n-1})` lost at this level.
    pub loss: f64,
    pub sigma: f64,
    /// Fraction of samples in `pi(Gamma_n)`.
    pub retained: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaChoice {
    pub config: StaircaseConfig,
    pub levels: Vec<AlphaLevel>,
    pub trials: u64,
}

pub const MAX_HALVINGS: u32 = 60;

/// Halves `alpha_{n+1}` from `alpha_n / 2` until the empirical loss plus two
/// standard errors is at most `2^-(n+2)`.
pub fn choose_alpha_mc(
    sampler: &dyn FunctionSampler,
    h: &Modulus,
    depth: usize,
    trials: u64,
    seed: u64,
) -> Result<AlphaChoice> {
    if trials == 0 {
        return Err(Error::invalid("trials", "need at least one trial"));
    }
    let samples: Vec<GridFunction<Rational>> =
        par::map_range(trials as usize, |t| sampler.sample(seed, t as u64));
    if let Some(i) = samples.iter().position(|f| !sampler.respects(f, h)) {
        return Err(Error::Precondition(format!(
            "sample {i} violates the modulus bound"
        )));
    }
    let mut alphas: Vec<Rational> = Vec::new();
    let mut levels = Vec::new();
    let unit = IntervalUnion::interval(Rational::zero(), Rational::one());
    let mut c_prev = unit.clone();
    let mut member: Vec<bool> = samples
        .iter()
        .map(|f| gamma_membership(f, &[(Rational::new(1.into(), 2.into()), unit.clone())]))
        .collect();
    for n in 0..depth {
        let prev_alpha = alphas
            .last()
            .cloned()
            .unwrap_or_else(|| Rational::new(1.into(), 2.into()));
        let mut alpha = prev_alpha / Rational::from_integer(2.into());
        let mut accepted = None;
        for halvings in 0..MAX_HALVINGS {
            let mut trial_alphas = alphas.clone();
            trial_alphas.push(alpha.clone());
            let cfg = StaircaseConfig {
                alpha: trial_alphas,
            };
            if let Ok(level) = next_c_gamma(&c_prev, &cfg, h, n + 1) {
                let now: Vec<bool> =
                    par::map_slice(&samples, |f| gamma_membership(f, &level.gamma));
                let lost = member.iter().zip(&now).filter(|(a, b)| **a && !**b).count();
                let d = lost as f64 / trials as f64;
                let sigma = (d * (1.0 - d) / trials as f64).sqrt();
                if d + 2.0 * sigma <= (-(n as f64 + 2.0)).exp2() {
                    let kept: Vec<bool> = member.iter().zip(&now).map(|(a, b)| *a && *b).collect();
                    let retained = kept.iter().filter(|k| **k).count() as f64 / trials as f64;
                    accepted = Some((
                        cfg,
                        level,
                        kept,
                        AlphaLevel {
                            n: n + 1,
                            alpha: alpha.clone(),
                            halvings,
                            loss: d,
                            sigma,
                            retained,
                        },
                    ));
                    break;
                }
            }
            alpha /= Rational::from_integer(2.into());
        }
        let (cfg, level, kept, rec) = accepted.ok_or_else(|| {
            Error::Precondition(format!(
                "retention not met at level {} within {MAX_HALVINGS} halvings",
                n + 1
            ))
        })?;
        alphas = cfg.alpha;
        c_prev = level.c;
        member = kept;
        levels.push(rec);
    }
    Ok(AlphaChoice {
        config: StaircaseConfig { alpha: alphas },
        levels,
        trials,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedZeroReport {
    pub near_zero: usize,
    pub anchors: usize,
    /// Pairs `(x, z)` of near-zero grid points at a forbidden distance.
    pub violations: Vec<(Rational, Rational)>,
}

/// Grid check of the annulus argument on `{ i / grid }`.
pub fn verify_isolated_zero(
    f: &GridFunction<Rational>,
    g: &Staircase,
    c_depth: &IntervalUnion<Rational>,
    grid: u64,
    tol: &Rational,
) -> Result<IsolatedZeroReport> {
    let cfg = g.config();
    if cfg.depth() == 0 || grid == 0 {
        return Err(Error::invalid("grid", "need a non-empty schedule and grid"));
    }
    let four = Rational::from_integer(4.into());
    let inner = cfg.alpha(cfg.depth()) * &four;
    let outer = cfg.alpha(1) * &four;
    let xs: Vec<Rational> = (0..=grid)
        .map(|i| Rational::new(i.into(), grid.into()))
        .collect();
    let flags: Vec<(bool, bool)> = par::map_slice(&xs, |x| {
        let gx = g.eval(x);
        let near = (f.eval(x) - &gx).abs() <= *tol;
        (near, near && c_depth.contains(&gx))
    });
    let near: Vec<&Rational> = xs
        .iter()
        .zip(&flags)
        .filter(|(_, f)| f.0)
        .map(|(x, _)| x)
        .collect();
    let mut violations = Vec::new();
    let mut anchors = 0;
    for (x, fl) in xs.iter().zip(&flags) {
        if !fl.1 {
            continue;
        }
        anchors += 1;
        for z in &near {
            let d = (x - *z).abs();
            if d > inner && d <= outer {
                violations.push((x.clone(), (*z).clone()));
            }
        }
    }
    Ok(IsolatedZeroReport {
        near_zero: near.len(),
        anchors,
        violations,
    })
}

/// Per-level schedule report for the sawtooth construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SawtoothLevel {
    pub n: usize,
    pub a: BigUint,
    pub b: BigUint,
    /// `a_n >= 1 / h^-1(2^-(n+2))`.
    pub modulus_ok: bool,
    /// `a_n >= 2^(5 n^2)`.
    pub growth_ok: bool,
    /// `b_n = ceil(a_n / 32)`.
    pub b_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SawtoothConfig {
    pub h: Modulus,
    pub paper_exact: bool,
    pub levels: Vec<SawtoothLevel>,
}

fn modulus_floor(h: &Modulus, n: usize) -> BigUint {
    let v = pow2(-(n as i64 + 2));
    let inv = match h.inverse_exact(&v) {
        Some(x) => Rational::one() / x,
        None => f64_to_ratio(1.0 / h.inverse_f64(ratio_to_f64(&v))).expect("finite"),
    };
    let c = -floor_rat(&(-inv));
    c.to_biguint().unwrap_or_default()
}

fn sawtooth_level(h: &Modulus, n: usize, a: BigUint, b: BigUint) -> SawtoothLevel {
    let growth = BigUint::one() << (5 * n * n);
    let b_full = crate::num::ceil_div(&a, &BigUint::from(32u32));
    SawtoothLevel {
        n,
        modulus_ok: a >= modulus_floor(h, n),
        growth_ok: a >= growth,
        b_ok: b == b_full,
        a,
        b,
    }
}

/// `a_n = max(ceil(1/h^-1(2^-(n+2))), 2^(5n^2))`, `b_n = ceil(a_n / 32)`.
pub fn sawtooth_config_full(h: &Modulus, depth: usize) -> SawtoothConfig {
    let levels = (1..=depth)
        .map(|n| {
            let a = modulus_floor(h, n).max(BigUint::one() << (5 * n * n));
            let b = crate::num::ceil_div(&a, &BigUint::from(32u32));
            sawtooth_level(h, n, a, b)
        })
        .collect();
    SawtoothConfig {
        h: h.clone(),
        paper_exact: true,
        levels,
    }
}

/// User schedule; the report records which inequalities fail.
pub fn sawtooth_config_desk(h: &Modulus, a: &[BigUint], b: &[BigUint]) -> Result<SawtoothConfig> {
    if a.len() != b.len() {
        return Err(Error::invalid("b", "schedule lengths differ"));
    }
    if a.iter()
        .zip(b)
        .any(|(x, y)| x.is_zero() || y.is_zero() || y > x)
    {
        return Err(Error::invalid("b", "need 1 <= b_n <= a_n"));
    }
    let levels = a
        .iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| sawtooth_level(h, i + 1, x.clone(), y.clone()))
        .collect();
    Ok(SawtoothConfig {
        h: h.clone(),
        paper_exact: false,
        levels,
    })
}

impl SawtoothConfig {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn a(&self) -> Vec<BigUint> {
        self.levels.iter().map(|l| l.a.clone()).collect()
    }

    pub fn b(&self) -> Vec<BigUint> {
        self.levels.iter().map(|l| l.b.clone()).collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": "construct/1",
            "h": self.h.to_json(),
            "paper_exact": self.paper_exact,
            "levels": self.levels.iter().map(|l| json!({
                "n": l.n, "a": l.a.to_string(), "b": l.b.to_string(),
                "modulus_ok": l.modulus_ok, "growth_ok": l.growth_ok, "b_ok": l.b_ok,
            })).collect::<Vec<_>>(),
        })
    }
}

/// `G_n = g_1 + .. + g_n`, `g_i((j + t) p_i) = (-1)^j 2^-i (1 - 2t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SawtoothSum {
    a: Vec<BigUint>,
    /// `p[0] = 1`, `p[i] = 1 / (a_1 .. a_i)`.
    p: Vec<Rational>,
    /// `prod[i] = a_1 .. a_i`.
    prod: Vec<BigInt>,
}

pub fn sawtooth_g(cfg: &SawtoothConfig) -> SawtoothSum {
    SawtoothSum::new(&cfg.a()).expect("validated schedule")
}

/// Breakpoint limit for explicit grids.
pub const GRID_LIMIT: u64 = 1 << 20;

impl SawtoothSum {
    pub fn new(a: &[BigUint]) -> Result<Self> {
        if a.iter().any(Zero::is_zero) {
            return Err(Error::invalid("a", "branching must be >= 1"));
        }
        let mut p = vec![Rational::one()];
        let mut prod = vec![BigInt::one()];
        for ai in a {
            let next = p.last().expect("non-empty") / ubig_to_rat(ai);
            p.push(next);
            let next = prod.last().expect("non-empty") * BigInt::from(ai.clone());
            prod.push(next);
        }
        Ok(Self { a: a.to_vec(), p, prod })
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }

    pub fn pitch(&self, i: usize) -> &Rational {
        &self.p[i]
    }

    pub fn term(&self, i: usize, x: &Rational) -> Rational {
        let q = x / &self.p[i];
        let j = floor_rat(&q);
        let frac = q - Rational::from_integer(j.clone());
        let amp = pow2(-(i as i64));
        let v = amp * (Rational::one() - frac * Rational::from_integer(2.into()));
        if j.is_even() {
            v
        } else {
            -v
        }
    }

    pub fn partial(&self, n: usize, x: &Rational) -> Rational {
        let den = x.denom();
        let mut num = BigInt::zero();
        for i in 1..=n {
            let (j, r) = (x.numer() * &self.prod[i]).div_mod_floor(den);
            let mut t = den - (r << 1usize);
            t <<= n - i;
            if j.is_odd() {
                num -= t;
            } else {
                num += t;
            }
        }
        Rational::new(num, den << n)
    }

    /// `G_n(k p_level)` for `n <= level`, in integer arithmetic with one final reduction.
    pub fn partial_at_index(&self, n: usize, level: usize, k: &BigInt) -> Rational {
        debug_assert!(n <= level);
        let top = &self.prod[level];
        let mut num = BigInt::zero();
        for i in 1..=n {
            let block = top / &self.prod[i];
            let (j, r) = k.div_mod_floor(&block);
            let mut t = (&block - (r << 1usize)) * &self.prod[i];
            t <<= n - i;
            if j.is_odd() {
                num -= t;
            } else {
                num += t;
            }
        }
        Rational::new(num, top << n)
    }

    /// `Lip(g_i) = 2^(1-i) / p_i`.
    pub fn lip_term(&self, i: usize) -> Rational {
        pow2(1 - i as i64) / &self.p[i]
    }

    /// `G_n` as an explicit grid function (breakpoints at multiples of `p_n`).
    pub fn to_grid(&self, n: usize) -> Result<GridFunction<Rational>> {
        let count = (Rational::one() / &self.p[n]).to_integer();
        let c = count
            .to_u64()
            .filter(|&c| c <= GRID_LIMIT)
            .ok_or_else(|| Error::TooLarge(format!("{count} pieces")))?;
        let xs: Vec<Rational> = (0..=c)
            .map(|i| Rational::from_integer(i.into()) * &self.p[n])
            .collect();
        let ys = par::map_slice(&xs, |x| self.partial(n, x));
        GridFunction::linear(xs, ys)
    }

    /// Exact range oracle for `f + G_n`.
    pub fn range_oracle<'a>(
        &'a self,
        n: usize,
        f: Option<&'a GridFunction<Rational>>,
    ) -> RangeOracle<'a> {
        RangeOracle {
            saw: self,
            n,
            f,
            memo: HashMap::new(),
        }
    }
}

/// Exact min and max of `f + G_n` over intervals, memoizing full-cell tail extremes.
pub struct RangeOracle<'a> {
    saw: &'a SawtoothSum,
    n: usize,
    f: Option<&'a GridFunction<Rational>>,
    memo: HashMap<(usize, bool, Rational), (Rational, Rational)>,
}

fn minmax(a: (Rational, Rational), b: (Rational, Rational)) -> (Rational, Rational) {
    (a.0.min(b.0), a.1.max(b.1))
}

impl RangeOracle<'_> {
    /// Range of `beta t + T(t)` for `t ∈ [t0, t1] ⊂ [0, p_l]`, where `T` is the tail
    /// `g_{l+1} + .. + g_n` on a level-`l` cell whose global index has parity `odd`.
    fn tail(
        &mut self,
        l: usize,
        odd: bool,
        t0: &Rational,
        t1: &Rational,
        beta: &Rational,
    ) -> (Rational, Rational) {
        if l == self.n {
            let (u, v) = (beta * t0, beta * t1);
            return if u <= v { (u, v) } else { (v, u) };
        }
        let p = self.saw.p[l].clone();
        let full = t0.is_zero() && *t1 == p;
        if full {
            if let Some(r) = self.memo.get(&(l, odd, beta.clone())) {
                return r.clone();
            }
        }
        let sub = self.saw.p[l + 1].clone();
        let a_odd = self.saw.a[l].is_odd();
        let amp = pow2(-(l as i64 + 1));
        let slope_mag = &amp * Rational::from_integer(2.into()) / &sub;
        // subcell k has parity (odd * a + k) mod 2; its g_{l+1} starts at (+-)amp with slope (-+)slope_mag
        let parity = |k: &BigInt| -> bool { (odd && a_odd) ^ k.is_odd() };
        let start_val = |q: bool| if q { -amp.clone() } else { amp.clone() };
        let slope = |q: bool| {
            if q {
                slope_mag.clone()
            } else {
                -slope_mag.clone()
            }
        };
        let k0 = floor_rat(&(t0 / &sub));
        let mut k1 = floor_rat(&(t1 / &sub));
        if Rational::from_integer(k1.clone()) * &sub == *t1 && k1 > k0 {
            k1 -= 1;
        }
        let kr = |k: &BigInt| Rational::from_integer(k.clone());
        let piece =
            |this: &mut Self, k: &BigInt, u0: &Rational, u1: &Rational| -> (Rational, Rational) {
                let q = parity(k);
                let base = beta * kr(k) * &sub + start_val(q);
                let (lo, hi) = this.tail(l + 1, q, u0, u1, &(beta + slope(q)));
                (lo + &base, hi + &base)
            };
        let result = if k0 == k1 {
            let off = kr(&k0) * &sub;
            piece(self, &k0, &(t0 - &off), &(t1 - &off))
        } else {
            let off0 = kr(&k0) * &sub;
            let off1 = kr(&k1) * &sub;
            let mut r = piece(self, &k0, &(t0 - &off0), &sub);
            r = minmax(r, piece(self, &k1, &Rational::zero(), &(t1 - &off1)));
            let first = &k0 + BigInt::one();
            let last = &k1 - BigInt::one();
            if first <= last {
                for start in [first.clone(), &first + BigInt::one()] {
                    if start > last {
                        continue;
                    }
                    let q = parity(&start);
                    let mut end = last.clone();
                    if parity(&end) != q {
                        end -= 1;
                    }
                    let (lo, hi) = self.tail(l + 1, q, &Rational::zero(), &sub, &(beta + slope(q)));
                    for k in [&start, &end] {
                        let base = beta * kr(k) * &sub + start_val(q);
                        r = minmax(r, (&lo + &base, &hi + &base));
                    }
                }
            }
            r
        };
        if full {
            self.memo.insert((l, odd, beta.clone()), result.clone());
        }
        result
    }

    /// Exact `(min, max)` of `f + G_n` over `[x0, x1] ⊂ [0, 1]`.
    pub fn range(&mut self, x0: &Rational, x1: &Rational) -> (Rational, Rational) {
        let mut cuts = vec![x0.clone()];
        if let Some(f) = self.f {
            cuts.extend(f.xs().iter().filter(|x| *x > x0 && *x < x1).cloned());
        }
        cuts.push(x1.clone());
        let mut out: Option<(Rational, Rational)> = None;
        for w in cuts.windows(2) {
            let (fa, slope) = match self.f {
                None => (Rational::zero(), Rational::zero()),
                Some(f) => {
                    let fa = f.eval(&w[0]);
                    let fb = f.eval(&w[1]);
                    let s = if w[1] > w[0] {
                        (&fb - &fa) / (&w[1] - &w[0])
                    } else {
                        Rational::zero()
                    };
                    (fa, s)
                }
            };
            let shift = fa - &slope * &w[0];
            let (lo, hi) = self.tail(0, false, &w[0], &w[1], &slope);
            let r = (lo + &shift, hi + &shift);
            out = Some(match out {
                None => r,
                Some(o) => minmax(o, r),
            });
        }
        out.expect("non-empty interval")
    }
}

/// Exact binary box counts of `{ x : (f + G_n)(x) = y }` at scales `2^-k`, `k = 0..=max_k`;
/// refinement stops early once the frontier exceeds `cap` cells.
pub fn sawtooth_level_counts(
    saw: &SawtoothSum,
    n: usize,
    f: Option<&GridFunction<Rational>>,
    y: &Rational,
    max_k: u32,
    cap: usize,
) -> Vec<(u32, u64)> {
    let mut frontier: Vec<BigInt> = vec![BigInt::zero()];
    let mut out = Vec::new();
    for k in 0..=max_k {
        let w = pow2(-(k as i64));
        let hits: Vec<bool> = par::map_chunks(frontier.len(), 256, |range| {
            let mut oracle = saw.range_oracle(n, f);
            range
                .map(|i| {
                    let x0 = Rational::from_integer(frontier[i].clone()) * &w;
                    let x1 = &x0 + &w;
                    let (lo, hi) = oracle.range(&x0, &x1);
                    lo <= *y && *y <= hi
                })
                .collect::<Vec<_>>()
        })
        .concat();
        let kept: Vec<BigInt> = frontier
            .iter()
            .zip(&hits)
            .filter(|(_, h)| **h)
            .map(|(c, _)| c.clone())
            .collect();
        out.push((k, kept.len() as u64));
        if kept.len() * 2 > cap || k == max_k {
            break;
        }
        frontier = kept.iter().flat_map(|c| [c * 2, c * 2 + 1]).collect();
    }
    out
}

/// Leftmost zero of a function that is affine between consecutive `points`.
fn leftmost_root(points: &[Rational], eval: impl Fn(&Rational) -> Rational) -> Option<Rational> {
    let mut prev: Option<(Rational, Rational)> = None;
    for x in points {
        let v = eval(x);
        if v.is_zero() {
            return Some(x.clone());
        }
        if let Some((x0, v0)) = &prev {
            if v0.is_negative() != v.is_negative() {
                return Some(x0 + v0 * (x - x0) / (v0 - &v));
            }
        }
        prev = Some((x.clone(), v));
    }
    None
}

/// Node of a witness level tree.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelNode {
    /// Interval `[lo, lo + p_{m+n}]`.
    pub lo: Rational,
    pub hi: Rational,
    /// Exact root `(f + G_{m+n})(x) = y`.
    pub x: Rational,
    /// Bracket points (absent at the root).
    pub u: Option<Rational>,
    pub v: Option<Rational>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTree {
    pub m: usize,
    pub y: Rational,
    pub levels: Vec<Vec<LevelNode>>,
}

impl LevelTree {
    pub fn leaf_count(&self) -> usize {
        self.levels.last().map(Vec::len).unwrap_or(0)
    }

    pub fn leaf_hulls(&self) -> Vec<(Rational, Rational)> {
        self.levels
            .last()
            .map(|l| l.iter().map(|n| (n.lo.clone(), n.hi.clone())).collect())
            .unwrap_or_default()
    }

    pub fn to_json(&self, max_nodes: usize) -> Value {
        json!({
            "schema": "construct/1",
            "m": self.m,
            "y": fmt_rational(&self.y),
            "levels": self.levels.iter().enumerate().map(|(n, l)| {
                let nodes = if l.len() <= max_nodes {
                    Value::Array(l.iter().map(|nd| json!({"lo": fmt_rational(&nd.lo), "x": fmt_rational(&nd.x),
                        "parent": nd.parent})).collect())
                } else {
                    Value::Null
                };
                json!({"n": n, "count": l.len(), "nodes": nodes})
            }).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelTreeFailure {
    pub level: usize,
    pub node: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelTreeOutcome {
    Tree(LevelTree),
    Failure(LevelTreeFailure),
}

fn f_or_zero(f: Option<&GridFunction<Rational>>, x: &Rational) -> Rational {
    f.map(|f| f.eval(x)).unwrap_or_else(Rational::zero)
}

/// Exact `(min, max)` of `f + g` over `[0, 1]`.
fn candidate_range(saw: &SawtoothSum, f: Option<&GridFunction<Rational>>) -> Result<(Rational, Rational)> {
    Ok(saw.range_oracle(saw.depth(), f).range(&Rational::zero(), &Rational::one()))
}

/// Builds the nested intervals `I_{i_1..i_n}` with points `x` solving
/// `(f + G_{m+n})(x) = y`, certifying the bracket at every node exactly.
pub fn witness_level_tree(
    f: Option<&GridFunction<Rational>>,
    cfg: &SawtoothConfig,
    y: &Rational,
    levels: usize,
) -> Result<LevelTreeOutcome> {
    let saw = sawtooth_g(cfg);
    let b: Vec<u64> = cfg
        .b()
        .iter()
        .map(|v| v.to_u64().ok_or_else(|| Error::TooLarge("b_n".into())))
        .collect::<Result<_>>()?;
    let (lo, hi) = candidate_range(&saw, f)?;
    if !(lo < *y && *y < hi) {
        return Err(Error::Precondition(
            "y must lie strictly between min(f+g) and max(f+g)".into(),
        ));
    }
    if levels == 0 || levels >= saw.depth() {
        return Err(Error::invalid(
            "levels",
            "need 1 <= levels < schedule depth",
        ));
    }
    // root: leftmost root of f + G_m - y for the smallest m that has one
    let mut root = None;
    for m in 1..=saw.depth() - levels {
        let count = (Rational::one() / saw.pitch(m))
            .to_integer()
            .to_u64()
            .filter(|&c| c <= GRID_LIMIT);
        let Some(c) = count else { break };
        let mut pts: Vec<Rational> = (0..=c)
            .map(|i| Rational::from_integer(i.into()) * saw.pitch(m))
            .collect();
        if let Some(f) = f {
            pts.extend(
                f.xs()
                    .iter()
                    .filter(|x| **x >= Rational::zero() && **x <= Rational::one())
                    .cloned(),
            );
            pts.sort();
            pts.dedup();
        }
        if let Some(x) = leftmost_root(&pts, |x| f_or_zero(f, x) + saw.partial(m, x) - y) {
            root = Some((m, x));
            break;
        }
    }
    let (m, x0) =
        root.ok_or_else(|| Error::Precondition("no level m with a root of f + G_m = y".into()))?;
    let p0 = saw.pitch(m).clone();
    let mut cell = floor_rat(&(&x0 / &p0));
    if Rational::from_integer(cell.clone()) * &p0 == Rational::one() && cell.is_positive() {
        cell -= 1;
    }
    let lo0 = Rational::from_integer(cell) * &p0;
    let mut tree = vec![vec![LevelNode {
        hi: &lo0 + &p0,
        lo: lo0,
        x: x0,
        u: None,
        v: None,
        parent: None,
    }]];
    let sixteen = Rational::from_integer(16.into());
    for n in 0..levels {
        let level = m + n + 1;
        let p = saw.pitch(m + n).clone();
        let q = saw.pitch(level).clone();
        let want = b[level - 1] as usize;
        let parents = tree.last().expect("non-empty").clone();
        let results: Vec<std::result::Result<Vec<LevelNode>, String>> =
            par::map_range(parents.len(), |pi| {
                let node = &parents[pi];
                let r = &p / &sixteen;
                let left = (&node.x - &r).max(node.lo.clone());
                // first cell start c0 >= node.lo with c0 > x - p/16
                let mut k = floor_rat(&(&left / &q));
                while Rational::from_integer(k.clone()) * &q < node.lo
                    || Rational::from_integer(k.clone()) * &q <= &node.x - &r
                {
                    k += 1;
                }
                let mut out = Vec::with_capacity(want);
                while out.len() < want {
                    let c0 = Rational::from_integer(k.clone()) * &q;
                    let c1 = &c0 + &q;
                    if c1 > node.hi || c1 >= &node.x + &r {
                        return Err(format!("only {} of {want} cells fit", out.len()));
                    }
                    let (u, v) = if k.is_even() {
                        (c1.clone(), c0.clone())
                    } else {
                        (c0.clone(), c1.clone())
                    };
                    let f0 = f_or_zero(f, &c0) + saw.partial_at_index(level, level, &k);
                    let f1 = f_or_zero(f, &c1)
                        + saw.partial_at_index(level, level, &(&k + BigInt::one()));
                    let (fu, fv) = if k.is_even() { (&f1, &f0) } else { (&f0, &f1) };
                    if !(fu <= y && y <= fv) {
                        return Err(format!(
                            "bracket fails on cell starting at {}",
                            fmt_rational(&c0)
                        ));
                    }
                    let inner: Vec<Rational> = f
                        .map(|f| f.xs().iter().filter(|x| **x > c0 && **x < c1).cloned().collect())
                        .unwrap_or_default();
                    let x = if inner.is_empty() {
                        let (d0, d1) = (&f0 - y, &f1 - y);
                        if d0.is_zero() {
                            c0.clone()
                        } else if d1.is_zero() {
                            c1.clone()
                        } else {
                            &c0 + &d0 * &q / (&d0 - &d1)
                        }
                    } else {
                        let mut pts = vec![c0.clone()];
                        pts.extend(inner);
                        pts.push(c1.clone());
                        leftmost_root(&pts, |x| f_or_zero(f, x) + saw.partial(level, x) - y)
                            .ok_or_else(|| "no root inside a certified cell".to_string())?
                    };
                    out.push(LevelNode {
                        lo: c0,
                        hi: c1,
                        x,
                        u: Some(u),
                        v: Some(v),
                        parent: Some(pi),
                    });
                    k += 1;
                }
                Ok(out)
            });
        let mut next = Vec::new();
        for (pi, r) in results.into_iter().enumerate() {
            match r {
                Ok(nodes) => next.extend(nodes),
                Err(reason) => {
                    return Ok(LevelTreeOutcome::Failure(LevelTreeFailure {
                        level: m + n,
                        node: pi,
                        reason,
                    }));
                }
            }
        }
        tree.push(next);
    }
    Ok(LevelTreeOutcome::Tree(LevelTree {
        m,
        y: y.clone(),
        levels: tree,
    }))
}

/// Independent recheck: nesting, hull lengths, branching, brackets and zero residuals.
pub fn verify_level_tree(
    f: Option<&GridFunction<Rational>>,
    cfg: &SawtoothConfig,
    tree: &LevelTree,
) -> Vec<String> {
    let saw = sawtooth_g(cfg);
    let mut errors = Vec::new();
    for (n, level) in tree.levels.iter().enumerate() {
        let lv = tree.m + n;
        let p = saw.pitch(lv);
        let checks = par::map_range(level.len(), |i| {
            let node = &level[i];
            let mut errs = Vec::new();
            if &(&node.hi - &node.lo) != p {
                errs.push(format!("level {n} node {i}: hull length"));
            }
            if !(f_or_zero(f, &node.x) + saw.partial(lv, &node.x) - &tree.y).is_zero() {
                errs.push(format!("level {n} node {i}: residual"));
            }
            if node.x < node.lo || node.x > node.hi {
                errs.push(format!("level {n} node {i}: root outside interval"));
            }
            if let (Some(u), Some(v)) = (&node.u, &node.v) {
                let fu = f_or_zero(f, u) + saw.partial(lv, u);
                let fv = f_or_zero(f, v) + saw.partial(lv, v);
                if !(fu <= tree.y && tree.y <= fv) {
                    errs.push(format!("level {n} node {i}: bracket"));
                }
            }
            if let Some(pi) = node.parent {
                let par_node = &tree.levels[n - 1][pi];
                if node.lo < par_node.lo || node.hi > par_node.hi {
                    errs.push(format!("level {n} node {i}: nesting"));
                }
            }
            errs
        });
        errors.extend(checks.into_iter().flatten());
        if n > 0 {
            let want = cfg.levels[lv - 1].b.to_usize().unwrap_or(usize::MAX);
            let mut counts = vec![0usize; tree.levels[n - 1].len()];
            for node in level {
                counts[node.parent.unwrap_or(0)] += 1;
            }
            if counts.iter().any(|c| *c != want) {
                errors.push(format!("level {n}: branching differs from b = {want}"));
            }
        }
    }
    errors
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{big, int, rat};

    #[test]
    fn modulus_examples() {
        let h = modulus_for_family(&Family::Lipschitz(int(1))).unwrap();
        assert_eq!(h, Modulus::Linear { c: int(2) });
        assert_eq!(h.eval_exact(&rat(1, 4)), Some(rat(1, 2)));
        let hh = modulus_for_family(&Family::Hoelder(int(1), 0.5)).unwrap();
        assert!((hh.eval_f64(0.25) - 1.0).abs() < 1e-15);
        assert!((hh.inverse_f64(1.0) - hh.inverse_bisect(1.0, 1.0, 80)).abs() < 1e-12);
        assert_eq!(hh.eval_f64(0.0), 0.0);
    }

    #[test]
    fn cone_examples() {
        let c = cone_function(&rat(1, 2), &int(0), &Modulus::Linear { c: int(2) });
        assert_eq!(c.eval_rational(&int(0)), int(1));
        assert_eq!(c.eval_rational(&rat(1, 2)), int(0));
        let g = c.to_grid();
        let f = random_lipschitz_pl(&int(1), 16, &rat(1, 2), &int(0), 3, 0);
        assert_eq!(f.eval(&rat(1, 2)), int(0));
        for x in g.xs() {
            if *x != rat(1, 2) {
                assert!(f.eval(x) < g.eval(x));
            }
        }
    }

    #[test]
    fn staircase_values() {
        let cfg = StaircaseConfig::new(vec![rat(1, 4)]).unwrap();
        let g = staircase_g(&cfg);
        assert_eq!(g.eval(&rat(3, 4)), rat(3, 4));
        assert_eq!(g.eval(&int(0)), int(0));
        assert!(StaircaseConfig::new(vec![rat(1, 4), rat(1, 6)]).is_err());
    }

    #[test]
    fn staircase_diameters() {
        let cfg = StaircaseConfig::geometric(6);
        let g = staircase_g(&cfg);
        for n in 1..=4usize {
            let want: Rational =
                (n + 1..=6).map(|k| cfg.alpha(k).clone()).sum::<Rational>() * int(2);
            for i in 1..=(1u64 << n) {
                assert_eq!(g.preimage_diameter(n, i).unwrap(), want, "n={n} i={i}");
            }
        }
        let pts = g.points();
        assert!(pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        for (z, v) in &pts {
            assert_eq!(&g.eval(z), v);
        }
        assert_eq!(g.eval(&int(1)), g.top_value());
    }

    #[test]
    fn c1_example() {
        let cfg = StaircaseConfig::new(vec![rat(1, 64)]).unwrap();
        let h = Modulus::Linear { c: int(2) };
        let levels = c_gamma_sets(&cfg, &h, 1).unwrap();
        assert_eq!(
            levels[1].c.parts(),
            &[(rat(1, 8), rat(3, 8)), (rat(5, 8), rat(7, 8))]
        );
        assert_eq!(levels[1].gamma.len(), 2);
        assert!(gamma_membership(
            &GridFunction::constant(rat(1, 2)),
            &levels[0].gamma
        ));
        assert!(!gamma_membership(
            &GridFunction::constant(int(2)),
            &levels[1].gamma
        ));
        let bad = StaircaseConfig::new(vec![rat(1, 4)]).unwrap();
        assert!(c_gamma_sets(&bad, &h, 1).is_err());
    }

    #[test]
    fn alpha_mc() {
        let s = ConstantSampler {
            lo: int(0),
            hi: int(1),
        };
        let h = Modulus::Linear { c: int(1) };
        let out = choose_alpha_mc(&s, &h, 3, 400, 1).unwrap();
        let a = out.config.alphas();
        for w in a.windows(2) {
            assert!(&w[1] * int(2) <= w[0]);
        }
        assert!(choose_alpha_mc(&s, &h, 3, 0, 1).is_err());
    }

    #[test]
    fn sawtooth_values() {
        let saw = SawtoothSum::new(&[big(4)]).unwrap();
        assert_eq!(saw.term(1, &int(0)), rat(1, 2));
        assert_eq!(saw.term(1, &rat(1, 4)), rat(-1, 2));
        assert_eq!(saw.lip_term(1), int(4));
        let g = saw.to_grid(1).unwrap();
        assert_eq!(g.lip().unwrap(), int(4));
        let cfg = sawtooth_config_full(&Modulus::Linear { c: int(1) }, 1);
        assert_eq!(cfg.levels[0].a, big(32));
        assert_eq!(cfg.levels[0].b, big(1));
    }

    #[test]
    fn partial_sums_match_terms() {
        let saw = SawtoothSum::new(&[big(4), big(3), big(5)]).unwrap();
        let by_terms = |n: usize, x: &Rational| {
            (1..=n).fold(Rational::zero(), |acc, i| acc + saw.term(i, x))
        };
        for n in 0..=3 {
            for x in [rat(0, 1), rat(1, 7), rat(5, 12), rat(-3, 11), rat(13, 9)] {
                assert_eq!(saw.partial(n, &x), by_terms(n, &x));
            }
            for level in n.max(1)..=3 {
                for k in -3i64..70 {
                    let x = saw.pitch(level) * int(k);
                    assert_eq!(saw.partial_at_index(n, level, &BigInt::from(k)), by_terms(n, &x));
                }
            }
        }
    }

    #[test]
    fn range_oracle_matches_grid() {
        let saw = SawtoothSum::new(&[big(4), big(3), big(5)]).unwrap();
        let grid = saw.to_grid(3).unwrap();
        let f = GridFunction::linear(
            vec![int(0), rat(1, 3), int(1)],
            vec![int(0), rat(1, 5), rat(-1, 7)],
        )
        .unwrap();
        let mut o = saw.range_oracle(3, Some(&f));
        let pts: Vec<Rational> = (0..=60).map(|i| rat(i, 60)).collect();
        for w in pts
            .windows(2)
            .step_by(7)
            .chain(std::iter::once(&[rat(1, 7), rat(5, 6)][..]))
        {
            let (lo, hi) = o.range(&w[0], &w[1]);
            let mut xs: Vec<Rational> = grid
                .xs()
                .iter()
                .filter(|x| **x > w[0] && **x < w[1])
                .cloned()
                .collect();
            xs.extend(f.xs().iter().filter(|x| **x > w[0] && **x < w[1]).cloned());
            xs.push(w[0].clone());
            xs.push(w[1].clone());
            let vals: Vec<Rational> = xs.iter().map(|x| grid.eval(x) + f.eval(x)).collect();
            let (elo, ehi) = crate::num::min_max(&vals).unwrap();
            assert_eq!((lo, hi), (elo, ehi));
        }
    }

    #[test]
    fn witness_small() {
        let a: Vec<BigUint> = (1..=3).map(|n| big(1 << (n + 7))).collect();
        let b: Vec<BigUint> = (1..=3).map(|n| big(1 << (n + 2))).collect();
        let cfg = sawtooth_config_desk(&Modulus::Linear { c: int(1) }, &a, &b).unwrap();
        match witness_level_tree(None, &cfg, &int(0), 2).unwrap() {
            LevelTreeOutcome::Tree(t) => {
                assert_eq!(t.m, 1);
                assert_eq!(t.leaf_count(), 16 * 32);
                assert!(verify_level_tree(None, &cfg, &t).is_empty());
            }
            LevelTreeOutcome::Failure(f) => panic!("{f:?}"),
        }
        let (_, hi) = candidate_range(&sawtooth_g(&cfg), None).unwrap();
        assert!(witness_level_tree(None, &cfg, &hi, 2).is_err());
    }

    #[test]
    fn isolated_zero_constant() {
        let cfg = StaircaseConfig::geometric(4);
        let h = Modulus::Linear { c: rat(1, 8) };
        let sets = c_gamma_sets(&cfg, &h, 4).unwrap();
        let g = staircase_g(&cfg);
        let f = GridFunction::constant(rat(5, 16));
        let rep = verify_isolated_zero(&f, &g, &sets[4].c, 1024, &int(0)).unwrap();
        assert!(rep.violations.is_empty());
    }
}
