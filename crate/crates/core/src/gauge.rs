//! Gauge functions, the classes G(s), the Phi-transform, division by powers
//! and gauge-driven branching schedules.

use num_bigint::BigUint;
use num_traits::{Float, One, ToPrimitive};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::cantor::{MassDistribution, Window, WindowProfile, SCREEN_MARGIN};
use crate::error::{Error, Result};
use crate::num::{f64_to_ratio, product, ubig_to_rat, Rational};

/// Non-decreasing `phi` with `phi(0) = 0`.
///
/// `PowerLog` follows `r^s log(1/r)^t` up to the cutoff `r0` and stays constant
/// after it. `Tabulated` interpolates linearly from `(0, 0)` through the samples
/// and is constant past the last one. `Quotient` is `inf_{u in [r,1]} psi(u) u^-d`,
/// constant for `r >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Gauge<T> {
    Power { s: T },
    PowerLog { s: T, t: T },
    Tabulated { r: Vec<T>, phi: Vec<T> },
    Quotient { psi: Box<Gauge<T>>, d: u32 },
}

/// Outcome of a class test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    Yes,
    No,
    Inconclusive,
}

fn c<T: Float>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

impl<T: Float> Gauge<T> {
    pub fn power(s: T) -> Result<Self> {
        let g = Gauge::Power { s };
        g.validate()?;
        Ok(g)
    }

    pub fn power_log(s: T, t: T) -> Result<Self> {
        let g = Gauge::PowerLog { s, t };
        g.validate()?;
        Ok(g)
    }

    pub fn tabulated(r: Vec<T>, phi: Vec<T>) -> Result<Self> {
        let g = Gauge::Tabulated { r, phi };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Gauge::Power { s } => {
                if !(s.is_finite() && *s >= T::zero()) {
                    return Err(Error::invalid(
                        "s",
                        "power exponent must be finite and >= 0",
                    ));
                }
            }
            Gauge::PowerLog { s, t } => {
                if !(s.is_finite() && t.is_finite() && *s > T::zero()) {
                    return Err(Error::invalid("s", "power-log needs finite t and s > 0"));
                }
            }
            Gauge::Tabulated { r, phi } => {
                if r.is_empty() || r.len() != phi.len() {
                    return Err(Error::invalid(
                        "r",
                        "need equally many (>= 1) radii and values",
                    ));
                }
                if r[0] <= T::zero() || r.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(
                        "r",
                        "radii must be positive and strictly increasing",
                    ));
                }
                if phi[0] < T::zero()
                    || phi.windows(2).any(|w| w[0] > w[1])
                    || phi.iter().any(|v| !v.is_finite())
                {
                    return Err(Error::invalid(
                        "phi",
                        "values must be finite, >= 0 and non-decreasing",
                    ));
                }
            }
            Gauge::Quotient { psi, .. } => {
                if !matches!(**psi, Gauge::Power { .. } | Gauge::PowerLog { .. }) {
                    return Err(Error::invalid(
                        "psi",
                        "quotient is closed-form only for power and power-log",
                    ));
                }
                psi.validate()?;
            }
        }
        Ok(())
    }

    /// End of the range where the power-log formula is followed.
    pub fn cutoff(&self) -> Option<T> {
        match self {
            Gauge::PowerLog { s, t } => Some(if *t > T::zero() {
                (-*t / *s).exp()
            } else if *t == T::zero() {
                T::infinity()
            } else {
                c::<T>(-1.0).exp()
            }),
            _ => None,
        }
    }

    fn power_log_raw(s: T, t: T, r: T) -> T {
        if t == T::zero() {
            r.powf(s)
        } else {
            r.powf(s) * (-r.ln()).powf(t)
        }
    }

    pub fn eval(&self, r: T) -> T {
        if r <= T::zero() {
            return T::zero();
        }
        match self {
            Gauge::Power { s } => {
                if *s == T::zero() {
                    T::one()
                } else {
                    r.powf(*s)
                }
            }
            Gauge::PowerLog { s, t } => {
                let r0 = self.cutoff().expect("power-log");
                Self::power_log_raw(*s, *t, r.min(r0))
            }
            Gauge::Tabulated { r: rs, phi } => {
                let n = rs.len();
                if r >= rs[n - 1] {
                    return phi[n - 1];
                }
                let i = rs.partition_point(|v| *v <= r);
                let (x0, y0) = if i == 0 {
                    (T::zero(), T::zero())
                } else {
                    (rs[i - 1], phi[i - 1])
                };
                y0 + (phi[i] - y0) * (r - x0) / (rs[i] - x0)
            }
            Gauge::Quotient { psi, d } => quotient_eval(psi, *d, r.min(T::one())),
        }
    }

    /// `(p, t)` with `phi(r) ~ r^p log(1/r)^t` as `r -> 0`.
    pub fn leading_order(&self) -> Option<(T, T)> {
        match self {
            Gauge::Power { s } => Some((*s, T::zero())),
            Gauge::PowerLog { s, t } => Some((*s, *t)),
            Gauge::Tabulated { .. } => None,
            Gauge::Quotient { psi, d } => {
                let (p, t) = psi.leading_order()?;
                let sigma = p - T::from(*d).expect("small d");
                Some(if sigma > T::zero() {
                    (sigma, t)
                } else if sigma == T::zero() && t < T::zero() {
                    (T::zero(), t)
                } else {
                    (T::zero(), T::zero())
                })
            }
        }
    }

    /// Whether `phi(r) / r^s -> infinity` as `r -> 0+`.
    pub fn in_class(&self, s: T) -> Membership {
        match self.leading_order() {
            None => Membership::Inconclusive,
            Some((p, t)) => {
                if p < s || (p == s && t > T::zero()) {
                    Membership::Yes
                } else {
                    Membership::No
                }
            }
        }
    }

    /// `phi(0) = 0` and monotone on `n` log-spaced points of `[lo, hi]`.
    pub fn check_monotone(&self, n: usize, lo: T, hi: T) -> bool {
        let pts = log_grid(n, lo, hi);
        self.eval(T::zero()) == T::zero()
            && pts
                .windows(2)
                .all(|w| self.eval(w[0]) <= self.eval(w[1]) * (T::one() + c(1e-12)))
    }
}

fn quotient_eval<T: Float>(psi: &Gauge<T>, d: u32, r: T) -> T {
    let df = T::from(d).expect("small d");
    let q = |u: T| psi.eval(u) / u.powi(d as i32);
    let mut best = q(r).min(q(T::one()));
    if let Gauge::PowerLog { s, t } = psi {
        let r0 = psi.cutoff().expect("power-log");
        if r0 >= r && r0 <= T::one() {
            best = best.min(q(r0));
        }
        let sigma = *s - df;
        if sigma != T::zero() {
            let l = *t / sigma;
            if l > T::zero() {
                let u = (-l).exp();
                if u >= r && u <= r0.min(T::one()) {
                    best = best.min(q(u));
                }
            }
        }
    }
    best
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid<T: Float>(n: usize, lo: T, hi: T) -> Vec<T> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let m = T::from(n - 1).expect("small n");
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                (a + (b - a) * T::from(i).expect("small i") / m).exp()
            }
        })
        .collect()
}

/// Number of points of the lower-envelope grid used for tabulated quotients.
pub const ENVELOPE_POINTS: usize = 1024;
/// Smallest radius of the lower-envelope grid.
pub const ENVELOPE_MIN_R: f64 = 1e-6;

/// `phi(r) = inf_{u in [r,1]} psi(u) u^-d`; closed form for parametric `psi`,
/// suffix minimum over a log grid otherwise.
pub fn divide_by_power<T: Float>(psi: &Gauge<T>, d: u32) -> Result<Gauge<T>> {
    psi.validate()?;
    let df = T::from(d).expect("small d");
    if psi.in_class(df + T::one()) == Membership::No {
        return Err(Error::Class(format!("psi is not in G({})", d + 1)));
    }
    if d == 0 {
        return Ok(psi.clone());
    }
    match psi {
        Gauge::Power { s } => Ok(Gauge::Power {
            s: (*s - df).max(T::zero()),
        }),
        Gauge::PowerLog { .. } => Ok(Gauge::Quotient {
            psi: Box::new(psi.clone()),
            d,
        }),
        _ => {
            let us = log_grid(ENVELOPE_POINTS, c(ENVELOPE_MIN_R), T::one());
            let mut env: Vec<T> = us.iter().map(|&u| psi.eval(u) / u.powi(d as i32)).collect();
            for i in (0..env.len() - 1).rev() {
                env[i] = env[i].min(env[i + 1]);
            }
            Gauge::tabulated(us, env)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiTransform<T> {
    /// `sup{r > 0 : r phi(1/r) <= x} + 1`.
    pub value: T,
    /// The sup ran over an empty set; `value` is 1 by convention.
    pub empty_sup: bool,
    /// Final bisection bracket for the sup.
    pub bracket: (T, T),
}

pub const DEFAULT_PHI_TOL: f64 = 1e-9;

/// Doubling then bisection on `F(r) = r phi(1/r)`.
pub fn phi_transform<T: Float>(g: &Gauge<T>, x: T, tol: T) -> Result<PhiTransform<T>> {
    if g.in_class(T::one()) != Membership::Yes {
        return Err(Error::Class("phi-transform needs a gauge in G(1)".into()));
    }
    if !(tol > T::zero()) || !(x >= T::one()) {
        return Err(Error::invalid("x", "need x >= 1 and tol > 0"));
    }
    let f = |r: T| r * g.eval(T::one() / r);
    let two = c::<T>(2.0);
    let (mut lo, mut hi);
    if f(T::one()) <= x {
        lo = T::one();
        hi = two;
        while f(hi) <= x {
            lo = hi;
            hi = hi * two;
            if !hi.is_finite() {
                return Err(Error::Precondition("phi-transform bracket overflow".into()));
            }
        }
    } else {
        hi = T::one();
        lo = hi / two;
        while f(lo) > x {
            hi = lo;
            lo = lo / two;
            if lo < T::min_positive_value() {
                return Ok(PhiTransform {
                    value: T::one(),
                    empty_sup: true,
                    bracket: (T::zero(), hi),
                });
            }
        }
    }
    while hi - lo > tol {
        let mid = lo + (hi - lo) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PhiTransform {
        value: lo + T::one(),
        empty_sup: false,
        bracket: (lo, hi),
    })
}

/// Per-level record of a gauge-driven schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleLevel {
    pub n: usize,
    pub a: BigUint,
    pub b: BigUint,
    /// Exponent `E` with `a_1..a_{n+1} / b_1..b_{n+1} = (2s)^E`.
    pub ratio_exponent: u64,
    /// Integer lower bound used for the Phi term.
    pub phi_ceiling: BigUint,
    pub phi_exact: bool,
    pub growth_ok: bool,
    pub phi_ok: bool,
    pub b_integral: bool,
    pub ratio_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSchedule {
    pub d: u32,
    pub levels: Vec<ScheduleLevel>,
}

impl GaugeSchedule {
    pub fn a(&self) -> Vec<BigUint> {
        self.levels.iter().map(|l| l.a.clone()).collect()
    }

    pub fn b(&self) -> Vec<BigUint> {
        self.levels.iter().map(|l| l.b.clone()).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.levels
            .iter()
            .all(|l| l.growth_ok && l.phi_ok && l.b_integral && l.ratio_ok)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "d": self.d,
            "a": self.levels.iter().map(|l| l.a.to_string()).collect::<Vec<_>>(),
            "b": self.levels.iter().map(|l| l.b.to_string()).collect::<Vec<_>>(),
            "levels": self.levels.iter().map(|l| json!({
                "n": l.n, "ratio_exponent": l.ratio_exponent, "phi_ceiling": l.phi_ceiling.to_string(),
                "phi_exact": l.phi_exact, "growth_ok": l.growth_ok, "phi_ok": l.phi_ok,
                "b_integral": l.b_integral, "ratio_ok": l.ratio_ok,
            })).collect::<Vec<_>>(),
        })
    }
}

/// Largest power-of-two denominator accepted for the exact Phi path.
const EXACT_DEN_LIMIT: u64 = 1 << 16;

/// `(p, q)` with `s = p / q`, `0 <= p < q <= 2^16`, for dyadic power exponents.
fn dyadic_exponent<T: Float>(g: &Gauge<T>) -> Option<(u32, u32)> {
    let Gauge::Power { s } = g else { return None };
    let r = f64_to_ratio(s.to_f64()?).ok()?;
    let p = r.numer().to_u64()?;
    let q = r.denom().to_u64()?;
    (q <= EXACT_DEN_LIMIT && p < q).then_some((p as u32, q as u32))
}

/// Sum of `k + 3` for `k = 1 ..= m`.
fn ratio_exponent(m: u64) -> u64 {
    m * (m + 1) / 2 + 3 * m
}

/// Branching `a_n`, the smallest multiple of `(2s)^(n+3)` (with `s = 2^d`) that
/// is at least `(2s)^(8n) a_1..a_{n-1}` and `Phi(a_1..a_{n+1}/b_1..b_{n+1})`;
/// `b_n = a_n / (2s)^(n+3)`.
pub fn gauge_schedule<T: Float>(g: &Gauge<T>, d: u32, depth: usize) -> Result<GaugeSchedule> {
    if g.in_class(T::one()) != Membership::Yes {
        return Err(Error::Class("gauge schedule needs a gauge in G(1)".into()));
    }
    let base = BigUint::one() << (d + 1);
    let exact = dyadic_exponent(g);
    let mut levels: Vec<ScheduleLevel> = Vec::with_capacity(depth);
    let mut prefix = BigUint::one();
    for n in 1..=depth {
        let e = ratio_exponent(n as u64 + 1);
        let x = num_traits::pow(base.clone(), e as usize);
        let (phi_ceiling, phi_exact) = match exact {
            Some((p, q)) => {
                // sup = x^(q/(q-p)), so Phi <= R + 2 with R the integer root
                let xq = num_traits::pow(x.clone(), q as usize);
                let root = xq.nth_root(q - p);
                let perfect = num_traits::pow(root.clone(), (q - p) as usize) == xq;
                (root + if perfect { 1u32 } else { 2u32 }, true)
            }
            None => {
                let xf = x
                    .to_f64()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::TooLarge("Phi argument".into()))?;
                let xt = T::from(xf).ok_or_else(|| Error::TooLarge("Phi argument".into()))?;
                let phi = phi_transform(g, xt, c(DEFAULT_PHI_TOL))?;
                let v = phi.value.to_f64().unwrap_or(f64::INFINITY) * (1.0 + 1e-12) + 1.0;
                let big =
                    f64_to_ratio(v.ceil()).map_err(|_| Error::TooLarge("Phi value".into()))?;
                (big.to_integer().to_biguint().expect("positive"), false)
            }
        };
        let growth = num_traits::pow(base.clone(), 8 * n) * &prefix;
        let unit = num_traits::pow(base.clone(), n + 3);
        let target = growth.clone().max(phi_ceiling.clone());
        let a = crate::num::ceil_div(&target, &unit) * &unit;
        let b = &a / &unit;
        let phi_ok = match exact {
            Some((p, q)) => {
                let lhs = num_traits::pow(&a - 1u32, (q - p) as usize);
                lhs >= num_traits::pow(x.clone(), q as usize)
            }
            None => a >= phi_ceiling,
        };
        levels.push(ScheduleLevel {
            n,
            growth_ok: a >= growth,
            phi_ok,
            b_integral: &b * &unit == a,
            ratio_ok: true,
            a: a.clone(),
            b,
            ratio_exponent: e,
            phi_ceiling,
            phi_exact,
        });
        prefix *= a;
    }
    // ratio identity wherever both factors are available
    let a: Vec<BigUint> = levels.iter().map(|l| l.a.clone()).collect();
    let b: Vec<BigUint> = levels.iter().map(|l| l.b.clone()).collect();
    for n in 1..depth {
        let lhs = ubig_to_rat(&product(&a[..=n])) / ubig_to_rat(&product(&b[..=n]));
        let rhs = ubig_to_rat(&num_traits::pow(
            base.clone(),
            levels[n - 1].ratio_exponent as usize,
        ));
        levels[n - 1].ratio_ok = lhs == rhs;
    }
    Ok(GaugeSchedule { d, levels })
}

/// Per-level outcome of [`recheck_power_schedule`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleRecheck {
    pub n: usize,
    pub growth: bool,
    pub phi: bool,
}

/// Re-derives both schedule inequalities from the `a`, `b` lists alone for
/// `phi(r) = r^(p/q)`: `a_n >= (2s)^(8n) a_1..a_{n-1}` and
/// `a_n >= Phi(a_1..a_{n+1} / b_1..b_{n+1}) = x^(q/(q-p)) + 1`.
/// The factor `a_{n+1} / b_{n+1}` past the last level is `(2s)^(n+4)`.
pub fn recheck_power_schedule(sched: &GaugeSchedule, p: u32, q: u32) -> Result<Vec<ScheduleRecheck>> {
    if p >= q {
        return Err(Error::invalid("s", "need 0 <= p/q < 1"));
    }
    let base = BigUint::one() << (sched.d + 1);
    let (a, b) = (sched.a(), sched.b());
    let depth = a.len();
    let mut out = Vec::with_capacity(depth);
    for n in 1..=depth {
        let growth = a[n - 1] >= num_traits::pow(base.clone(), 8 * n) * product(&a[..n - 1]);
        let mut x = ubig_to_rat(&product(&a[..n])) / ubig_to_rat(&product(&b[..n]));
        x *= if n < depth {
            ubig_to_rat(&a[n]) / ubig_to_rat(&b[n])
        } else {
            ubig_to_rat(&num_traits::pow(base.clone(), n + 4))
        };
        let lhs = num_traits::pow(ubig_to_rat(&a[n - 1]) - Rational::one(), (q - p) as usize);
        let phi = lhs >= num_traits::pow(x, q as usize);
        out.push(ScheduleRecheck { n, growth, phi });
    }
    Ok(out)
}

/// `sum phi(diam_i)` for a cover whose members all have diameter `<= delta`.
pub fn hausdorff_premeasure<T: Float>(diams: &[T], g: &Gauge<T>, delta: T) -> Result<T> {
    if let Some(bad) = diams.iter().find(|d| **d > delta || **d < T::zero()) {
        return Err(Error::invalid(
            "diams",
            format!(
                "diameter {} outside [0, delta]",
                bad.to_f64().unwrap_or(f64::NAN)
            ),
        ));
    }
    Ok(diams.iter().fold(T::zero(), |acc, d| acc + g.eval(*d)))
}

#[derive(Debug, Clone)]
pub struct GaugeMassReport {
    pub max_level: usize,
    pub cap: Rational,
    pub sup_ratio: f64,
    pub pass: bool,
    pub witness: Window,
    pub windows_scanned: u64,
}

impl GaugeMassReport {
    pub fn to_json(&self) -> Value {
        json!({"max_level": self.max_level, "diam_cap": crate::num::fmt_rational(&self.cap),
               "sup_ratio": self.sup_ratio, "pass": self.pass, "witness": self.witness.to_json(),
               "windows_scanned": self.windows_scanned})
    }
}

/// `sup mu(B) / phi(diam B)` over windows with `diam B <= 1/(a_1..a_max_level)`; pass iff `<= 4`.
pub fn gauge_mass_check(
    mass: &MassDistribution,
    g: &Gauge<f64>,
    max_level: usize,
) -> Result<GaugeMassReport> {
    if max_level == 0 || max_level > mass.depth() {
        return Err(Error::invalid(
            "max_level",
            format!("need 1 <= max_level <= depth = {}", mass.depth()),
        ));
    }
    g.validate()?;
    let a = mass.subset().parent().a();
    let cap = Rational::one() / ubig_to_rat(&product(&a[..max_level]));
    let prof = WindowProfile::new(mass, Some(&cap), None)?;
    let ratios = prof.ratios(|r| g.eval(r));
    let best = WindowProfile::candidates(&ratios, 4.0, SCREEN_MARGIN)
        .into_iter()
        .max_by(|x, y| ratios[x - 1].total_cmp(&ratios[y - 1]).then(y.cmp(x)))
        .ok_or_else(|| Error::Precondition("no admissible window".into()))?;
    let sup_ratio = ratios[best - 1];
    Ok(GaugeMassReport {
        max_level,
        cap,
        sup_ratio,
        pass: sup_ratio <= 4.0,
        witness: prof.window(best).expect("admissible"),
        windows_scanned: prof.scanned(),
    })
}

impl Gauge<f64> {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("serializable")
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let g: Self =
            serde_json::from_value(v.clone()).map_err(|e| Error::Parse(format!("gauge: {e}")))?;
        g.validate()?;
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{build_compact_type, natural_measure, select_subset, Selector};

    #[test]
    fn class_examples() {
        assert_eq!(Gauge::Power { s: 0.5 }.in_class(1.0), Membership::Yes);
        assert_eq!(Gauge::Power { s: 1.0 }.in_class(1.0), Membership::No);
        assert_eq!(
            Gauge::PowerLog { s: 1.0, t: 1.0 }.in_class(1.0),
            Membership::Yes
        );
        assert_eq!(
            Gauge::PowerLog { s: 1.0, t: -1.0 }.in_class(1.0),
            Membership::No
        );
        let tab = Gauge::tabulated(vec![0.5, 1.0], vec![0.5, 1.0]).unwrap();
        assert_eq!(tab.in_class(1.0), Membership::Inconclusive);
    }

    #[test]
    fn power_log_cutoff_monotone() {
        for (s, t) in [(1.0, 1.0), (0.5, 2.0), (1.0, -1.0), (2.0, 0.0)] {
            let g = Gauge::power_log(s, t).unwrap();
            assert!(g.check_monotone(1000, 1e-12, 10.0), "s={s} t={t}");
        }
    }

    #[test]
    fn phi_closed_form() {
        let g = Gauge::Power { s: 0.5 };
        for x in [1.0, 4.0, 10.0] {
            let p = phi_transform(&g, x, 1e-12).unwrap();
            assert!((p.value - (x * x + 1.0)).abs() < 1e-9, "x={x}");
        }
        assert!(phi_transform(&Gauge::Power { s: 1.0 }, 2.0, 1e-9).is_err());
    }

    #[test]
    fn phi_empty_sup() {
        let g = Gauge::Power { s: 0.0 };
        // r * 1 <= 1 holds up to r = 1
        let p = phi_transform(&g, 1.0, 1e-12).unwrap();
        assert!((p.value - 2.0).abs() < 1e-9);
        assert!(!p.empty_sup);
    }

    #[test]
    fn divide_power() {
        let phi = divide_by_power(&Gauge::Power { s: 1.5 }, 1).unwrap();
        assert_eq!(phi, Gauge::Power { s: 0.5 });
        assert!(divide_by_power(&Gauge::Power { s: 3.0 }, 1).is_err());
    }

    #[test]
    fn divide_power_log_inf_property() {
        let psi = Gauge::power_log(2.0, 1.0).unwrap();
        let phi = divide_by_power(&psi, 1).unwrap();
        assert_eq!(phi.in_class(1.0), Membership::Yes);
        let grid = log_grid(200, 1e-8, 1.0);
        for (i, &r) in grid.iter().enumerate() {
            let v = phi.eval(r);
            for &u in &grid[i..] {
                assert!(v <= psi.eval(u) / u * (1.0 + 1e-12));
            }
        }
        assert!(phi.check_monotone(1000, 1e-12, 1.0));
    }

    #[test]
    fn divide_tabulated_envelope() {
        let psi = Gauge::tabulated(vec![0.25, 0.5, 1.0], vec![0.1, 0.2, 0.9]).unwrap();
        let phi = divide_by_power(&psi, 1).unwrap();
        let Gauge::Tabulated { r, phi: v } = &phi else {
            panic!("tabulated")
        };
        assert_eq!(r.len(), ENVELOPE_POINTS);
        assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn schedule_first_level() {
        let s = gauge_schedule(&Gauge::Power { s: 0.5 }, 1, 3).unwrap();
        let expect = (BigUint::one() << 36u32) + BigUint::from(256u32);
        assert_eq!(s.levels[0].a, expect);
        assert!(s.all_ok());
        let re = recheck_power_schedule(&s, 1, 2).unwrap();
        assert!(re.iter().all(|r| r.growth && r.phi));
        let mut bad = s.clone();
        bad.levels[1].a -= 1u32;
        let r = &recheck_power_schedule(&bad, 1, 2).unwrap()[1];
        assert!(!(r.growth && r.phi));
        assert!(gauge_schedule(&Gauge::Power { s: 0.5 }, 1, 0)
            .unwrap()
            .levels
            .is_empty());
    }

    #[test]
    fn premeasure_examples() {
        let g = Gauge::Power {
            s: 2f64.ln() / 3f64.ln(),
        };
        let k = 5;
        let diams = vec![3f64.powi(-k); 1 << k];
        let v = hausdorff_premeasure(&diams, &g, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert_eq!(hausdorff_premeasure(&[], &g, 1.0).unwrap(), 0.0);
        assert!(hausdorff_premeasure(&[2.0], &g, 1.0).is_err());
    }

    #[test]
    fn mass_check_on_gauge_schedule() {
        let g = Gauge::Power { s: 0.125 };
        let sched = gauge_schedule(&g, 1, 1).unwrap();
        assert!(sched.all_ok());
        let tree = build_compact_type(&sched.a(), 1).unwrap();
        let b = sched.b()[0].to_u64().unwrap();
        let mass = natural_measure(&select_subset(&tree, &[b], &Selector::First).unwrap());
        let r = gauge_mass_check(&mass, &g, 1).unwrap();
        assert!(r.pass);
        let zero = gauge_mass_check(&mass, &Gauge::Power { s: 0.0 }, 1).unwrap();
        assert!(zero.pass && zero.sup_ratio <= 1.0);
    }

    #[test]
    fn json_round_trip() {
        let g = Gauge::power_log(0.5, 1.0).unwrap();
        let v = g.to_json();
        assert_eq!(v["family"], "power_log");
        assert_eq!(Gauge::from_json(&v).unwrap(), g);
        assert_eq!(
            Gauge::Power { s: 0.5 }.to_json(),
            json!({"family": "power", "s": 0.5})
        );
    }
}
