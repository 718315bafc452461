//! The randomized perturbation process on a fat Cantor set.
//!
//! At level `n` every piece draws independent `X, Y` uniform on
//! `{-2^-n, 2^-n}^d`, and `f_n = X - Y` on that piece. Partial sums are kept
//! as integers in units of `2^-n`, so every comparison against a dyadic ball
//! is exact.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore};
use serde_json::{json, Value};

use crate::cantor::CantorTree;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::num::{floor_rat, fmt_dyadic, fmt_rational, pow2, ratio_to_f64, ubig_to_rat, Rational};
use crate::par;
use crate::rng::{ns, CounterRng};

/// One level of the schedule `a_n = (2s)^(4^n)`, `b_n = (2s)^-(n+3) a_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaperLevel {
    pub d: u32,
    pub n: u32,
    /// `a_n = (2s)^a_exponent`.
    pub a_exponent: u128,
    pub b_exponent: u128,
    /// Explicit values when `a_n` has at most `PAPER_BITS_LIMIT` bits.
    pub a: Option<BigUint>,
    pub b: Option<BigUint>,
    /// `a_n >= (2s)^(8n) a_1..a_{n-1}`.
    pub growth_ok: bool,
    /// `a_n >= (a_1..a_{n+1} / b_1..b_{n+1})^(n+1)`.
    pub ratio_ok: bool,
}

pub const PAPER_BITS_LIMIT: u128 = 1 << 22;

pub fn paper_schedule(d: u32, n: u32) -> Result<PaperLevel> {
    if n == 0 {
        return Err(Error::invalid("n", "levels start at 1"));
    }
    if n > 60 {
        return Err(Error::TooLarge(format!("exponent 4^{n}")));
    }
    let a_exp = 4u128.pow(n);
    let b_exp = a_exp - (n as u128 + 3).min(a_exp);
    // exponents of 2s: sum_{k<n} 4^k = (4^n - 4) / 3
    let growth_rhs = 8 * n as u128 + (a_exp - 4) / 3;
    let m = n as u128 + 1;
    let ratio_rhs = m * (m * (m + 1) / 2 + 3 * m);
    let bits = a_exp * (d as u128 + 1);
    let base = BigUint::one() << (d + 1);
    let (a, b) = if bits <= PAPER_BITS_LIMIT {
        (
            Some(num_traits::pow(base.clone(), a_exp as usize)),
            Some(num_traits::pow(base, b_exp as usize)),
        )
    } else {
        (None, None)
    };
    Ok(PaperLevel {
        d,
        n,
        a_exponent: a_exp,
        b_exponent: b_exp,
        a,
        b,
        growth_ok: a_exp >= growth_rhs,
        ratio_ok: a_exp >= ratio_rhs,
    })
}

/// Base-`2s` exponent of the failure bound `p_n = (2s)^(m+n+5) / a_{m+n+1}`.
pub fn failure_bound_exponent(m: u32, n: u32) -> i128 {
    (m + n + 5) as i128 - 4i128.pow(m + n + 1)
}

/// Sampled perturbation on a materialized tree.
#[derive(Debug, Clone)]
pub struct RunRecord {
    d: usize,
    seed: u64,
    tree: CantorTree,
    /// `coeffs[n-1][piece * d + j]` is `f_n` in units of `2^-n`, one of -2, 0, 2.
    coeffs: Vec<Vec<i8>>,
    /// `sums[n-1][piece * d + j]` is `sum_{i<=n} f_i` in units of `2^-n`.
    sums: Vec<Vec<i64>>,
    drift: Option<Vec<GridFunction<Rational>>>,
    /// Drift at leaf hull midpoints, leaf-major.
    leaf_drift: Option<Vec<Rational>>,
    leaf_hulls_f: Vec<(f64, f64)>,
    leaf_hulls: OnceLock<Vec<(Rational, Rational)>>,
    /// `radix[n-1] = a_n`.
    radix: Vec<usize>,
}

/// Equality ignores whether the exact hulls have been built yet.
impl PartialEq for RunRecord {
    fn eq(&self, o: &Self) -> bool {
        self.d == o.d
            && self.seed == o.seed
            && self.tree == o.tree
            && self.coeffs == o.coeffs
            && self.sums == o.sums
            && self.drift == o.drift
            && self.leaf_drift == o.leaf_drift
    }
}

const SAMPLE_CHUNK: usize = 4096;

/// Draws `f_1 .. f_depth` on `tree`; `drift` holds one function per coordinate.
pub fn sample_run(
    tree: &CantorTree,
    d: usize,
    drift: Option<&[GridFunction<Rational>]>,
    seed: u64,
) -> Result<RunRecord> {
    let depth = tree.depth();
    if depth == 0 {
        return Err(Error::invalid("depth", "need a tree of depth >= 1"));
    }
    if d == 0 || d > 16 {
        return Err(Error::invalid("d", "need 1 <= d <= 16"));
    }
    if let Some(g) = drift {
        if g.len() != d {
            return Err(Error::invalid(
                "g",
                format!("need {d} coordinate functions"),
            ));
        }
    }
    let crng = CounterRng::new(seed);
    let mask = (1u64 << d) - 1;
    let mut coeffs = Vec::with_capacity(depth);
    let mut sums: Vec<Vec<i64>> = Vec::with_capacity(depth);
    for n in 1..=depth {
        let count = tree
            .level_size_u64(n)
            .filter(|&c| c <= crate::cantor::MATERIALIZE_LIMIT)
            .ok_or_else(|| Error::TooLarge(format!("level {n} of the run")))?
            as usize;
        let id = CounterRng::stream_id(ns::PERTURB, n as u64, 0);
        let chunks = par::map_chunks(count, SAMPLE_CHUNK, |range| {
            let mut r = crng.at(id, 2 * range.start as u64);
            let mut out = Vec::with_capacity(range.len() * d);
            for _ in range {
                let x = r.next_u64() & mask;
                let y = r.next_u64() & mask;
                for j in 0..d {
                    out.push((((x >> j) & 1) as i8 - ((y >> j) & 1) as i8) * 2);
                }
            }
            out
        });
        let c: Vec<i8> = chunks.concat();
        let a = tree.a_u64(n).expect("materialized") as usize;
        let s: Vec<i64> = match sums.last() {
            None => c.iter().map(|&v| v as i64).collect(),
            Some(prev) => (0..count * d)
                .map(|k| 2 * prev[(k / d / a) * d + k % d] + c[k] as i64)
                .collect(),
        };
        coeffs.push(c);
        sums.push(s);
    }
    let leaf_hulls_f = tree.level_hulls_f64(depth)?;
    let leaf_hulls = OnceLock::new();
    let leaf_drift = match drift {
        None => None,
        Some(g) => {
            let exact = leaf_hulls.get_or_init(|| tree.level_hulls(depth).expect("materialized"));
            let two = Rational::from_integer(2.into());
            Some(
                par::map_slice(exact, |(lo, hi)| {
                    let mid = (lo + hi) / &two;
                    g.iter().map(|gj| gj.eval(&mid)).collect::<Vec<_>>()
                })
                .concat(),
            )
        }
    };
    let radix = (1..=depth)
        .map(|n| tree.a_u64(n).expect("materialized") as usize)
        .collect();
    Ok(RunRecord {
        d,
        seed,
        tree: tree.clone(),
        coeffs,
        sums,
        drift: drift.map(<[_]>::to_vec),
        leaf_drift,
        leaf_hulls_f,
        leaf_hulls,
        radix,
    })
}

impl RunRecord {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tree(&self) -> &CantorTree {
        &self.tree
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_hulls_f.len()
    }

    /// Exact hulls of the deepest pieces, built on first use.
    pub fn leaf_hulls(&self) -> &[(Rational, Rational)] {
        self.leaf_hulls
            .get_or_init(|| self.tree.level_hulls(self.depth()).expect("materialized"))
    }

    /// Float hulls of the deepest pieces.
    pub fn leaf_hulls_f64(&self) -> &[(f64, f64)] {
        &self.leaf_hulls_f
    }

    /// Exact hull of one deepest piece.
    pub fn leaf_hull(&self, leaf: usize) -> (Rational, Rational) {
        if let Some(h) = self.leaf_hulls.get() {
            return h[leaf].clone();
        }
        let index = self
            .tree
            .flat_to_index(self.depth(), leaf as u64)
            .expect("leaf in range");
        self.tree.hull(&index).expect("leaf in range")
    }

    pub fn leaf_measure(&self) -> Rational {
        self.tree.piece_measure(self.depth())
    }

    /// `f_n` on level-`n` piece `piece`, coordinate `j`, in units of `2^-n`.
    pub fn coeff(&self, n: usize, piece: usize, j: usize) -> i8 {
        self.coeffs[n - 1][piece * self.d + j]
    }

    /// Largest `|f_n|` over pieces and coordinates, exact.
    pub fn max_amplitude(&self, n: usize) -> Rational {
        let m = self.coeffs[n - 1]
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0);
        Rational::from_integer(m.into()) * pow2(-(n as i64))
    }

    /// Ancestor at level `level` of deepest leaf `leaf`.
    pub fn ancestor(&self, leaf: usize, level: usize) -> usize {
        let mut idx = leaf;
        for n in (level + 1..=self.depth()).rev() {
            idx /= self.radix[n - 1];
        }
        idx
    }

    /// `sum_{i<=level} f_i` at `leaf`, coordinate `j`, in units of `2^-level`.
    pub fn partial_units(&self, leaf: usize, level: usize, j: usize) -> i64 {
        if level == 0 {
            return 0;
        }
        self.sums[level - 1][self.ancestor(leaf, level) * self.d + j]
    }

    fn drift_at(&self, leaf: usize, j: usize) -> Option<&Rational> {
        self.leaf_drift.as_ref().map(|v| &v[leaf * self.d + j])
    }

    /// Exact `g + sum_{i<=level} f_i` at `leaf` (drift taken at the hull midpoint).
    pub fn value(&self, leaf: usize, level: usize, j: usize) -> Rational {
        let s = Rational::from_integer(self.partial_units(leaf, level, j).into())
            * pow2(-(level as i64));
        match self.drift_at(leaf, j) {
            Some(g) => g + s,
            None => s,
        }
    }

    pub fn value_f64(&self, leaf: usize, level: usize, j: usize) -> f64 {
        let s = self.partial_units(leaf, level, j) as f64 * (-(level as f64)).exp2();
        s + self.drift_at(leaf, j).map(ratio_to_f64).unwrap_or(0.0)
    }

    /// Integer range of lattice points `C` (units `2^-level`) with `|value - C 2^-level| <= 2^-level`.
    fn ball_range(&self, leaf: usize, level: usize, j: usize) -> (i64, i64) {
        let s = self.partial_units(leaf, level, j);
        match self.drift_at(leaf, j) {
            None => (s - 1, s + 1),
            Some(g) => {
                let t = g * pow2(level as i64) + Rational::from_integer(s.into());
                let one = Rational::one();
                let lo = -floor_rat(&(-(&t - &one)));
                let hi = floor_rat(&(&t + &one));
                (lo.to_i64().expect("small"), hi.to_i64().expect("small"))
            }
        }
    }

    fn in_ball(&self, leaf: usize, level: usize, center: &[i64]) -> bool {
        (0..self.d).all(|j| {
            let (lo, hi) = self.ball_range(leaf, level, j);
            lo <= center[j] && center[j] <= hi
        })
    }

    /// Drift range per coordinate, `[0, 0]` without drift.
    pub fn drift_range(&self) -> Vec<(Rational, Rational)> {
        match &self.drift {
            None => vec![(Rational::zero(), Rational::zero()); self.d],
            Some(g) => g.iter().map(|gj| gj.min_max_value()).collect(),
        }
    }

    /// Largest drift Lipschitz constant over coordinates.
    pub fn drift_lip(&self) -> Result<Rational> {
        match &self.drift {
            None => Ok(Rational::zero()),
            Some(g) => {
                let mut best = Rational::zero();
                for gj in g {
                    let l = gj.lip()?;
                    if l > best {
                        best = l;
                    }
                }
                Ok(best)
            }
        }
    }

    /// Graph points `(x, h(x))` at both endpoints of every deepest hull.
    pub fn graph_points(&self) -> Vec<Vec<f64>> {
        let n = self.depth();
        let mut out = Vec::with_capacity(2 * self.leaf_count());
        for (leaf, &(lo, hi)) in self.leaf_hulls_f.iter().enumerate() {
            let ys: Vec<f64> = (0..self.d).map(|j| self.value_f64(leaf, n, j)).collect();
            for x in [lo, hi] {
                let mut p = vec![x];
                p.extend_from_slice(&ys);
                out.push(p);
            }
        }
        out
    }

    pub fn to_json(&self, max_pieces: usize) -> Value {
        let levels: Vec<Value> = (1..=self.depth())
            .map(|n| {
                let vals = if self.coeffs[n - 1].len() <= max_pieces * self.d {
                    Value::Array(
                        self.coeffs[n - 1]
                            .iter()
                            .map(|&c| Value::String(fmt_dyadic(c as i64, n as u32)))
                            .collect(),
                    )
                } else {
                    Value::Null
                };
                json!({"level": n, "f": vals, "max_abs": fmt_rational(&self.max_amplitude(n))})
            })
            .collect();
        json!({
            "schema": "perturb/1",
            "d": self.d,
            "seed": self.seed,
            "depth": self.depth(),
            "a": self.tree.a().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "epsilon": fmt_rational(self.tree.epsilon()),
            "drift": self.drift.as_ref().map(|g| g.iter().map(GridFunction::to_json).collect::<Vec<_>>()),
            "levels": levels,
        })
    }
}

/// The `2^d` balls `B(z + y, 2^-(n+1))`, `y in S_{n+1}`, covering `B(z, 2^-n)` in the max norm.
pub fn refine_cover(z: &[Rational], n: u32) -> Vec<(Vec<Rational>, Rational)> {
    let d = z.len();
    let r = pow2(-(n as i64 + 1));
    (0..1u64 << d)
        .map(|mask| {
            let c = (0..d)
                .map(|j| {
                    if (mask >> j) & 1 == 1 {
                        &z[j] + &r
                    } else {
                        &z[j] - &r
                    }
                })
                .collect();
            (c, r.clone())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub y: Vec<Rational>,
    pub tol: Rational,
    pub leaves: Vec<usize>,
    pub mass: Rational,
}

impl LevelSet {
    /// Exact hulls of the selected leaves.
    pub fn hulls(&self, run: &RunRecord) -> Vec<(Rational, Rational)> {
        self.leaves
            .iter()
            .map(|&i| run.leaf_hull(i))
            .collect()
    }
}

fn longest_embedded_hull(run: &RunRecord) -> Rational {
    let top = run
        .leaf_hulls_f
        .iter()
        .map(|(a, b)| b - a)
        .fold(0.0f64, f64::max);
    run
        .leaf_hulls_f
        .iter()
        .enumerate()
        .filter(|(_, (a, b))| b - a >= top * (1.0 - 1e-9))
        .map(|(i, _)| {
            let (a, b) = run.leaf_hull(i);
            b - a
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

/// Default tolerance `2^(1-depth) + Lip(g) * (longest leaf hull) / 2`.
pub fn default_tolerance(run: &RunRecord) -> Result<Rational> {
    let longest = if run.tree.is_embedded() {
        longest_embedded_hull(run)
    } else {
        run.tree.base_piece_len(run.depth())
    };
    Ok(
        pow2(1 - run.depth() as i64)
            + run.drift_lip()? * longest / Rational::from_integer(2.into()),
    )
}

/// Deepest leaves with `|h - y|_inf <= tol`.
pub fn level_set(run: &RunRecord, y: &[Rational], tol: Option<&Rational>) -> Result<LevelSet> {
    if y.len() != run.d {
        return Err(Error::invalid("y", format!("need {} coordinates", run.d)));
    }
    let tol = match tol {
        Some(t) if t.is_negative() => return Err(Error::invalid("tol", "must be >= 0")),
        Some(t) => t.clone(),
        None => default_tolerance(run)?,
    };
    let n = run.depth();
    let scale = pow2(n as i64);
    let ys: Vec<Rational> = y.iter().map(|v| v * &scale).collect();
    let t = &tol * &scale;
    let keep = if run.leaf_drift.is_none() {
        let bounds: Vec<(i64, i64)> = ys
            .iter()
            .map(|c| {
                let lo = -floor_rat(&(-(c - &t)));
                let hi = floor_rat(&(c + &t));
                (
                    lo.to_i64().unwrap_or(i64::MIN),
                    hi.to_i64().unwrap_or(i64::MAX),
                )
            })
            .collect();
        par::map_range(run.leaf_count(), |leaf| {
            bounds
                .iter()
                .enumerate()
                .all(|(j, (lo, hi))| (*lo..=*hi).contains(&run.partial_units(leaf, n, j)))
        })
    } else {
        par::map_range(run.leaf_count(), |leaf| {
            (0..run.d).all(|j| {
                let mut v = Rational::from_integer(run.partial_units(leaf, n, j).into()) - &ys[j];
                if let Some(g) = run.drift_at(leaf, j) {
                    v += g * &scale;
                }
                v.abs() <= t
            })
        })
    };
    let leaves: Vec<usize> = keep
        .iter()
        .enumerate()
        .filter(|(_, k)| **k)
        .map(|(i, _)| i)
        .collect();
    let mass = run.leaf_measure() * Rational::from_integer(leaves.len().into());
    Ok(LevelSet {
        y: y.to_vec(),
        tol,
        leaves,
        mass,
    })
}

/// Most frequent exact value of `h` over deepest leaves (smallest on ties).
pub fn modal_value(run: &RunRecord) -> Vec<Rational> {
    let n = run.depth();
    if run.leaf_drift.is_none() {
        let mut counts: BTreeMap<Vec<i64>, u64> = BTreeMap::new();
        for leaf in 0..run.leaf_count() {
            let v: Vec<i64> = (0..run.d).map(|j| run.partial_units(leaf, n, j)).collect();
            *counts.entry(v).or_default() += 1;
        }
        let best = counts.values().copied().max().unwrap_or(0);
        let scale = pow2(-(n as i64));
        return counts
            .into_iter()
            .find(|(_, c)| *c == best)
            .map(|(v, _)| {
                v.into_iter()
                    .map(|u| Rational::from_integer(u.into()) * &scale)
                    .collect()
            })
            .unwrap_or_default();
    }
    let mut counts: BTreeMap<Vec<Rational>, u64> = BTreeMap::new();
    for leaf in 0..run.leaf_count() {
        let v: Vec<Rational> = (0..run.d).map(|j| run.value(leaf, n, j)).collect();
        *counts.entry(v).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    counts
        .into_iter()
        .find(|(_, c)| *c == best)
        .map(|(v, _)| v)
        .unwrap_or_default()
}

/// Ball `B(center, 2^-(m+k))` found at stage `k` of the discovered open set.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub k: usize,
    /// Center in units of `2^-(m+k)`.
    pub center_units: Vec<i64>,
    pub parent: Option<usize>,
    /// `lambda(h_k^-1(B)) / lambda(K)`.
    pub mass: Rational,
}

impl Ball {
    pub fn center(&self, m: usize) -> Vec<Rational> {
        let s = pow2(-((m + self.k) as i64));
        self.center_units
            .iter()
            .map(|&c| Rational::from_integer(c.into()) * &s)
            .collect()
    }

    pub fn radius(&self, m: usize) -> Rational {
        pow2(-((m + self.k) as i64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveredSet {
    pub m: usize,
    /// Size of the initial net per coordinate range, as a count of lattice points.
    pub net_size: BigUint,
    pub balls: Vec<Ball>,
}

impl DiscoveredSet {
    /// Indices of balls at stage `k`.
    pub fn at_stage(&self, k: usize) -> Vec<usize> {
        self.balls
            .iter()
            .enumerate()
            .filter(|(_, b)| b.k == k)
            .map(|(i, _)| i)
            .collect()
    }

    /// Centers `c_0, .., c_k` from the root ball down to `ball`.
    pub fn chain(&self, ball: usize) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = Some(ball);
        while let Some(i) = cur {
            out.push(self.balls[i].center_units.clone());
            cur = self.balls[i].parent;
        }
        out.reverse();
        out
    }

    /// Increments `y_0, y_1, ..` of a chain; `y_0` in units `2^-m`, `y_j` in `{-1, 1}` units `2^-(m+j)`.
    pub fn increments(chain: &[Vec<i64>]) -> Vec<Vec<i64>> {
        chain
            .iter()
            .enumerate()
            .map(|(k, c)| {
                if k == 0 {
                    c.clone()
                } else {
                    c.iter()
                        .zip(&chain[k - 1])
                        .map(|(a, b)| a - 2 * b)
                        .collect()
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m,
            "net_size": self.net_size.to_string(),
            "balls": self.balls.iter().map(|b| json!({
                "k": b.k,
                "center": b.center(self.m).iter().map(fmt_rational).collect::<Vec<_>>(),
                "radius": fmt_rational(&b.radius(self.m)),
                "parent": b.parent,
                "mass": fmt_rational(&b.mass),
            })).collect::<Vec<_>>(),
        })
    }
}

fn threshold_met(count: u64, total: u64, base: &BigUint, exp: usize) -> bool {
    // count / total >= (2s)^-exp
    BigUint::from(count) * num_traits::pow(base.clone(), exp) >= BigUint::from(total)
}

/// Stage-`k` balls whose `h_k`-preimage has normalized measure `>= (2s)^-(m+k+2)`,
/// for `k = 0 .. depth - m`, where `h_k` sums the first `m + k` levels.
pub fn discovered_open_set(run: &RunRecord, m: usize) -> Result<DiscoveredSet> {
    if m == 0 || m >= run.depth() {
        return Err(Error::invalid(
            "m",
            format!("need 1 <= m < depth = {}", run.depth()),
        ));
    }
    let d = run.d;
    let base = BigUint::one() << (d + 1);
    let total = run.leaf_count() as u64;
    // net T_m: lattice of pitch 2^-m over [min g - 2, max g + 2]
    let scale = pow2(m as i64);
    let two = Rational::from_integer(2.into());
    let net: Vec<(i64, i64)> = run
        .drift_range()
        .iter()
        .map(|(lo, hi)| {
            let a = -floor_rat(&(-((lo - &two) * &scale)));
            let b = floor_rat(&((hi + &two) * &scale));
            (a.to_i64().expect("small"), b.to_i64().expect("small"))
        })
        .collect();
    let net_size = net.iter().fold(BigUint::one(), |acc, (a, b)| {
        acc * BigUint::from((b - a + 1) as u64)
    });

    let mut balls: Vec<Ball> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    for k in 0..=(run.depth() - m) {
        let level = m + k;
        let counts = lattice_counts(run, level);
        let exp = m + k + 2;
        let mut next = Vec::new();
        if k == 0 {
            for (c, &cnt) in &counts {
                let in_net = c.iter().zip(&net).all(|(v, (a, b))| a <= v && v <= b);
                if in_net && threshold_met(cnt, total, &base, exp) {
                    next.push(balls.len());
                    balls.push(Ball {
                        k,
                        center_units: c.clone(),
                        parent: None,
                        mass: ratio(cnt, total),
                    });
                }
            }
        } else {
            let mut seen: BTreeMap<Vec<i64>, ()> = BTreeMap::new();
            for &p in &frontier {
                let pc = balls[p].center_units.clone();
                for mask in 0..1u64 << d {
                    let c: Vec<i64> = (0..d)
                        .map(|j| 2 * pc[j] + if (mask >> j) & 1 == 1 { 1 } else { -1 })
                        .collect();
                    if seen.contains_key(&c) {
                        continue;
                    }
                    let cnt = counts.get(&c).copied().unwrap_or(0);
                    if threshold_met(cnt, total, &base, exp) {
                        seen.insert(c.clone(), ());
                        next.push(balls.len());
                        balls.push(Ball {
                            k,
                            center_units: c,
                            parent: Some(p),
                            mass: ratio(cnt, total),
                        });
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(DiscoveredSet { m, net_size, balls })
}

fn ratio(a: u64, b: u64) -> Rational {
    Rational::new(a.into(), b.into())
}

/// Number of leaves in every lattice ball of radius `2^-level` centred on the `2^-level` lattice.
fn lattice_counts(run: &RunRecord, level: usize) -> BTreeMap<Vec<i64>, u64> {
    let d = run.d;
    let parts = par::map_chunks(run.leaf_count(), 8192, |range| {
        let mut local: HashMap<Vec<i64>, u64> = HashMap::new();
        for leaf in range {
            let ranges: Vec<(i64, i64)> = (0..d).map(|j| run.ball_range(leaf, level, j)).collect();
            let mut c: Vec<i64> = ranges.iter().map(|r| r.0).collect();
            loop {
                *local.entry(c.clone()).or_default() += 1;
                let mut j = 0;
                while j < d {
                    if c[j] < ranges[j].1 {
                        c[j] += 1;
                        break;
                    }
                    c[j] = ranges[j].0;
                    j += 1;
                }
                if j == d {
                    break;
                }
            }
        }
        local
    });
    let mut out = BTreeMap::new();
    for p in parts {
        for (k, v) in p {
            *out.entry(k).or_default() += v;
        }
    }
    out
}

/// Node of a witness tree: a piece of the parent fat Cantor tree.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessNode {
    /// Flat index at its level of the parent tree.
    pub index: usize,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessTree {
    pub m: usize,
    pub k: usize,
    /// Target point the chain converges to (the stage-`k` center).
    pub target: Vec<Rational>,
    /// Centers `c_k, .., c_{depth-m}` in units `2^-(m+i)`.
    pub centers: Vec<Vec<i64>>,
    /// `levels[i]` holds nodes at tree level `m + k + i`.
    pub levels: Vec<Vec<WitnessNode>>,
    /// Smallest number of kept children per node, per level transition.
    pub min_branching: Vec<usize>,
    /// `b_{m+k+i}` when the run used `paper_schedule`; informational.
    pub bound: Rational,
}

impl WitnessTree {
    /// Leaf flat indices at the deepest level.
    pub fn leaves(&self) -> Vec<usize> {
        self.levels
            .last()
            .map(|l| l.iter().map(|n| n.index).collect())
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m, "k": self.k,
            "target": self.target.iter().map(fmt_rational).collect::<Vec<_>>(),
            "bound": fmt_rational(&self.bound),
            "min_branching": self.min_branching,
            "levels": self.levels.iter().map(|l| l.len()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessFailure {
    /// Tree level (parent-tree level) of the first starved node.
    pub level: usize,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessOutcome {
    Tree(WitnessTree),
    Failure(WitnessFailure),
}

/// Rebuilds a Cantor set inside the fiber over the chain ending at `ball`.
///
/// Centers past stage `k` step toward the target (ties step up). Every
/// qualifying child is kept, dead branches are pruned bottom-up, and the
/// stage-`k` roots are tried in index order.
pub fn witness_fiber_cantor(
    run: &RunRecord,
    set: &DiscoveredSet,
    ball: usize,
) -> Result<WitnessOutcome> {
    let m = set.m;
    let b = set
        .balls
        .get(ball)
        .ok_or_else(|| Error::invalid("ball", "index out of range"))?;
    let k = b.k;
    let d = run.d;
    let depth = run.depth();
    let last = depth - m;
    let target_units = b.center_units.clone();
    // centers c_k .. c_last in units 2^-(m+i)
    let mut centers = vec![target_units.clone()];
    for i in k + 1..=last {
        let prev = centers.last().expect("non-empty");
        let shift = i - k;
        let c: Vec<i64> = (0..d)
            .map(|j| {
                let p2 = 2 * prev[j];
                let t = target_units[j] << shift;
                if t >= p2 {
                    p2 + 1
                } else {
                    p2 - 1
                }
            })
            .collect();
        centers.push(c);
    }
    // survive[leaf] = number of consecutive constraints k, k+1, .. satisfied
    let survive: Vec<usize> = par::map_range(run.leaf_count(), |leaf| {
        let mut s = 0;
        for (i, c) in centers.iter().enumerate() {
            if run.in_ball(leaf, m + k + i, c) {
                s += 1;
            } else {
                break;
            }
        }
        s
    });
    let leaves_below = |level: usize| -> usize {
        (level + 1..=depth)
            .map(|n| run.tree.a_u64(n).expect("materialized") as usize)
            .product()
    };
    let base = BigUint::one() << (d + 1);
    // qualifying test for node `idx` at tree level m+k+i: fraction of its leaves surviving i+1 constraints
    let qualifies = |i: usize, idx: usize| -> bool {
        let level = m + k + i;
        let per = leaves_below(level);
        let cnt = survive[idx * per..(idx + 1) * per]
            .iter()
            .filter(|&&s| s > i)
            .count() as u64;
        threshold_met(cnt, per as u64, &base, m + k + i + 2)
    };
    let root_level = m + k;
    let roots = run.tree.level_size_u64(root_level).expect("materialized") as usize;
    let mut first_failure: Option<WitnessFailure> = None;
    for root in 0..roots {
        if !qualifies(0, root) {
            continue;
        }
        let mut levels: Vec<Vec<WitnessNode>> = vec![vec![WitnessNode {
            index: root,
            parent: None,
        }]];
        for i in 1..=last - k {
            let a = run.tree.a_u64(root_level + i).expect("materialized") as usize;
            let prev = levels.last().expect("non-empty");
            let mut next = Vec::new();
            for (pi, node) in prev.iter().enumerate() {
                for c in 0..a {
                    let idx = node.index * a + c;
                    if qualifies(i, idx) {
                        next.push(WitnessNode {
                            index: idx,
                            parent: Some(pi),
                        });
                    }
                }
            }
            levels.push(next);
        }
        // prune nodes without children, bottom-up
        for i in (0..levels.len() - 1).rev() {
            let mut has_child = vec![false; levels[i].len()];
            for n in &levels[i + 1] {
                has_child[n.parent.expect("non-root")] = true;
            }
            if let Some(p) = has_child.iter().position(|h| !h) {
                if first_failure.is_none() && !has_child.iter().any(|h| *h) {
                    first_failure = Some(WitnessFailure {
                        level: root_level + i,
                        index: levels[i][p].index,
                        reason: "no child meets the conditional measure threshold".into(),
                    });
                }
            }
            let mut remap = vec![usize::MAX; levels[i].len()];
            let mut kept = Vec::new();
            for (j, n) in levels[i].iter().enumerate() {
                if has_child[j] {
                    remap[j] = kept.len();
                    kept.push(n.clone());
                }
            }
            levels[i] = kept;
            for n in &mut levels[i + 1] {
                n.parent = Some(remap[n.parent.expect("non-root")]);
            }
        }
        if levels[0].is_empty() {
            continue;
        }
        let min_branching = (1..levels.len())
            .map(|i| {
                let mut cnt = vec![0usize; levels[i - 1].len()];
                for n in &levels[i] {
                    cnt[n.parent.expect("non-root")] += 1;
                }
                cnt.into_iter().min().unwrap_or(0)
            })
            .collect();
        let target = b.center(m);
        return Ok(WitnessOutcome::Tree(WitnessTree {
            m,
            k,
            target,
            centers,
            levels,
            min_branching,
            bound: Rational::one() / ubig_to_rat(&num_traits::pow(base.clone(), m + k + 2)),
        }));
    }
    Ok(WitnessOutcome::Failure(first_failure.unwrap_or(
        WitnessFailure {
            level: root_level,
            index: 0,
            reason: "no root piece meets the conditional measure threshold".into(),
        },
    )))
}

/// Exact recheck `|h - target|_inf <= 2^(1-depth) + 2^-(m+k)` on every witness leaf.
pub fn recheck_witness(run: &RunRecord, w: &WitnessTree) -> Vec<usize> {
    let n = run.depth();
    let bound = pow2(1 - n as i64) + pow2(-((w.m + w.k) as i64));
    w.leaves()
        .into_iter()
        .filter(|&leaf| (0..run.d).any(|j| (run.value(leaf, n, j) - &w.target[j]).abs() > bound))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: usize,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Exact masses, bin-major with the first coordinate slowest.
    pub masses: Vec<Rational>,
    pub bin_volume: f64,
}

impl Histogram {
    pub fn total(&self) -> Rational {
        self.masses.iter().sum()
    }

    pub fn density(&self, i: usize) -> f64 {
        ratio_to_f64(&self.masses[i]) / self.bin_volume
    }

    pub fn max_density(&self) -> f64 {
        (0..self.masses.len())
            .map(|i| self.density(i))
            .fold(0.0, f64::max)
    }

    /// Fraction of total mass lying in bins with density `<= level`.
    pub fn fraction_le(&self, level: f64) -> f64 {
        let total = ratio_to_f64(&self.total());
        let kept: f64 = (0..self.masses.len())
            .filter(|&i| self.density(i) <= level)
            .map(|i| ratio_to_f64(&self.masses[i]))
            .sum();
        if total == 0.0 {
            1.0
        } else {
            kept / total
        }
    }

    pub fn to_json(&self) -> Value {
        json!({"bins": self.bins, "lo": self.lo, "hi": self.hi, "bin_volume": self.bin_volume,
               "masses": self.masses.iter().map(fmt_rational).collect::<Vec<_>>(),
               "max_density": self.max_density()})
    }
}

/// Pushes leaf measures through `h` into a regular grid over the bounding box of its range.
pub fn occupation_histogram(run: &RunRecord, bins: usize) -> Result<Histogram> {
    if bins < 2 {
        return Err(Error::invalid("bins", "need at least 2 bins per axis"));
    }
    let d = run.d;
    let n = run.depth();
    let vals: Vec<f64> = (0..run.leaf_count())
        .flat_map(|leaf| (0..d).map(move |j| (leaf, j)))
        .map(|(l, j)| run.value_f64(l, n, j))
        .collect();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (i, v) in vals.iter().enumerate() {
        lo[i % d] = lo[i % d].min(*v);
        hi[i % d] = hi[i % d].max(*v);
    }
    for j in 0..d {
        if hi[j] <= lo[j] {
            lo[j] -= 0.5;
            hi[j] += 0.5;
        }
    }
    let total_bins = bins
        .checked_pow(d as u32)
        .filter(|&t| t <= 1 << 24)
        .ok_or_else(|| Error::TooLarge("histogram".into()))?;
    let mut counts = vec![0u64; total_bins];
    for leaf in 0..run.leaf_count() {
        let mut idx = 0usize;
        for j in 0..d {
            let t = (vals[leaf * d + j] - lo[j]) / (hi[j] - lo[j]);
            let b = ((t * bins as f64).floor() as usize).min(bins - 1);
            idx = idx * bins + b;
        }
        counts[idx] += 1;
    }
    let w = run.leaf_measure();
    let masses = counts
        .iter()
        .map(|&c| &w * Rational::from_integer(c.into()))
        .collect();
    let bin_volume = (0..d).map(|j| (hi[j] - lo[j]) / bins as f64).product();
    Ok(Histogram {
        bins,
        lo,
        hi,
        masses,
        bin_volume,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevReport {
    pub failures: u64,
    pub trials: u64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error of `empirical` at the bound.
    pub sigma: f64,
}

impl ChebyshevReport {
    pub fn to_json(&self) -> Value {
        json!({"failures": self.failures, "trials": self.trials, "empirical": self.empirical,
               "bound": self.bound, "sigma": self.sigma})
    }
}

/// Simulates `u` draws with `P(xi = j) = p` for `j = 1..v` and counts trials where some
/// symbol appears fewer than `u p / 2` times.
pub fn chebyshev_bound_mc(
    u: u64,
    v: u64,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<ChebyshevReport> {
    if u == 0 || v == 0 || trials == 0 {
        return Err(Error::invalid("u", "u, v and trials must be >= 1"));
    }
    if !(p > 0.0) || p * v as f64 > 1.0 + 1e-15 {
        return Err(Error::invalid("p", "need 0 < p <= 1/v"));
    }
    let c = CounterRng::new(seed);
    let half = u as f64 * p / 2.0;
    let fails = par::map_range(trials as usize, |t| {
        let mut r = c.stream(CounterRng::stream_id(ns::MONTE_CARLO, 0, t as u64));
        let mut counts = vec![0u64; v as usize];
        for _ in 0..u {
            let x: f64 = r.gen();
            let j = (x / p).floor() as u64;
            if j < v {
                counts[j as usize] += 1;
            }
        }
        counts.iter().any(|&k| (k as f64) < half)
    });
    let failures = fails.iter().filter(|f| **f).count() as u64;
    let bound = 4.0 * v as f64 / (u as f64 * p);
    let q = bound.min(1.0);
    Ok(ChebyshevReport {
        failures,
        trials,
        empirical: failures as f64 / trials as f64,
        bound,
        sigma: (q * (1.0 - q) / trials as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::build_fat_cantor;
    use crate::num::{big, int, rat};

    fn tree(a: &[u64]) -> CantorTree {
        build_fat_cantor(
            &a.iter().map(|&x| big(x)).collect::<Vec<_>>(),
            &rat(1, 4),
            a.len(),
        )
        .unwrap()
    }

    #[test]
    fn paper_schedule_examples() {
        let l1 = paper_schedule(1, 1).unwrap();
        assert_eq!(l1.a, Some(big(256)));
        assert_eq!(l1.b, Some(big(1)));
        let l2 = paper_schedule(1, 2).unwrap();
        assert_eq!(l2.a, Some(BigUint::one() << 32u32));
        assert_eq!(l2.b, Some(BigUint::one() << 22u32));
        assert_eq!(paper_schedule(2, 1).unwrap().a, Some(big(4096)));
        assert!(!l1.growth_ok);
        assert!(paper_schedule(1, 4).unwrap().growth_ok);
    }

    #[test]
    fn amplitude_and_determinism() {
        let t = tree(&[6, 6, 6]);
        let r1 = sample_run(&t, 1, None, 11).unwrap();
        let r2 = sample_run(&t, 1, None, 11).unwrap();
        assert_eq!(r1, r2);
        for n in 1..=3 {
            assert!(r1.max_amplitude(n) <= pow2(1 - n as i64));
        }
        assert_ne!(r1, sample_run(&t, 1, None, 12).unwrap());
    }

    #[test]
    fn partial_sums_consistent() {
        let t = tree(&[3, 4]);
        let r = sample_run(&t, 2, None, 5).unwrap();
        for leaf in 0..12 {
            for j in 0..2 {
                let p = r.ancestor(leaf, 1);
                let direct = 2 * r.coeff(1, p, j) as i64 + r.coeff(2, leaf, j) as i64;
                assert_eq!(r.partial_units(leaf, 2, j), direct);
            }
        }
    }

    #[test]
    fn mean_near_zero() {
        let t = tree(&[128, 128]);
        let r = sample_run(&t, 1, None, 3).unwrap();
        let n = 2;
        let cnt = 128 * 128;
        let mean: f64 = (0..cnt)
            .map(|p| r.coeff(n, p, 0) as f64 * 0.25)
            .sum::<f64>()
            / cnt as f64;
        assert!(mean.abs() <= 3.0 * 0.5 / (cnt as f64).sqrt());
    }

    #[test]
    fn refine_cover_instance() {
        let balls = refine_cover(&[int(0)], 0);
        assert_eq!(balls.len(), 2);
        assert!(balls.contains(&(vec![rat(-1, 2)], rat(1, 2))));
        assert!(balls.contains(&(vec![rat(1, 2)], rat(1, 2))));
    }

    #[test]
    fn level_set_basic() {
        let t = tree(&[2]);
        let r = sample_run(&t, 1, None, 1).unwrap();
        let y = vec![r.value(1, 1, 0)];
        let ls = level_set(&r, &y, Some(&int(0))).unwrap();
        assert!(ls.leaves.contains(&1));
        let far = level_set(&r, &[int(10)], None).unwrap();
        assert!(far.leaves.is_empty());
    }

    #[test]
    fn histogram_conserves_mass() {
        let t = tree(&[6, 6, 6]);
        let r = sample_run(&t, 1, None, 2).unwrap();
        let h = occupation_histogram(&r, 16).unwrap();
        assert_eq!(h.total(), rat(3, 4));
        assert!(occupation_histogram(&r, 1).is_err());
    }

    #[test]
    fn discovered_and_witness() {
        let t = tree(&[6, 6, 6, 6]);
        let r = sample_run(&t, 1, None, 9).unwrap();
        let set = discovered_open_set(&r, 1).unwrap();
        assert!(!set.at_stage(0).is_empty());
        for (i, b) in set.balls.iter().enumerate() {
            if let Some(p) = b.parent {
                let pc = &set.balls[p].center_units;
                for j in 0..1 {
                    assert_eq!((b.center_units[j] - 2 * pc[j]).abs(), 1, "ball {i}");
                }
            }
        }
        let root = set.at_stage(0)[0];
        match witness_fiber_cantor(&r, &set, root).unwrap() {
            WitnessOutcome::Tree(w) => assert!(recheck_witness(&r, &w).is_empty()),
            WitnessOutcome::Failure(f) => panic!("unexpected failure {f:?}"),
        }
        assert!(discovered_open_set(&r, 4).is_err());
    }

    #[test]
    fn chebyshev_examples() {
        let rep = chebyshev_bound_mc(100, 2, 0.25, 2000, 1).unwrap();
        assert!((rep.bound - 0.32).abs() < 1e-12);
        assert!(rep.empirical <= rep.bound + 3.0 * rep.sigma);
        let det = chebyshev_bound_mc(10, 1, 1.0, 50, 1).unwrap();
        assert_eq!(det.failures, 0);
        assert!(chebyshev_bound_mc(10, 2, 0.75, 10, 1).is_err());
    }
}
