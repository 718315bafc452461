//! Fat Cantor sets, (a_n, b_n)-type subsets, natural measures and mass bounds.
//!
//! Geometry is exact. At stage `n` every current interval loses `a_n - 1`
//! equal, equally spaced open gaps; the removed length summed over the stage
//! is `eps * 2^-n`. All pieces of one level are translates of each other, so
//! each carries exactly `lambda(K) / (a_1 ... a_n)`. A stage with `a_n = 1`
//! trims its budget symmetrically from both ends instead.

use std::collections::BTreeSet;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::IntervalUnion;
use crate::num::{fmt_rational, pow2, product, ratio_to_f64, ubig_to_rat, Rational, Scalar};
use crate::par;
use crate::rng::{ns, CounterRng};

/// Largest number of nodes materialized on one level.
pub const MATERIALIZE_LIMIT: u64 = 1 << 24;

/// Per-level branching `a` and optional selected branching `b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub a: Vec<BigUint>,
    pub b: Option<Vec<BigUint>>,
}

impl Schedule {
    pub fn new(a: Vec<BigUint>, b: Option<Vec<BigUint>>) -> Result<Self> {
        if a.iter().any(Zero::is_zero) {
            return Err(Error::invalid("a", "branching entries must be >= 1"));
        }
        if let Some(b) = &b {
            if b.len() != a.len() {
                return Err(Error::invalid("b", "length must equal length of a"));
            }
            for (n, (an, bn)) in a.iter().zip(b).enumerate() {
                if bn.is_zero() || bn > an {
                    return Err(Error::invalid(
                        "b",
                        format!("need 1 <= b_{} <= a_{}", n + 1, n + 1),
                    ));
                }
            }
        }
        Ok(Self { a, b })
    }

    pub fn from_u64(a: &[u64], b: Option<&[u64]>) -> Result<Self> {
        Self::new(
            a.iter().map(|&x| BigUint::from(x)).collect(),
            b.map(|b| b.iter().map(|&x| BigUint::from(x)).collect()),
        )
    }

    pub fn depth(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Hulls of distinct pieces are disjoint.
    Fat,
    /// Hulls of neighbouring pieces may share an endpoint (no gaps).
    CompactType,
}

#[derive(Debug, Clone, PartialEq)]
struct Level {
    a: BigUint,
    len: Rational,
    step: Rational,
    offset: Rational,
    gap: Rational,
    len_f: f64,
    step_f: f64,
    offset_f: f64,
}

/// Piecewise-affine inverse of `x -> lambda((-inf, x] ∩ C)` for an interval union `C`.
#[derive(Debug, Clone, PartialEq)]
struct Embedding {
    parts: Vec<(Rational, Rational)>,
    cum: Vec<Rational>,
    total: Rational,
}

impl Embedding {
    fn new(c: &IntervalUnion<Rational>) -> Result<Self> {
        let parts: Vec<_> = c.parts().iter().filter(|(a, b)| a < b).cloned().collect();
        let mut cum = Vec::with_capacity(parts.len());
        let mut acc = Rational::zero();
        for (a, b) in &parts {
            cum.push(acc.clone());
            acc += b - a;
        }
        if acc.is_zero() {
            return Err(Error::invalid("C", "total length must be positive"));
        }
        Ok(Self {
            parts,
            cum,
            total: acc,
        })
    }

    /// `lower = true` picks the largest preimage (start of a piece), else the smallest.
    fn inv(&self, u: &Rational, lower: bool) -> Rational {
        let i = if lower {
            self.cum.partition_point(|c| c <= u).saturating_sub(1)
        } else {
            let j = self
                .parts
                .iter()
                .zip(&self.cum)
                .position(|((a, b), c)| *u <= c + (b - a));
            j.unwrap_or(self.parts.len() - 1)
        };
        &self.parts[i].0 + (u - &self.cum[i])
    }

    fn inv_f64(&self, u: f64, lower: bool) -> f64 {
        let cum: Vec<f64> = self.cum.iter().map(ratio_to_f64).collect();
        let i = if lower {
            cum.partition_point(|c| *c <= u).saturating_sub(1)
        } else {
            let mut j = self.parts.len() - 1;
            for (k, ((a, b), c)) in self.parts.iter().zip(&cum).enumerate() {
                if u <= c + ratio_to_f64(&(b - a)) {
                    j = k;
                    break;
                }
            }
            j
        };
        ratio_to_f64(&self.parts[i].0) + (u - cum[i])
    }
}

/// Hierarchical elementary pieces of an (a_n)-type fat (or compact-type) Cantor set.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorTree {
    variant: Variant,
    epsilon: Rational,
    levels: Vec<Level>,
    prefix: Vec<BigUint>,
    embedding: Option<Embedding>,
    total_measure: Rational,
}

fn base_levels(a: &[BigUint], eps: &Rational, depth: usize) -> Vec<Level> {
    let mut levels = Vec::with_capacity(depth);
    let mut prev_len = Rational::one();
    let mut count = BigUint::one();
    for (n, an) in a.iter().take(depth).enumerate() {
        let r = eps * pow2(-(n as i64 + 1)) / ubig_to_rat(&count);
        let (len, gap, offset) = if an.is_one() {
            (
                &prev_len - &r,
                Rational::zero(),
                &r / Rational::from_integer(2.into()),
            )
        } else {
            let am1 = ubig_to_rat(&(an - 1u32));
            let gap = &r / am1;
            ((&prev_len - &r) / ubig_to_rat(an), gap, Rational::zero())
        };
        let step = &len + &gap;
        levels.push(Level {
            a: an.clone(),
            len_f: ratio_to_f64(&len),
            step_f: ratio_to_f64(&step),
            offset_f: ratio_to_f64(&offset),
            len: len.clone(),
            step,
            offset,
            gap,
        });
        prev_len = len;
        count *= an;
    }
    levels
}

fn prefixes(a: &[BigUint], depth: usize) -> Vec<BigUint> {
    let mut p = vec![BigUint::one()];
    for an in a.iter().take(depth) {
        let next = p.last().expect("non-empty") * an;
        p.push(next);
    }
    p
}

fn check_depth(a: &[BigUint], depth: usize) -> Result<()> {
    if depth > a.len() {
        return Err(Error::invalid(
            "depth",
            format!("depth {depth} exceeds schedule length {}", a.len()),
        ));
    }
    if a.iter().take(depth).any(Zero::is_zero) {
        return Err(Error::invalid("a", "zero branching"));
    }
    Ok(())
}

/// Canonical fat Cantor set in [0, 1] with `lambda(K) = 1 - epsilon`.
pub fn build_fat_cantor(a: &[BigUint], epsilon: &Rational, depth: usize) -> Result<CantorTree> {
    if !(epsilon > &Rational::zero() && epsilon < &Rational::one()) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    check_depth(a, depth)?;
    Ok(CantorTree {
        variant: Variant::Fat,
        epsilon: epsilon.clone(),
        levels: base_levels(a, epsilon, depth),
        prefix: prefixes(a, depth),
        embedding: None,
        total_measure: Rational::one() - epsilon,
    })
}

/// Compact-type tree on [0, 1]: no gaps, neighbouring pieces touch, `lambda(K) = 1`.
pub fn build_compact_type(a: &[BigUint], depth: usize) -> Result<CantorTree> {
    check_depth(a, depth)?;
    let zero = Rational::zero();
    Ok(CantorTree {
        variant: Variant::CompactType,
        epsilon: zero.clone(),
        levels: base_levels(a, &zero, depth),
        prefix: prefixes(a, depth),
        embedding: None,
        total_measure: Rational::one(),
    })
}

/// Triadic intervals of [0, 1] down to `depth`.
pub fn triadic_tree(depth: usize) -> CantorTree {
    build_compact_type(&vec![BigUint::from(3u32); depth], depth).expect("valid schedule")
}

/// Pulls the canonical construction with budget `epsilon / lambda(C)` back into `C`.
pub fn embed_in_compact(
    c: &IntervalUnion<Rational>,
    a: &[BigUint],
    epsilon: &Rational,
    depth: usize,
) -> Result<CantorTree> {
    let emb = Embedding::new(c)?;
    if epsilon <= &Rational::zero() || epsilon >= &emb.total {
        return Err(Error::invalid("epsilon", "must lie in (0, lambda(C))"));
    }
    check_depth(a, depth)?;
    let base_eps = epsilon / &emb.total;
    Ok(CantorTree {
        variant: Variant::Fat,
        levels: base_levels(a, &base_eps, depth),
        prefix: prefixes(a, depth),
        total_measure: &emb.total - epsilon,
        epsilon: epsilon.clone(),
        embedding: Some(emb),
    })
}

impl CantorTree {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn epsilon(&self) -> &Rational {
        &self.epsilon
    }

    pub fn a(&self) -> Vec<BigUint> {
        self.levels.iter().map(|l| l.a.clone()).collect()
    }

    /// `a_n` for 1-based level `n`, if it fits in u64.
    pub fn a_u64(&self, n: usize) -> Option<u64> {
        self.levels.get(n.checked_sub(1)?)?.a.to_u64()
    }

    pub fn total_measure(&self) -> &Rational {
        &self.total_measure
    }

    /// Number of level-`n` pieces, `a_1 ... a_n`.
    pub fn level_size(&self, n: usize) -> &BigUint {
        &self.prefix[n]
    }

    pub fn level_size_u64(&self, n: usize) -> Option<u64> {
        self.prefix[n].to_u64()
    }

    pub fn piece_measure(&self, n: usize) -> Rational {
        &self.total_measure / ubig_to_rat(&self.prefix[n])
    }

    /// Hull length of a level-`n` piece before any embedding.
    pub fn base_piece_len(&self, n: usize) -> Rational {
        if n == 0 {
            Rational::one()
        } else {
            self.levels[n - 1].len.clone()
        }
    }

    /// Length of each of the gaps opened between siblings at stage `n`.
    pub fn base_gap(&self, n: usize) -> Rational {
        self.levels[n - 1].gap.clone()
    }

    pub fn is_embedded(&self) -> bool {
        self.embedding.is_some()
    }

    fn check_index(&self, index: &[u64]) -> Result<()> {
        if index.len() > self.depth() {
            return Err(Error::invalid("index", "longer than tree depth"));
        }
        for (k, j) in index.iter().enumerate() {
            if BigUint::from(*j) >= self.levels[k].a {
                return Err(Error::invalid(
                    "index",
                    format!("entry {j} out of range at level {}", k + 1),
                ));
            }
        }
        Ok(())
    }

    fn map_hull(&self, lo: Rational, hi: Rational) -> (Rational, Rational) {
        match &self.embedding {
            None => (lo, hi),
            Some(e) => (
                e.inv(&(lo * &e.total), true),
                e.inv(&(hi * &e.total), false),
            ),
        }
    }

    fn map_hull_f64(&self, lo: f64, hi: f64) -> (f64, f64) {
        match &self.embedding {
            None => (lo, hi),
            Some(e) => {
                let t = ratio_to_f64(&e.total);
                (e.inv_f64(lo * t, true), e.inv_f64(hi * t, false))
            }
        }
    }

    /// Exact convex hull of the piece addressed by 0-based `index` (level = `index.len()`).
    pub fn hull(&self, index: &[u64]) -> Result<(Rational, Rational)> {
        self.check_index(index)?;
        let mut lo = Rational::zero();
        for (k, j) in index.iter().enumerate() {
            let l = &self.levels[k];
            lo += &l.offset + &l.step * Rational::from_integer((*j).into());
        }
        let hi = &lo + self.base_piece_len(index.len());
        Ok(self.map_hull(lo, hi))
    }

    pub fn flat_to_index(&self, n: usize, mut flat: u64) -> Result<Vec<u64>> {
        let mut out = vec![0u64; n];
        for k in (0..n).rev() {
            let a = self
                .a_u64(k + 1)
                .ok_or_else(|| Error::TooLarge("branching exceeds u64".into()))?;
            out[k] = flat % a;
            flat /= a;
        }
        if flat != 0 {
            return Err(Error::invalid("flat", "index out of range"));
        }
        Ok(out)
    }

    fn materializable(&self, n: usize) -> Result<u64> {
        let size = self.level_size_u64(n).filter(|&s| s <= MATERIALIZE_LIMIT);
        size.ok_or_else(|| Error::TooLarge(format!("level {n} has {} pieces", self.prefix[n])))
    }

    /// Common denominator, piece-start numerators and piece-length numerator on level `n`.
    fn level_numerators(&self, n: usize) -> (BigInt, Vec<BigInt>, BigInt) {
        let len = self.base_piece_len(n);
        let den = self.levels[..n]
            .iter()
            .flat_map(|l| [l.offset.denom(), l.step.denom()])
            .fold(len.denom().clone(), |acc, d| acc.lcm(d));
        let scale = |r: &Rational| r.numer() * (&den / r.denom());
        let mut los = vec![BigInt::zero()];
        for l in &self.levels[..n] {
            let a = l.a.to_u64().expect("checked");
            let (off, step) = (scale(&l.offset), scale(&l.step));
            let mut next = Vec::with_capacity(los.len() * a as usize);
            for lo in &los {
                let mut x = lo + &off;
                for _ in 0..a {
                    next.push(x.clone());
                    x += &step;
                }
            }
            los = next;
        }
        let len = scale(&len);
        (den, los, len)
    }

    /// Exact hulls of all level-`n` pieces in flat (lexicographic) order.
    pub fn level_hulls(&self, n: usize) -> Result<Vec<(Rational, Rational)>> {
        self.materializable(n)?;
        let (den, los, len) = self.level_numerators(n);
        Ok(par::map_slice(&los, |lo| {
            let a = Rational::new(lo.clone(), den.clone());
            let b = Rational::new(lo + &len, den.clone());
            self.map_hull(a, b)
        }))
    }

    /// Float hulls of all level-`n` pieces.
    ///
    /// Without an embedding and with a common denominator below `2^53` every
    /// endpoint is the correctly rounded exact value.
    pub fn level_hulls_f64(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        self.materializable(n)?;
        if self.embedding.is_none() {
            let (den, los, len) = self.level_numerators(n);
            if let (Some(d), Some(l)) = (den.to_i64(), len.to_i64()) {
                if d < 1 << 53 {
                    let d = d as f64;
                    return Ok(los
                        .iter()
                        .map(|lo| {
                            let lo = lo.to_i64().expect("below den");
                            (lo as f64 / d, (lo + l) as f64 / d)
                        })
                        .collect());
                }
            }
        }
        let mut los = vec![0.0f64];
        for l in &self.levels[..n] {
            let a = l.a.to_u64().expect("checked");
            let mut next = Vec::with_capacity(los.len() * a as usize);
            for lo in &los {
                for j in 0..a {
                    next.push(lo + l.offset_f + j as f64 * l.step_f);
                }
            }
            los = next;
        }
        let len = if n == 0 {
            1.0
        } else {
            self.levels[n - 1].len_f
        };
        Ok(los
            .iter()
            .map(|&lo| self.map_hull_f64(lo, lo + len))
            .collect())
    }

    pub fn to_json(&self, max_pieces: u64) -> Value {
        let levels: Vec<Value> = (1..=self.depth())
            .map(|n| {
                let pieces = match self.level_size_u64(n) {
                    Some(s) if s <= max_pieces => {
                        let hulls = self.level_hulls(n).expect("small level");
                        Value::Array(
                            hulls
                                .iter()
                                .enumerate()
                                .map(|(f, (lo, hi))| {
                                    json!({"index": self.flat_to_index(n, f as u64).expect("in range"),
                                           "lo": fmt_rational(lo), "hi": fmt_rational(hi)})
                                })
                                .collect(),
                        )
                    }
                    _ => Value::Null,
                };
                json!({"level": n, "count": self.prefix[n].to_string(),
                       "piece_measure": fmt_rational(&self.piece_measure(n)), "pieces": pieces})
            })
            .collect();
        json!({
            "schema": "cantor/1",
            "variant": match self.variant { Variant::Fat => "fat", Variant::CompactType => "compact" },
            "a": self.levels.iter().map(|l| l.a.to_string()).collect::<Vec<_>>(),
            "epsilon": fmt_rational(&self.epsilon),
            "total_measure": fmt_rational(&self.total_measure),
            "depth": self.depth(),
            "levels": levels,
        })
    }
}

/// How `select_subset` picks children.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    First,
    Random(u64),
    /// One increasing index list per level, applied to every node of that level.
    Explicit(Vec<Vec<u64>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LevelChoice {
    Shared(Vec<u64>),
    /// Node-major: `b` entries per node of the previous level.
    PerNode(Vec<u64>),
}

/// Selected subtree of a `CantorTree` with exactly `b_{n+1}` children per level-`n` node.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetTree {
    parent: CantorTree,
    b: Vec<u64>,
    choices: Vec<LevelChoice>,
}

fn floyd_sample(rng: &mut impl Rng, a: u64, b: u64) -> Vec<u64> {
    let mut set = BTreeSet::new();
    for j in (a - b)..a {
        let t = rng.gen_range(0..=j);
        if !set.insert(t) {
            set.insert(j);
        }
    }
    set.into_iter().collect()
}

pub fn select_subset(tree: &CantorTree, b: &[u64], selector: &Selector) -> Result<SubsetTree> {
    let depth = tree.depth();
    if b.len() != depth {
        return Err(Error::invalid(
            "b",
            format!("need {depth} entries, got {}", b.len()),
        ));
    }
    for (n, &bn) in b.iter().enumerate() {
        let ok = bn >= 1 && tree.a_u64(n + 1).is_none_or(|a| bn <= a);
        if !ok {
            return Err(Error::invalid(
                "b",
                format!("need 1 <= b_{} <= a_{}", n + 1, n + 1),
            ));
        }
    }
    let mut choices = Vec::with_capacity(depth);
    let mut nodes: u64 = 1;
    for (n, &bn) in b.iter().enumerate() {
        let choice = match selector {
            Selector::First => LevelChoice::Shared((0..bn).collect()),
            Selector::Explicit(lists) => {
                let list = lists.get(n).ok_or_else(|| {
                    Error::invalid("selector", format!("missing list for level {}", n + 1))
                })?;
                if list.len() as u64 != bn {
                    return Err(Error::invalid(
                        "selector",
                        format!("level {} list must have {bn} entries", n + 1),
                    ));
                }
                if list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid(
                        "selector",
                        format!("level {} list must be increasing", n + 1),
                    ));
                }
                let a = tree.a_u64(n + 1).unwrap_or(u64::MAX);
                if list.iter().any(|&j| j >= a) {
                    return Err(Error::invalid(
                        "selector",
                        format!("level {} index out of range", n + 1),
                    ));
                }
                LevelChoice::Shared(list.clone())
            }
            Selector::Random(seed) => {
                let a = tree.a_u64(n + 1).ok_or_else(|| {
                    Error::TooLarge("random selection needs a_n to fit u64".into())
                })?;
                if bn == a {
                    LevelChoice::Shared((0..a).collect())
                } else {
                    if nodes > MATERIALIZE_LIMIT {
                        return Err(Error::TooLarge(format!("{nodes} nodes at level {n}")));
                    }
                    let c = CounterRng::new(*seed);
                    let per: Vec<Vec<u64>> = par::map_range(nodes as usize, |node| {
                        let mut r =
                            c.stream(CounterRng::stream_id(ns::SELECT, n as u64 + 1, node as u64));
                        floyd_sample(&mut r, a, bn)
                    });
                    LevelChoice::PerNode(per.into_iter().flatten().collect())
                }
            }
        };
        choices.push(choice);
        nodes = nodes.saturating_mul(bn);
    }
    Ok(SubsetTree {
        parent: tree.clone(),
        b: b.to_vec(),
        choices,
    })
}

impl SubsetTree {
    pub fn parent(&self) -> &CantorTree {
        &self.parent
    }

    pub fn depth(&self) -> usize {
        self.b.len()
    }

    pub fn b(&self) -> &[u64] {
        &self.b
    }

    /// Number of selected level-`n` nodes, `b_1 ... b_n` (saturating).
    pub fn node_count(&self, n: usize) -> u64 {
        self.b[..n]
            .iter()
            .fold(1u64, |acc, &x| acc.saturating_mul(x))
    }

    /// Parent child index chosen as the `j`-th selected child of selected node `node` at level `n - 1`.
    pub fn choice(&self, n: usize, node: u64, j: u64) -> u64 {
        match &self.choices[n - 1] {
            LevelChoice::Shared(v) => v[j as usize],
            LevelChoice::PerNode(v) => v[(node * self.b[n - 1] + j) as usize],
        }
    }

    fn check_size(&self, n: usize) -> Result<usize> {
        let c = self.node_count(n);
        if c > MATERIALIZE_LIMIT {
            return Err(Error::TooLarge(format!("{c} selected nodes at level {n}")));
        }
        Ok(c as usize)
    }

    /// Parent-tree index tuples of the selected level-`n` nodes, in order.
    pub fn selected_indices(&self, n: usize) -> Result<Vec<Vec<u64>>> {
        self.check_size(n)?;
        let mut cur: Vec<Vec<u64>> = vec![Vec::new()];
        for k in 1..=n {
            let mut next = Vec::with_capacity(cur.len() * self.b[k - 1] as usize);
            for (node, idx) in cur.iter().enumerate() {
                for j in 0..self.b[k - 1] {
                    let mut t = idx.clone();
                    t.push(self.choice(k, node as u64, j));
                    next.push(t);
                }
            }
            cur = next;
        }
        Ok(cur)
    }

    /// Exact hulls of the selected level-`n` nodes.
    pub fn selected_hulls(&self, n: usize) -> Result<Vec<(Rational, Rational)>> {
        self.check_size(n)?;
        let mut los = vec![Rational::zero()];
        for k in 1..=n {
            let l = &self.parent.levels[k - 1];
            let mut next = Vec::with_capacity(los.len() * self.b[k - 1] as usize);
            for (node, lo) in los.iter().enumerate() {
                let base = lo + &l.offset;
                for j in 0..self.b[k - 1] {
                    let c = self.choice(k, node as u64, j);
                    next.push(&base + &l.step * Rational::from_integer(c.into()));
                }
            }
            los = next;
        }
        let len = self.parent.base_piece_len(n);
        Ok(par::map_slice(&los, |lo| {
            self.parent.map_hull(lo.clone(), lo + &len)
        }))
    }

    pub fn selected_hulls_f64(&self, n: usize) -> Result<Vec<(f64, f64)>> {
        Ok(self
            .selected_hulls(n)?
            .iter()
            .map(|(a, b)| (ratio_to_f64(a), ratio_to_f64(b)))
            .collect())
    }

    pub fn to_json(&self, max_nodes: u64) -> Value {
        let levels: Vec<Value> = (1..=self.depth())
            .map(|n| {
                let nodes = if self.node_count(n) <= max_nodes {
                    let idx = self.selected_indices(n).expect("small level");
                    let hulls = self.selected_hulls(n).expect("small level");
                    Value::Array(
                        idx.iter()
                            .zip(&hulls)
                            .map(|(i, (lo, hi))| json!({"index": i, "lo": fmt_rational(lo), "hi": fmt_rational(hi)}))
                            .collect(),
                    )
                } else {
                    Value::Null
                };
                json!({"level": n, "count": self.node_count(n), "nodes": nodes})
            })
            .collect();
        json!({"schema": "cantor/1", "kind": "subset", "b": self.b, "parent": self.parent.to_json(0), "levels": levels})
    }
}

/// Natural measure `mu(C_{i_1..i_n}) = 1 / (b_1 ... b_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassDistribution {
    subset: SubsetTree,
    weights: Vec<Rational>,
}

pub fn natural_measure(subset: &SubsetTree) -> MassDistribution {
    let mut weights = vec![Rational::one()];
    for &bn in subset.b() {
        let w = weights.last().expect("non-empty") / Rational::from_integer(bn.into());
        weights.push(w);
    }
    MassDistribution {
        subset: subset.clone(),
        weights,
    }
}

impl MassDistribution {
    pub fn subset(&self) -> &SubsetTree {
        &self.subset
    }

    pub fn depth(&self) -> usize {
        self.subset.depth()
    }

    /// Weight of every selected level-`n` node.
    pub fn weight(&self, n: usize) -> &Rational {
        &self.weights[n]
    }

    /// Children of every node sum to the node's weight; root weight is 1.
    pub fn children_sum_holds(&self) -> bool {
        self.weights[0].is_one()
            && (0..self.depth()).all(|n| {
                &self.weights[n + 1] * Rational::from_integer(self.subset.b()[n].into())
                    == self.weights[n]
            })
    }

    pub fn to_json(&self) -> Value {
        json!({"schema": "cantor/1", "kind": "mass",
               "weights": self.weights.iter().map(fmt_rational).collect::<Vec<_>>()})
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatioCheck {
    pub n: usize,
    pub a_n: BigUint,
    /// `a_1 ... a_{n+1}`.
    pub ratio_num: BigUint,
    /// `b_1 ... b_{n+1}`.
    pub ratio_den: BigUint,
    pub holds: bool,
}

/// `a_n >= (a_1..a_{n+1} / b_1..b_{n+1})^{n+1}` for `n = 1 .. depth-1`, exactly.
pub fn check_ratio_condition(
    a: &[BigUint],
    b: &[BigUint],
    depth: usize,
) -> Result<Vec<RatioCheck>> {
    if a.len() < depth || b.len() < depth {
        return Err(Error::invalid("depth", "schedules shorter than depth"));
    }
    Ok((1..depth)
        .map(|n| {
            let num = product(&a[..=n]);
            let den = product(&b[..=n]);
            let e = (n + 1) as u32;
            let holds = &a[n - 1] * num_traits::pow(den.clone(), e as usize)
                >= num_traits::pow(num.clone(), e as usize);
            RatioCheck {
                n,
                a_n: a[n - 1].clone(),
                ratio_num: num,
                ratio_den: den,
                holds,
            }
        })
        .collect())
}

/// A boundary-aligned window `[lo(first), hi(last)]` over deepest selected leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub first_leaf: usize,
    pub last_leaf: usize,
    pub lo: Rational,
    pub hi: Rational,
    pub mass: Rational,
    pub diam: Rational,
}

impl Window {
    pub fn to_json(&self) -> Value {
        json!({"first_leaf": self.first_leaf, "last_leaf": self.last_leaf, "lo": fmt_rational(&self.lo),
               "hi": fmt_rational(&self.hi), "mass": fmt_rational(&self.mass), "diam": fmt_rational(&self.diam)})
    }
}

/// For each leaf count `c`, the smallest diameter of a window holding `c`
/// consecutive deepest leaves (all leaves carry equal mass, so these windows
/// dominate every ratio `mass / phi(diam)` with `phi` non-decreasing).
#[derive(Debug, Clone)]
pub struct WindowProfile {
    leaves: Vec<(Rational, Rational)>,
    leaf_weight: Rational,
    min_diam: Vec<f64>,
    start: Vec<usize>,
    scanned: u64,
    cap: Option<Rational>,
}

impl WindowProfile {
    /// Scans windows with diameter at most `cap` (all windows when `None`);
    /// `max_windows` bounds the scan to leaf counts up to `max_windows / N`.
    pub fn new(
        mass: &MassDistribution,
        cap: Option<&Rational>,
        max_windows: Option<u64>,
    ) -> Result<Self> {
        let depth = mass.depth();
        let leaves = mass.subset().selected_hulls(depth)?;
        let n = leaves.len();
        let lo: Vec<f64> = leaves.iter().map(|(a, _)| ratio_to_f64(a)).collect();
        let hi: Vec<f64> = leaves.iter().map(|(_, b)| ratio_to_f64(b)).collect();
        let cap_f = cap
            .map(|c| ratio_to_f64(c) * (1.0 + 1e-12))
            .unwrap_or(f64::INFINITY);
        let max_count = match max_windows {
            Some(w) => ((w / n.max(1) as u64).max(1) as usize).min(n),
            None => n,
        };
        let parts = par::map_chunks(n, 64, |range| {
            let mut d = vec![f64::INFINITY; max_count];
            let mut s = vec![usize::MAX; max_count];
            let mut scanned = 0u64;
            for i in range {
                for j in i..n.min(i + max_count) {
                    let diam = hi[j] - lo[i];
                    if diam > cap_f {
                        break;
                    }
                    scanned += 1;
                    let c = j - i;
                    if diam < d[c] {
                        d[c] = diam;
                        s[c] = i;
                    }
                }
            }
            (d, s, scanned)
        });
        let mut min_diam = vec![f64::INFINITY; max_count];
        let mut start = vec![usize::MAX; max_count];
        let mut scanned = 0;
        for (d, s, sc) in parts {
            scanned += sc;
            for c in 0..max_count {
                if d[c] < min_diam[c] || (d[c] == min_diam[c] && s[c] < start[c]) {
                    min_diam[c] = d[c];
                    start[c] = s[c];
                }
            }
        }
        Ok(Self {
            leaves,
            leaf_weight: mass.weight(depth).clone(),
            min_diam,
            start,
            scanned,
            cap: cap.cloned(),
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn leaf_weight(&self) -> &Rational {
        &self.leaf_weight
    }

    pub fn scanned(&self) -> u64 {
        self.scanned
    }

    /// Number of leaf counts with at least one admissible window.
    pub fn max_count(&self) -> usize {
        self.min_diam.iter().take_while(|d| d.is_finite()).count()
    }

    pub fn min_diam(&self, c: usize) -> f64 {
        self.min_diam[c - 1]
    }

    /// Exact window realizing the float minimum for leaf count `c`.
    pub fn window(&self, c: usize) -> Option<Window> {
        let i = *self.start.get(c - 1)?;
        if i == usize::MAX {
            return None;
        }
        let j = i + c - 1;
        let lo = self.leaves[i].0.clone();
        let hi = self.leaves[j].1.clone();
        Some(Window {
            first_leaf: i,
            last_leaf: j,
            diam: &hi - &lo,
            lo,
            hi,
            mass: &self.leaf_weight * Rational::from_integer(c.into()),
        })
    }

    /// Float ratios `c * w / phi(min_diam(c))` for every admissible count.
    pub fn ratios(&self, phi: impl Fn(f64) -> f64) -> Vec<f64> {
        let w = ratio_to_f64(&self.leaf_weight);
        (1..=self.max_count())
            .map(|c| c as f64 * w / phi(self.min_diam(c)))
            .collect()
    }

    /// Counts whose ratio is within relative `margin` of the maximum or above `threshold * (1 - margin)`.
    pub fn candidates(ratios: &[f64], threshold: f64, margin: f64) -> Vec<usize> {
        let best = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ratios
            .iter()
            .enumerate()
            .filter(|(_, r)| **r >= best * (1.0 - margin) || **r >= threshold * (1.0 - margin))
            .map(|(i, _)| i + 1)
            .collect()
    }

    pub fn cap(&self) -> Option<&Rational> {
        self.cap.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct MassBoundReport {
    pub k: usize,
    pub exponent: f64,
    pub cap: Rational,
    pub sup_ratio: f64,
    pub pass: bool,
    pub witness: Window,
    pub windows_scanned: u64,
}

impl MassBoundReport {
    pub fn to_json(&self) -> Value {
        json!({"k": self.k, "exponent": self.exponent, "diam_cap": fmt_rational(&self.cap),
               "sup_ratio": self.sup_ratio, "pass": self.pass, "witness": self.witness.to_json(),
               "windows_scanned": self.windows_scanned})
    }
}

/// Relative margin used when screening float ratios before exact rechecks.
pub const SCREEN_MARGIN: f64 = 1e-9;

/// `sup mu(B) / diam(B)^(1 - 1/k)` over windows with `diam B <= 1/(a_1..a_k)`;
/// pass iff the sup is at most 4, decided exactly on the screened candidates.
pub fn verify_mass_bound(mass: &MassDistribution, k: usize) -> Result<MassBoundReport> {
    if k == 0 || k > mass.depth() {
        return Err(Error::invalid(
            "k",
            format!("need 1 <= k <= depth = {}", mass.depth()),
        ));
    }
    let a = mass.subset().parent().a();
    let cap = Rational::one() / ubig_to_rat(&product(&a[..k]));
    let prof = WindowProfile::new(mass, Some(&cap), None)?;
    let e = 1.0 - 1.0 / k as f64;
    let ratios = prof.ratios(|d| d.powf(e));
    let cands = WindowProfile::candidates(&ratios, 4.0, SCREEN_MARGIN);
    // exact comparison of mu^k / diam^(k-1)
    let power = |w: &Window| -> Rational {
        let num = num_traits::pow(w.mass.clone(), k);
        let den = num_traits::pow(w.diam.clone(), k - 1);
        num / den
    };
    let mut best: Option<(Window, Rational)> = None;
    for c in cands {
        let w = prof.window(c).expect("admissible count");
        let p = power(&w);
        if best.as_ref().is_none_or(|(_, bp)| p > *bp) {
            best = Some((w, p));
        }
    }
    let (witness, p) = best.ok_or_else(|| Error::Precondition("no admissible window".into()))?;
    let four_k = Rational::from_integer(num_bigint::BigInt::from(4u32).pow(k as u32));
    let pass = p <= four_k;
    let sup_ratio = ratios[witness.last_leaf - witness.first_leaf];
    Ok(MassBoundReport {
        k,
        exponent: e,
        cap,
        sup_ratio,
        pass,
        witness,
        windows_scanned: prof.scanned(),
    })
}

/// Two-branch self-similar set with ratio `2^(-1/s)`; dimension `s`.
/// Pieces carry hull lengths only: the limit set is Lebesgue-null.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimilarTree<T> {
    pub s: T,
    pub ratio: T,
    pub depth: usize,
    /// Always false: the measure-identity invariant does not apply.
    pub has_lebesgue_measure: bool,
}

pub fn prescribed_dimension_cantor<T>(s: T, depth: usize) -> Result<SelfSimilarTree<T>>
where
    T: num_traits::Float + Scalar,
{
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::invalid("s", "must lie in (0, 1)"));
    }
    let two = T::one() + T::one();
    let ratio = num_traits::Float::powf(two, -T::one() / s);
    Ok(SelfSimilarTree {
        s,
        ratio,
        depth,
        has_lebesgue_measure: false,
    })
}

impl<T: num_traits::Float + Scalar> SelfSimilarTree<T> {
    pub fn piece_len(&self, n: usize) -> T {
        num_traits::Float::powi(self.ratio, n as i32)
    }

    pub fn level_hulls(&self, n: usize) -> Vec<(T, T)> {
        let mut los = vec![T::zero()];
        for k in 0..n {
            let len = self.piece_len(k);
            let child = self.piece_len(k + 1);
            los = los.iter().flat_map(|&lo| [lo, lo + len - child]).collect();
        }
        let len = self.piece_len(n);
        los.into_iter().map(|lo| (lo, lo + len)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{big, int, rat};

    fn bigs(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| big(x)).collect()
    }

    #[test]
    fn two_pieces_quarter_each() {
        let t = build_fat_cantor(&bigs(&[2]), &rat(1, 2), 1).unwrap();
        assert_eq!(t.piece_measure(1), rat(1, 4));
        assert_eq!(t.level_hulls(1).unwrap().len(), 2);
    }

    #[test]
    fn four_way_split_gaps() {
        let t = build_fat_cantor(&bigs(&[4]), &rat(1, 2), 1).unwrap();
        assert_eq!(t.base_gap(1), rat(1, 12));
        assert_eq!(t.base_piece_len(1), rat(3, 16));
        let h = t.level_hulls(1).unwrap();
        assert_eq!(h[1].0.clone() - h[0].1.clone(), rat(1, 12));
        let total: Rational = h.iter().map(|(a, b)| b - a).sum::<Rational>() + rat(3, 12);
        assert_eq!(total, int(1));
    }

    #[test]
    fn level_two_measure() {
        let t = build_fat_cantor(&bigs(&[2, 3]), &rat(1, 4), 2).unwrap();
        assert_eq!(t.piece_measure(2), rat(1, 8));
    }

    #[test]
    fn unit_branching_trims() {
        let t = build_fat_cantor(&bigs(&[1, 2]), &rat(1, 2), 2).unwrap();
        let h = t.level_hulls(1).unwrap();
        assert_eq!(h, vec![(rat(1, 8), rat(7, 8))]);
        assert!(t.hull(&[0, 1]).is_ok());
    }

    #[test]
    fn rejects_bad_epsilon() {
        assert!(build_fat_cantor(&bigs(&[2]), &int(1), 1).is_err());
        assert!(build_fat_cantor(&bigs(&[2]), &int(0), 1).is_err());
        assert!(build_fat_cantor(&bigs(&[0]), &rat(1, 2), 1).is_err());
    }

    #[test]
    fn hull_matches_level_hulls() {
        let t = build_fat_cantor(&bigs(&[2, 3, 2]), &rat(1, 3), 3).unwrap();
        let all = t.level_hulls(3).unwrap();
        for (f, h) in all.iter().enumerate() {
            let idx = t.flat_to_index(3, f as u64).unwrap();
            assert_eq!(&t.hull(&idx).unwrap(), h);
        }
    }

    #[test]
    fn float_hulls_round_exact_ones() {
        let t = build_fat_cantor(&bigs(&[6, 6, 6, 6]), &rat(1, 4), 4).unwrap();
        let exact = t.level_hulls(4).unwrap();
        let float = t.level_hulls_f64(4).unwrap();
        for ((a, b), (x, y)) in exact.iter().zip(&float) {
            assert_eq!((ratio_to_f64(a), ratio_to_f64(b)), (*x, *y));
        }
    }

    #[test]
    fn embedding_identity_on_unit_interval() {
        let c = IntervalUnion::interval(int(0), int(1));
        let e = embed_in_compact(&c, &bigs(&[2, 2]), &rat(1, 4), 2).unwrap();
        let t = build_fat_cantor(&bigs(&[2, 2]), &rat(1, 4), 2).unwrap();
        assert_eq!(e.level_hulls(2).unwrap(), t.level_hulls(2).unwrap());
        assert_eq!(e.total_measure(), t.total_measure());
    }

    #[test]
    fn embedding_two_components() {
        let c = IntervalUnion::from_parts(vec![(int(0), rat(1, 2)), (rat(3, 4), int(1))]);
        let e = embed_in_compact(&c, &bigs(&[2]), &rat(1, 4), 1).unwrap();
        assert_eq!(e.piece_measure(1), rat(1, 4));
        assert_eq!(e.total_measure(), &rat(1, 2));
        let h = e.level_hulls(1).unwrap();
        assert!(h[0].1 <= rat(1, 2));
        assert_eq!(h[0], (int(0), rat(5, 16)));
        assert_eq!(h[1], (rat(7, 16), int(1)));
    }

    #[test]
    fn triadic_selection() {
        let t = triadic_tree(3);
        let s = select_subset(&t, &[2, 2, 2], &Selector::Explicit(vec![vec![0, 2]; 3])).unwrap();
        let h = s.selected_hulls(3).unwrap();
        assert_eq!(h.len(), 8);
        assert_eq!(h[1], (rat(2, 27), rat(3, 27)));
        assert_eq!(h[7], (rat(26, 27), int(1)));
    }

    #[test]
    fn full_selection_is_parent() {
        let t = build_fat_cantor(&bigs(&[2, 3]), &rat(1, 4), 2).unwrap();
        let s = select_subset(&t, &[2, 3], &Selector::Random(3)).unwrap();
        assert_eq!(s.selected_hulls(2).unwrap(), t.level_hulls(2).unwrap());
    }

    #[test]
    fn random_selection_reproducible() {
        let t = build_fat_cantor(&bigs(&[4, 4]), &rat(1, 4), 2).unwrap();
        let s1 = select_subset(&t, &[2, 2], &Selector::Random(7)).unwrap();
        let s2 = select_subset(&t, &[2, 2], &Selector::Random(7)).unwrap();
        assert_eq!(
            s1.selected_indices(2).unwrap(),
            s2.selected_indices(2).unwrap()
        );
        for idx in s1.selected_indices(2).unwrap() {
            assert!(idx.iter().all(|&j| j < 4));
        }
    }

    #[test]
    fn explicit_selection_errors() {
        let t = triadic_tree(1);
        assert!(select_subset(&t, &[2], &Selector::Explicit(vec![vec![2, 0]])).is_err());
        assert!(select_subset(&t, &[2], &Selector::Explicit(vec![vec![0, 3]])).is_err());
        assert!(select_subset(&t, &[4], &Selector::First).is_err());
    }

    #[test]
    fn natural_measure_weights() {
        let t = build_fat_cantor(&bigs(&[2, 3]), &rat(1, 4), 2).unwrap();
        let m = natural_measure(&select_subset(&t, &[2, 3], &Selector::First).unwrap());
        assert_eq!(m.weight(0), &int(1));
        assert_eq!(m.weight(2), &rat(1, 6));
        assert!(m.children_sum_holds());
        let total: Rational = (0..6).map(|_| m.weight(2).clone()).sum();
        assert_eq!(total, int(1));
    }

    #[test]
    fn ratio_condition_examples() {
        let r = check_ratio_condition(&bigs(&[16, 512]), &bigs(&[8, 256]), 2).unwrap();
        assert!(r[0].holds);
        let r = check_ratio_condition(&bigs(&[4, 4]), &bigs(&[2, 2]), 2).unwrap();
        assert!(!r[0].holds);
        let r = check_ratio_condition(&bigs(&[5, 7, 9]), &bigs(&[5, 7, 9]), 3).unwrap();
        assert!(r.iter().all(|c| c.holds));
    }

    #[test]
    fn mass_bound_k1_is_probability() {
        let t = build_compact_type(&bigs(&[4, 4, 4]), 3).unwrap();
        let m = natural_measure(&select_subset(&t, &[2, 2, 2], &Selector::First).unwrap());
        let r = verify_mass_bound(&m, 1).unwrap();
        assert!(r.pass);
        assert!(r.sup_ratio <= 1.0);
        assert!(verify_mass_bound(&m, 3).is_ok());
        assert!(verify_mass_bound(&m, 4).is_err());
    }

    #[test]
    fn self_similar_ratio() {
        let t = prescribed_dimension_cantor(2f64.ln() / 3f64.ln(), 3).unwrap();
        assert!((t.ratio - 1.0 / 3.0).abs() < 1e-15);
        let h = prescribed_dimension_cantor(0.5f64, 2)
            .unwrap()
            .level_hulls(2);
        assert_eq!(
            h,
            vec![(0.0, 0.0625), (0.1875, 0.25), (0.75, 0.8125), (0.9375, 1.0)]
        );
        assert!(prescribed_dimension_cantor(1.0f64, 2).is_err());
    }
}
