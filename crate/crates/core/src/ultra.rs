//! Finite ultrametric trees, the lexicographic monotone map `h(x) = mu((-inf, x))`
//! and its pushforward and Hoelder properties.

use rand::Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::par;
use crate::rng::{ns, CounterRng};

/// Leaves in lexicographic order with their paths and masses; the distance of two
/// leaves whose deepest common ancestor sits at level `n` is `deltas[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UltrametricTree<T> {
    paths: Vec<Vec<u32>>,
    masses: Vec<T>,
    deltas: Vec<T>,
}

/// Leaf-count limit for exhaustive pair and triple checks.
pub const EXHAUSTIVE_LIMIT: usize = 1 << 8;
/// Leaf-count limit for exhaustive Hoelder pairs.
pub const PAIR_LIMIT: usize = 1 << 12;

fn mass_tolerance<T: Scalar>() -> T {
    if T::EXACT {
        T::zero()
    } else {
        T::from_f64(1e-9).expect("finite")
    }
}

/// `2^-n` for `n = 0..=depth`.
pub fn dyadic_deltas<T: Scalar>(depth: usize) -> Vec<T> {
    let two = T::from_i64_exact(2);
    let mut out = vec![T::one()];
    for _ in 0..depth {
        let next = out.last().expect("non-empty").clone() / two.clone();
        out.push(next);
    }
    out
}

impl<T: Scalar> UltrametricTree<T> {
    pub fn new(mut leaves: Vec<(Vec<u32>, T)>, deltas: Vec<T>) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::invalid("leaves", "need at least one leaf"));
        }
        leaves.sort_by(|a, b| a.0.cmp(&b.0));
        for w in leaves.windows(2) {
            if w[1].0.starts_with(&w[0].0) {
                return Err(Error::invalid(
                    "leaves",
                    "a leaf path is a prefix of another",
                ));
            }
        }
        let depth = leaves.iter().map(|l| l.0.len()).max().unwrap_or(0);
        if deltas.len() < depth.max(1) {
            return Err(Error::invalid(
                "deltas",
                format!("need at least {} diameters", depth.max(1)),
            ));
        }
        if deltas.iter().any(|d| *d <= T::zero()) || deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid(
                "deltas",
                "must be positive and strictly decreasing",
            ));
        }
        if leaves.iter().any(|l| l.1 <= T::zero()) {
            return Err(Error::invalid("masses", "must be positive"));
        }
        let total = leaves.iter().fold(T::zero(), |acc, l| acc + l.1.clone());
        if (total - T::one()).abs() > mass_tolerance::<T>() {
            return Err(Error::invalid("masses", "must sum to 1"));
        }
        let (paths, masses) = leaves.into_iter().unzip();
        Ok(Self {
            paths,
            masses,
            deltas,
        })
    }

    /// Complete tree where child `i` of every node carries the fraction `weights[i]`.
    pub fn weighted(weights: &[T], depth: usize) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("weights", "need at least one child"));
        }
        let mut leaves: Vec<(Vec<u32>, T)> = vec![(Vec::new(), T::one())];
        for _ in 0..depth {
            leaves = leaves
                .into_iter()
                .flat_map(|(p, m)| {
                    weights.iter().enumerate().map(move |(i, w)| {
                        let mut q = p.clone();
                        q.push(i as u32);
                        (q, m.clone() * w.clone())
                    })
                })
                .collect();
        }
        Self::new(leaves, dyadic_deltas(depth.max(1)))
    }

    /// Uniform `b`-ary tree of the given depth with `deltas = 2^-n`.
    pub fn uniform(b: u32, depth: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::invalid("b", "must be positive"));
        }
        let w = T::one() / T::from_i64_exact(b as i64);
        Self::weighted(&vec![w; b as usize], depth)
    }

    pub fn with_deltas(mut self, deltas: Vec<T>) -> Result<Self> {
        let leaves = self.paths.drain(..).zip(self.masses.drain(..)).collect();
        Self::new(leaves, deltas)
    }

    pub fn leaf_count(&self) -> usize {
        self.paths.len()
    }

    pub fn depth(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn path(&self, i: usize) -> &[u32] {
        &self.paths[i]
    }

    pub fn mass(&self, i: usize) -> &T {
        &self.masses[i]
    }

    pub fn deltas(&self) -> &[T] {
        &self.deltas
    }

    fn lcp(&self, i: usize, j: usize) -> usize {
        self.paths[i]
            .iter()
            .zip(&self.paths[j])
            .take_while(|(a, b)| a == b)
            .count()
    }

    pub fn distance(&self, i: usize, j: usize) -> T {
        if i == j {
            T::zero()
        } else {
            self.deltas[self.lcp(i, j)].clone()
        }
    }

    /// Index ranges of leaves below every node, root first, in breadth-first order.
    pub fn subtrees(&self) -> Vec<(Vec<u32>, usize, usize)> {
        let mut out = Vec::new();
        for level in 0..=self.depth() {
            let mut i = 0;
            while i < self.paths.len() {
                if self.paths[i].len() < level {
                    i += 1;
                    continue;
                }
                let prefix = &self.paths[i][..level];
                let mut j = i;
                while j + 1 < self.paths.len() && self.paths[j + 1].starts_with(prefix) {
                    j += 1;
                }
                out.push((prefix.to_vec(), i, j));
                i = j + 1;
            }
        }
        out
    }

    /// `mu` of the order interval between leaves `i <= j`.
    pub fn interval_mass(&self, h: &[T], i: usize, j: usize) -> T {
        h[j].clone() + self.masses[j].clone() - h[i].clone()
    }

    /// Ultrametric inequality on all triples.
    pub fn ultrametric_holds(&self) -> Result<bool> {
        let n = self.exhaustive_size()?;
        Ok(par::map_range(n, |i| {
            (0..n).all(|j| {
                (0..n).all(|k| {
                    let (a, b, c) = (
                        self.distance(i, j),
                        self.distance(i, k),
                        self.distance(k, j),
                    );
                    a <= if b > c { b } else { c }
                })
            })
        })
        .into_iter()
        .all(|v| v))
    }

    /// Closed balls of radius `deltas[n]` are pairwise equal or disjoint.
    pub fn balls_nested_or_disjoint(&self) -> Result<bool> {
        let n = self.exhaustive_size()?;
        let ok = (0..self.deltas.len()).all(|r| {
            let rad = &self.deltas[r];
            let balls: Vec<Vec<bool>> = (0..n)
                .map(|x| (0..n).map(|y| self.distance(x, y) <= *rad).collect())
                .collect();
            (0..n).all(|x| {
                (0..n).all(|y| {
                    balls[x] == balls[y] || balls[x].iter().zip(&balls[y]).all(|(a, b)| !(*a && *b))
                })
            })
        });
        Ok(ok)
    }

    /// `diam [a, b] = d(a, b)` for every pair of leaves, by brute force.
    pub fn one_monotone(&self) -> Result<bool> {
        let n = self.exhaustive_size()?;
        Ok(par::map_range(n, |a| {
            let mut diam = T::zero();
            (a..n).all(|b| {
                for x in a..b {
                    let d = self.distance(x, b);
                    if d > diam {
                        diam = d;
                    }
                }
                diam == self.distance(a, b)
            })
        })
        .into_iter()
        .all(|v| v))
    }

    fn exhaustive_size(&self) -> Result<usize> {
        let n = self.leaf_count();
        if n > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge(format!(
                "{n} leaves exceed the exhaustive limit {EXHAUSTIVE_LIMIT}"
            )));
        }
        Ok(n)
    }

    /// Nested arrays of masses; leaves are scalars.
    pub fn to_json(&self) -> Value {
        fn build<T: Scalar>(t: &UltrametricTree<T>, lo: usize, hi: usize, level: usize) -> Value {
            if lo == hi && t.paths[lo].len() == level {
                return t.masses[lo].to_json();
            }
            let mut kids = Vec::new();
            let mut i = lo;
            while i <= hi {
                let prefix = &t.paths[i][..=level];
                let mut j = i;
                while j < hi && t.paths[j + 1].starts_with(prefix) {
                    j += 1;
                }
                kids.push(build(t, i, j, level + 1));
                i = j + 1;
            }
            Value::Array(kids)
        }
        json!({
            "schema": "ultra/1",
            "deltas": self.deltas.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "tree": build(self, 0, self.leaf_count() - 1, 0),
        })
    }

    /// Inverse of [`to_json`](Self::to_json); `parse` reads one scalar.
    pub fn from_json(v: &Value, parse: impl Fn(&Value) -> Result<T>) -> Result<Self> {
        fn walk<T>(
            v: &Value,
            path: &mut Vec<u32>,
            out: &mut Vec<(Vec<u32>, T)>,
            parse: &dyn Fn(&Value) -> Result<T>,
        ) -> Result<()> {
            match v {
                Value::Array(kids) => {
                    if kids.is_empty() {
                        return Err(Error::invalid("tree", "empty internal node"));
                    }
                    for (i, k) in kids.iter().enumerate() {
                        path.push(i as u32);
                        walk(k, path, out, parse)?;
                        path.pop();
                    }
                    Ok(())
                }
                other => {
                    out.push((path.clone(), parse(other)?));
                    Ok(())
                }
            }
        }
        let tree = v
            .get("tree")
            .ok_or_else(|| Error::invalid("tree", "missing"))?;
        let mut leaves = Vec::new();
        walk(tree, &mut Vec::new(), &mut leaves, &parse)?;
        let depth = leaves.iter().map(|l| l.0.len()).max().unwrap_or(0);
        let deltas = match v.get("deltas") {
            Some(Value::Array(ds)) => ds.iter().map(&parse).collect::<Result<Vec<_>>>()?,
            Some(_) => return Err(Error::invalid("deltas", "must be an array")),
            None => dyadic_deltas(depth.max(1)),
        };
        Self::new(leaves, deltas)
    }
}

/// `h(leaf) = sum of masses of strictly smaller leaves`.
pub fn monotone_map<T: Scalar>(tree: &UltrametricTree<T>) -> Vec<T> {
    let mut acc = T::zero();
    tree.masses
        .iter()
        .map(|m| {
            let v = acc.clone();
            acc = acc.clone() + m.clone();
            v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubtreeCheck<T> {
    pub path: Vec<u32>,
    pub lo: T,
    pub hi: T,
    pub mass: T,
    pub pass: bool,
}

/// Image interval `[h(first), h(last) + mass(last)]` of every subtree against its mass.
pub fn pushforward_check<T: Scalar>(tree: &UltrametricTree<T>) -> Vec<SubtreeCheck<T>> {
    let h = monotone_map(tree);
    tree.subtrees()
        .into_iter()
        .map(|(path, i, j)| {
            let mass = tree.masses[i..=j]
                .iter()
                .fold(T::zero(), |a, m| a + m.clone());
            let lo = h[i].clone();
            let hi = h[j].clone() + tree.masses[j].clone();
            let len = hi.clone() - lo.clone();
            let pass = (len - mass.clone()).abs() <= mass_tolerance::<T>();
            SubtreeCheck {
                path,
                lo,
                hi,
                mass,
                pass,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderProfile<T> {
    pub pairs: u64,
    pub min_exponent: Option<f64>,
    /// Leaves `(i, j)` attaining the minimum with `mu([i, j])` and `d(i, j)`.
    pub witness: Option<(usize, usize, T, T)>,
    pub sampled: bool,
}

impl<T: Scalar> HolderProfile<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "pairs": self.pairs,
            "min_exponent": self.min_exponent,
            "sampled": self.sampled,
            "witness": self.witness.as_ref().map(|(i, j, m, d)| json!({"i": i, "j": j, "mass": m.to_json(), "distance": d.to_json()})),
        })
    }
}

/// `log mu([x, z]) / log d(x, z)` over pairs `x < z` with `d < 1`; exhaustive up to
/// [`PAIR_LIMIT`] leaves, otherwise `samples` seeded pairs.
pub fn holder_profile<T: Scalar>(
    tree: &UltrametricTree<T>,
    samples: u64,
    seed: u64,
) -> HolderProfile<T> {
    let h = monotone_map(tree);
    let n = tree.leaf_count();
    let exponent = |i: usize, j: usize| -> Option<(f64, usize, usize)> {
        let d = tree.distance(i, j).to_f64_lossy();
        if d >= 1.0 {
            return None;
        }
        let m = tree.interval_mass(&h, i, j).to_f64_lossy();
        Some((m.ln() / d.ln(), i, j))
    };
    let better = |a: Option<(f64, usize, usize)>, b: Option<(f64, usize, usize)>| match (a, b) {
        (Some(x), Some(y)) => Some(if y.0 < x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) {
            y
        } else {
            x
        }),
        (x, None) => x,
        (None, y) => y,
    };
    let (best, pairs, sampled) = if n <= PAIR_LIMIT {
        let rows = par::map_range(n, |i| {
            let mut best = None;
            let mut count = 0u64;
            for j in i + 1..n {
                let e = exponent(i, j);
                if e.is_some() {
                    count += 1;
                }
                best = better(best, e);
            }
            (best, count)
        });
        let mut best = None;
        let mut total = 0;
        for (b, c) in rows {
            best = better(best, b);
            total += c;
        }
        (best, total, false)
    } else {
        let rng = CounterRng::new(seed);
        let rows = par::map_range(samples as usize, |t| {
            let mut r = rng.stream(CounterRng::stream_id(ns::MONTE_CARLO, 7, t as u64));
            let a = r.gen_range(0..n);
            let b = r.gen_range(0..n);
            if a == b {
                None
            } else {
                exponent(a.min(b), a.max(b))
            }
        });
        let count = rows.iter().filter(|r| r.is_some()).count() as u64;
        (rows.into_iter().fold(None, better), count, true)
    };
    HolderProfile {
        pairs,
        min_exponent: best.map(|b| b.0),
        witness: best.map(|(_, i, j)| (i, j, tree.interval_mass(&h, i, j), tree.distance(i, j))),
        sampled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{int, rat, Rational};

    fn third_tree(depth: usize) -> UltrametricTree<Rational> {
        UltrametricTree::weighted(&[rat(1, 3), rat(2, 3)], depth).unwrap()
    }

    #[test]
    fn monotone_examples() {
        let u = UltrametricTree::<Rational>::uniform(2, 3).unwrap();
        let h = monotone_map(&u);
        for (j, v) in h.iter().enumerate() {
            assert_eq!(*v, rat(j as i64, 8));
        }
        let t = third_tree(2);
        let h = monotone_map(&t);
        assert_eq!(t.path(2), &[1, 0]);
        assert_eq!(h[2], rat(1, 3));
        assert_eq!(h[0], int(0));
    }

    #[test]
    fn pushforward_exact() {
        let t = third_tree(3);
        let checks = pushforward_check(&t);
        assert_eq!(checks.len(), 15);
        assert!(checks.iter().all(|c| c.pass));
        assert_eq!(
            (checks[0].lo.clone(), checks[0].hi.clone()),
            (int(0), int(1))
        );
    }

    #[test]
    fn structure_checks() {
        let t = third_tree(3);
        assert!(t.ultrametric_holds().unwrap());
        assert!(t.balls_nested_or_disjoint().unwrap());
        assert!(t.one_monotone().unwrap());
    }

    #[test]
    fn holder_uniform() {
        for b in 2..=4u32 {
            let t = UltrametricTree::<Rational>::uniform(b, 3).unwrap();
            let p = holder_profile(&t, 0, 0);
            let want = (b as f64).ln() / 2f64.ln();
            assert!((p.min_exponent.unwrap() - want).abs() < 1e-12);
            let (_, _, m, d) = p.witness.unwrap();
            let n = (Rational::from_integer(1.into()) / &d).to_integer().bits() - 1;
            assert_eq!(m, Rational::new(1.into(), (b as i64).pow(n as u32).into()));
        }
        let single = UltrametricTree::<Rational>::uniform(1, 0).unwrap();
        assert_eq!(holder_profile(&single, 0, 0).min_exponent, None);
    }

    #[test]
    fn json_roundtrip() {
        let t = third_tree(2);
        let v = t.to_json();
        assert_eq!(v["tree"][1][0], "2/9");
        let back =
            UltrametricTree::from_json(&v, crate::num::serde_str::value_to_rational).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_trees() {
        assert!(UltrametricTree::new(vec![(vec![0], rat(1, 2))], vec![int(1)]).is_err());
        assert!(UltrametricTree::new(
            vec![(vec![0], int(1)), (vec![0, 1], int(0))],
            vec![int(1), rat(1, 2)]
        )
        .is_err());
        assert!(UltrametricTree::<f64>::weighted(&[0.25, 0.75], 4).is_ok());
    }
}
