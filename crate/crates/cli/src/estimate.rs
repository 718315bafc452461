//! Level-set and graph box-count estimators on perturbation runs.

use fiberdim::dimension::{box_count, Anchor, DimensionFit, PointSet};
use fiberdim::perturb::{level_set, modal_value, LevelSet, RunRecord};
use fiberdim::{IntervalUnion, Rational, Result};

use crate::thresholds;

/// Finest dyadic exponent resolved by the leaf hulls of `run`.
pub fn leaf_scale(run: &RunRecord) -> u32 {
    let len = run
        .leaf_hulls_f64()
        .iter()
        .map(|(a, b)| b - a)
        .fold(f64::INFINITY, f64::min);
    (-len.log2()).floor().max(1.0) as u32
}

/// Box counts with cells of side `2^-k`, `k = lo..=hi`, fitted over the whole range.
pub fn dyadic_fit(set: &PointSet<f64>, lo: u32, hi: u32) -> Result<DimensionFit> {
    let scales: Vec<f64> = (lo..=hi).map(|k| 0.5f64.powi(k as i32 + 1)).collect();
    let counts = scales
        .iter()
        .map(|d| box_count(set, d, Anchor::Binary))
        .collect::<Result<Vec<_>>>()?;
    let n = counts.len();
    DimensionFit::from_counts(scales, counts, (0, n - 1), Anchor::Binary)
}

#[derive(Debug, Clone)]
pub struct LevelSetFit {
    pub y: Vec<Rational>,
    pub level: LevelSet,
    pub fit: DimensionFit,
}

/// Box-count fit of the level set at the modal value of `h`.
pub fn modal_level_set_fit(run: &RunRecord) -> Result<LevelSetFit> {
    let y = modal_value(run);
    let level = level_set(run, &y, None)?;
    let floats = run.leaf_hulls_f64();
    let hulls: Vec<(f64, f64)> = level.leaves.iter().map(|&i| floats[i]).collect();
    let set = PointSet::Intervals(IntervalUnion::from_parts(hulls));
    let hi = leaf_scale(run);
    let fit = dyadic_fit(&set, thresholds::LEVEL_SET_K_LO, hi)?;
    Ok(LevelSetFit { y, level, fit })
}

/// Box-count fit of the graph cloud over `k = GRAPH_K_LO ..= depth - 1`.
pub fn graph_fit(run: &RunRecord) -> Result<DimensionFit> {
    let set = PointSet::cloud(run.graph_points())?;
    let hi = (run.depth() as u32).saturating_sub(1).max(thresholds::GRAPH_K_LO + 2);
    dyadic_fit(&set, thresholds::GRAPH_K_LO, hi)
}
