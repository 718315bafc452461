//! Pilot-frozen acceptance thresholds for the property-based checks on
//! perturbation runs. Frozen from `examples/pilot.rs` (depth 5, seeds 0..20,
//! `a_n = 6`, epsilon 1/4) before the depth-7 runs were evaluated.

/// Histogram bins over the value range.
pub const HISTOGRAM_BINS: usize = 32;
/// Bin density bound.
pub const DENSITY_BOUND: f64 = 4.0;
/// Share of Lebesgue mass that must sit in bins under `DENSITY_BOUND`.
pub const MASS_FRACTION: f64 = 0.9;

/// Level-set fit uses cells of side `2^-k` for `k = LEVEL_SET_K_LO ..= leaf scale`.
pub const LEVEL_SET_K_LO: u32 = 2;
pub const LEVEL_SET_MIN_SLOPE: f64 = 0.75;

/// Graph fit uses cells of side `2^-k` for `k = GRAPH_K_LO ..= depth - 1`.
pub const GRAPH_K_LO: u32 = 1;
pub const GRAPH_BAND: (f64, f64) = (1.6, 2.0);

/// Share of seeds that must satisfy a property-based check.
pub const SEED_FRACTION: f64 = 0.8;
