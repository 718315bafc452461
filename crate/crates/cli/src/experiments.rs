//! Experiment registry. Every experiment reads its parameters from a
//! [`Config`], returns an [`Outcome`] and never touches the filesystem.

use std::fmt::Write as _;

use fiberdim::cantor::{
    build_compact_type, build_fat_cantor, check_ratio_condition, natural_measure,
    prescribed_dimension_cantor, select_subset, verify_mass_bound, CantorTree, Selector,
};
use fiberdim::construct::{
    c_gamma_sets, cone_function, random_lipschitz_pl, sawtooth_config_desk, sawtooth_g,
    sawtooth_level_counts, staircase_g, verify_level_tree, witness_level_tree, LevelTreeOutcome,
    Modulus, SawtoothConfig, StaircaseConfig,
};
use fiberdim::dimension::{
    banach_indicatrix_check, constant_speed, fit_dimension, is_monotone,
    ternary_scales, triadic_cantor, Anchor, DimensionFit, PointSet,
};
use fiberdim::gauge::{
    divide_by_power, gauge_schedule, log_grid, phi_transform, recheck_power_schedule, Gauge,
    DEFAULT_PHI_TOL,
};
use fiberdim::num::{f64_to_ratio, fmt_rational, pow2, product, ratio_to_f64, ubig_to_rat};
use fiberdim::perturb::{
    discovered_open_set, occupation_histogram, recheck_witness, sample_run, witness_fiber_cantor,
    RunRecord, WitnessOutcome,
};
use fiberdim::ultra::{holder_profile, pushforward_check, UltrametricTree};
use fiberdim::{ExactUltrametric, GridFunction, IntervalUnion, Rational};
use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::config::{Config, ConfigError};
use crate::estimate::{dyadic_fit, graph_fit, modal_level_set_fit};
use crate::thresholds;

pub const SCHEMA: &str = "fiberdim-result/1";

/// Registered experiments with one-line descriptions.
pub const REGISTRY: &[(&str, &str)] = &[
    ("triadic-dim", "box-count calibration on the triadic and prescribed-dimension Cantor sets"),
    ("fat-cantor-build", "exact piece measures of a fat Cantor set"),
    ("mass-bound", "window scan of the natural measure of an (a_n, b_n)-type subset"),
    ("perturbation-run", "sampled perturbation runs: amplitudes, occupation mass, Chebyshev bound"),
    ("fiber-witness", "Cantor sets rebuilt inside fibers of sampled perturbations"),
    ("occupation", "occupation histograms and modal level-set dimension over seeds"),
    ("sawtooth-witness", "sawtooth sum: certified level-set tree and level-set box counts"),
    ("singleton-cone", "cone function against seeded Lipschitz functions"),
    ("staircase", "truncated staircase values, preimage diameters and monotonicity"),
    ("gauge-schedule", "Phi transform, division by powers and gauge-driven schedules"),
    ("ultrametric-map", "monotone map of weighted trees: pushforward and Hoelder exponents"),
    ("graph-dim", "graph box-count dimension of sampled perturbations"),
    ("indicatrix", "Banach indicatrix against total variation and Lipschitz bound"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: Value,
}

fn check(name: &str, pass: bool, detail: Value) -> Check {
    Check {
        name: name.to_string(),
        pass,
        detail,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub result: Value,
    pub csv: String,
    pub svg: String,
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Library(fiberdim::Error),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Library(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<fiberdim::Error> for RunError {
    fn from(e: fiberdim::Error) -> Self {
        match e {
            fiberdim::Error::InvalidParameter { name, reason } => {
                RunError::Config(ConfigError { key: name, message: reason })
            }
            other => RunError::Library(other),
        }
    }
}

type Res<T> = std::result::Result<T, RunError>;

fn bad(key: &str, message: impl Into<String>) -> RunError {
    RunError::Config(ConfigError {
        key: key.to_string(),
        message: message.into(),
    })
}

/// Parses and validates parameters without running anything heavy.
pub fn validate(cfg: &Config) -> Res<()> {
    run_inner(cfg, true).map(|_| ())
}

pub fn run(cfg: &Config) -> Res<Outcome> {
    run_inner(cfg, false)
}

fn run_inner(cfg: &Config, dry: bool) -> Res<Outcome> {
    let parts = match cfg.experiment.as_str() {
        "triadic-dim" => triadic_dim(cfg, dry)?,
        "fat-cantor-build" => fat_cantor_build(cfg, dry)?,
        "mass-bound" => mass_bound(cfg, dry)?,
        "perturbation-run" => perturbation_run(cfg, dry)?,
        "fiber-witness" => fiber_witness(cfg, dry)?,
        "occupation" => occupation(cfg, dry)?,
        "sawtooth-witness" => sawtooth_witness(cfg, dry)?,
        "singleton-cone" => singleton_cone(cfg, dry)?,
        "staircase" => staircase(cfg, dry)?,
        "gauge-schedule" => gauge_schedule_exp(cfg, dry)?,
        "ultrametric-map" => ultrametric_map(cfg, dry)?,
        "graph-dim" => graph_dim(cfg, dry)?,
        "indicatrix" => indicatrix(cfg, dry)?,
        other => {
            return Err(bad(
                "experiment",
                format!("unknown experiment {other:?}; see --list"),
            ))
        }
    };
    Ok(assemble(cfg, parts))
}

/// What an experiment produces before the common envelope is added.
struct Parts {
    hypotheses: Value,
    checks: Vec<Check>,
    data: Value,
    csv: String,
    svg: String,
}

impl Parts {
    fn dry() -> Self {
        Parts {
            hypotheses: Value::Null,
            checks: Vec::new(),
            data: Value::Null,
            csv: String::new(),
            svg: String::new(),
        }
    }
}

fn assemble(cfg: &Config, p: Parts) -> Outcome {
    let pass = p.checks.iter().all(|c| c.pass);
    let mut params: Map<String, Value> = cfg.params().clone();
    params.remove("out");
    let result = json!({
        "schema": SCHEMA,
        "experiment": cfg.experiment,
        "config": Value::Object(params),
        "hypotheses": p.hypotheses,
        "checks": p.checks.iter().map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail})).collect::<Vec<_>>(),
        "pass": pass,
        "data": p.data,
    });
    Outcome {
        pass,
        result,
        csv: p.csv,
        svg: p.svg,
    }
}

/// Polyline chart of one or more series, used where no log-log fit applies.
pub fn series_svg(title: &str, xlabel: &str, series: &[Vec<(f64, f64)>]) -> String {
    let (w, h, pad) = (480.0, 360.0, 40.0);
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flatten()
        .copied()
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (x0, x1) = fiberdim::num::min_max(&xs).unwrap_or((0.0, 1.0));
    let (y0, y1) = fiberdim::num::min_max(&ys).unwrap_or((0.0, 1.0));
    let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-12) * (h - 2.0 * pad);
    let colors = ["black", "steelblue", "darkorange", "seagreen"];
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    let _ = writeln!(s, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    for (i, ser) in series.iter().enumerate() {
        let path: Vec<String> = ser
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>",
            colors[i % colors.len()],
            path.join(" ")
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{pad}\" y=\"20\" font-family=\"monospace\" font-size=\"12\">{title}</text>"
    );
    let _ = writeln!(
        s,
        "<text x=\"{pad}\" y=\"{}\" font-family=\"monospace\" font-size=\"12\">{xlabel}</text>",
        h - 8.0
    );
    s.push_str("</svg>\n");
    s
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn ratio_json(a: &[BigUint], b: &[BigUint], depth: usize) -> Res<Value> {
    let checks = check_ratio_condition(a, b, depth)?;
    Ok(Value::Array(
        checks
            .iter()
            .map(|c| json!({"n": c.n, "holds": c.holds}))
            .collect(),
    ))
}

// ---------------------------------------------------------------- triadic-dim

fn triadic_dim(cfg: &Config, dry: bool) -> Res<Parts> {
    let depth = cfg.usize_or("depth", 12)?;
    let lo = cfg.u64_or("k_lo", 3)? as u32;
    let hi = cfg.u64_or("k_hi", 9)? as u32;
    let tol = cfg.f64_or("tolerance", 0.03)?;
    let s = cfg.f64_or("prescribed_s", 0.5)?;
    let s_depth = cfg.usize_or("prescribed_depth", 12)?;
    let s_tol = cfg.f64_or("prescribed_tolerance", 0.05)?;
    cfg.finish()?;
    if lo + 2 > hi {
        return Err(bad("k_hi", "need at least 3 scales"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(bad("prescribed_s", "must lie in (0, 1)"));
    }
    if depth > 16 || s_depth > 16 {
        return Err(bad("depth", "at most 16 levels"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let set = PointSet::from_intervals(triadic_cantor(depth)?);
    let fit = fit_dimension(&set, &ternary_scales::<Rational>(lo, hi), Anchor::Ternary)?;
    let target = 2f64.ln() / 3f64.ln();
    let tree = prescribed_dimension_cantor(s, s_depth)?;
    let hulls = tree.level_hulls(s_depth);
    let pset = PointSet::Intervals(IntervalUnion::from_parts(hulls));
    // dyadic window from the second level down to the leaf scale
    let k_leaf = ((s_depth as f64) / s).floor() as u32;
    let pfit = dyadic_fit(&pset, 2, k_leaf.max(5) - 1)?;
    let checks = vec![
        check(
            "triadic slope",
            (fit.slope - target).abs() <= tol,
            json!({"slope": fit.slope, "target": target, "tolerance": tol}),
        ),
        check(
            "prescribed slope",
            (pfit.slope - s).abs() <= s_tol,
            json!({"slope": pfit.slope, "target": s, "tolerance": s_tol}),
        ),
        check("counts monotone", fit.counts_monotone() && pfit.counts_monotone(), Value::Null),
    ];
    Ok(Parts {
        hypotheses: json!({"self_similar": true, "open_set_condition": true}),
        checks,
        data: json!({"triadic": fit.to_json(), "prescribed": pfit.to_json()}),
        csv: fit.to_csv(),
        svg: fit.to_svg(),
    })
}

// ----------------------------------------------------------- fat-cantor-build

fn fat_cantor_build(cfg: &Config, dry: bool) -> Res<Parts> {
    let a = cfg.biguint_list_or("a", &[2, 3, 2, 3])?;
    let eps = cfg.rational_or("epsilon", Rational::new(1.into(), 4.into()))?;
    let depth = cfg.usize_or("depth", a.len())?;
    cfg.finish()?;
    let tree = build_fat_cantor(&a, &eps, depth)?;
    let leaves = tree.level_size_u64(depth).filter(|&n| n <= 1 << 20);
    if leaves.is_none() {
        return Err(bad("depth", "more than 2^20 leaves"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let total = Rational::one() - &eps;
    // mass left in a leaf hull after the removals at every later stage
    let tail = |n: usize| &eps * pow2(-(n as i64)) / ubig_to_rat(tree.level_size(n));
    let leaf_hulls = tree.level_hulls(depth)?;
    let leaf_mass: Vec<Rational> = leaf_hulls.iter().map(|(lo, hi)| hi - lo - tail(depth)).collect();
    let mut rows = Vec::new();
    let mut all_pieces = true;
    let mut all_sums = true;
    let mut series = Vec::new();
    for n in 1..=depth {
        let want = &total / ubig_to_rat(&product(&a[..n]));
        let per = leaf_mass.len() / tree.level_size_u64(n).expect("small") as usize;
        let masses: Vec<Rational> = leaf_mass.chunks(per).map(|c| c.iter().sum()).collect();
        let pieces_ok = masses.iter().all(|m| *m == want);
        let sum: Rational = masses.iter().sum();
        all_pieces &= pieces_ok;
        all_sums &= sum == total;
        series.push((n as f64, ratio_to_f64(&want).ln()));
        rows.push(format!(
            "{n},{},{},{},{}",
            masses.len(),
            fmt_rational(&want),
            fmt_rational(&sum),
            fmt_rational(&tree.base_piece_len(n))
        ));
    }
    let checks = vec![
        check("piece measures", all_pieces, json!({"formula": "(1 - epsilon) / (a_1 .. a_n)"})),
        check("level sums", all_sums, json!({"total": fmt_rational(&total)})),
        check("total measure", *tree.total_measure() == total, Value::Null),
    ];
    Ok(Parts {
        hypotheses: json!({"epsilon_in_unit_interval": true, "schedule_length": a.len()}),
        checks,
        data: tree.to_json(64),
        csv: csv_rows("level,pieces,piece_measure,level_sum,hull_length", rows),
        svg: series_svg("log piece measure", "level", &[series]),
    })
}

// ----------------------------------------------------------------- mass-bound

fn selector(cfg: &Config) -> Res<Selector> {
    match cfg.value("selector") {
        None => Ok(Selector::First),
        Some(Value::String(s)) if s == "first" => Ok(Selector::First),
        Some(Value::Object(m)) if m.len() == 1 && m.contains_key("random") => m["random"]
            .as_u64()
            .map(Selector::Random)
            .ok_or_else(|| bad("selector", "random seed must be an integer")),
        _ => Err(bad("selector", "use \"first\" or {\"random\": seed}")),
    }
}

fn mass_bound(cfg: &Config, dry: bool) -> Res<Parts> {
    let a = cfg.biguint_list_or("a", &[16, 512])?;
    let b = cfg.u64_list_or("b", &[8, 256])?;
    let k = cfg.usize_or("k", 2)?;
    let variant = cfg.str_or("variant", "compact")?;
    let eps = cfg.rational_or("epsilon", Rational::new(1.into(), 4.into()))?;
    let sel = selector(cfg)?;
    cfg.finish()?;
    let depth = b.len();
    let tree = match variant.as_str() {
        "compact" => build_compact_type(&a, depth)?,
        "fat" => build_fat_cantor(&a, &eps, depth)?,
        _ => return Err(bad("variant", "use \"compact\" or \"fat\"")),
    };
    let subset = select_subset(&tree, &b, &sel)?;
    if k == 0 || k > depth {
        return Err(bad("k", format!("need 1 <= k <= {depth}")));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let mass = natural_measure(&subset);
    let report = verify_mass_bound(&mass, k)?;
    let bb: Vec<BigUint> = b.iter().map(|&v| v.into()).collect();
    let hyp = json!({
        "ratio_condition": ratio_json(&a, &bb, depth)?,
        "children_sum": mass.children_sum_holds(),
    });
    let checks = vec![
        check("sup mu(B) / diam(B)^(1 - 1/k) <= 4", report.pass, report.to_json()),
        check("children sum", mass.children_sum_holds(), Value::Null),
    ];
    let csv = csv_rows(
        "k,exponent,diam_cap,sup_ratio,windows_scanned",
        [format!(
            "{},{},{},{},{}",
            report.k,
            report.exponent,
            fmt_rational(&report.cap),
            report.sup_ratio,
            report.windows_scanned
        )],
    );
    let svg = series_svg(
        &format!("sup ratio {:.4} (bound 4)", report.sup_ratio),
        "k",
        &[vec![(report.k as f64, report.sup_ratio), (report.k as f64, 4.0)]],
    );
    Ok(Parts {
        hypotheses: hyp,
        checks,
        data: json!({"subset": subset.to_json(64), "mass": mass.to_json(), "report": report.to_json()}),
        csv,
        svg,
    })
}

// ------------------------------------------------------- perturbation runs

/// Parameters shared by the experiments that sample perturbation runs.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub a: Vec<BigUint>,
    pub epsilon: Rational,
    pub depth: usize,
    pub d: usize,
    pub seeds: Vec<u64>,
}

impl RunSpec {
    fn from_config(cfg: &Config) -> Res<Self> {
        let a = cfg.biguint_list_or("a", &[6; 7])?;
        let epsilon = cfg.rational_or("epsilon", Rational::new(1.into(), 4.into()))?;
        let depth = cfg.usize_or("depth", a.len())?;
        let d = cfg.usize_or("d", 1)?;
        let seeds = cfg.seeds()?;
        if depth == 0 || depth > a.len() {
            return Err(bad("depth", "need 1 <= depth <= len(a)"));
        }
        let tree = build_fat_cantor(&a, &epsilon, depth)?;
        match tree.level_size_u64(depth) {
            Some(n) if n <= fiberdim::cantor::MATERIALIZE_LIMIT => {}
            _ => return Err(bad("a", "too many leaves to sample")),
        }
        if d == 0 || d > 4 {
            return Err(bad("d", "need 1 <= d <= 4"));
        }
        Ok(Self {
            a,
            epsilon,
            depth,
            d,
            seeds,
        })
    }

    pub fn tree(&self) -> Res<CantorTree> {
        Ok(build_fat_cantor(&self.a, &self.epsilon, self.depth)?)
    }

    pub fn sample(&self) -> Res<Vec<RunRecord>> {
        let tree = self.tree()?;
        self.seeds
            .iter()
            .map(|&s| sample_run(&tree, self.d, None, s).map_err(RunError::from))
            .collect()
    }

    /// Which growth inequality `a_n >= (2s)^(8n) a_1..a_{n-1}` the schedule meets.
    fn hypotheses(&self) -> Value {
        let base = BigUint::one() << (self.d + 1);
        let growth: Vec<bool> = (1..=self.depth)
            .map(|n| self.a[n - 1] >= num_traits::pow(base.clone(), 8 * n) * product(&self.a[..n - 1]))
            .collect();
        json!({"growth": growth, "paper_schedule": growth.iter().all(|g| *g)})
    }
}

/// Amplitude and occupation-mass invariants for one run.
pub fn run_invariants(run: &RunRecord, bins: usize) -> Res<(bool, bool)> {
    let amp = (1..=run.depth()).all(|n| run.max_amplitude(n) <= pow2(1 - n as i64));
    let h = occupation_histogram(run, bins)?;
    Ok((amp, h.total() == *run.tree().total_measure()))
}

fn perturbation_run(cfg: &Config, dry: bool) -> Res<Parts> {
    let spec = RunSpec::from_config(cfg)?;
    let bins = cfg.usize_or("bins", thresholds::HISTOGRAM_BINS)?;
    let cheb = cfg.value("chebyshev");
    let record_pieces = cfg.usize_or("record_pieces", 36)?;
    cfg.finish()?;
    if bins < 2 {
        return Err(bad("bins", "need at least 2 bins"));
    }
    let cheb = match cheb {
        None => None,
        Some(Value::Object(m)) => {
            let get = |k: &str| m.get(k).and_then(Value::as_u64).ok_or_else(|| bad("chebyshev", format!("missing integer {k}")));
            let p = m.get("p").and_then(Value::as_f64).ok_or_else(|| bad("chebyshev", "missing number p"))?;
            Some((get("u")?, get("v")?, p, get("trials")?, get("seed").unwrap_or(0)))
        }
        Some(_) => return Err(bad("chebyshev", "must be an object")),
    };
    if dry {
        return Ok(Parts::dry());
    }
    let runs = spec.sample()?;
    let mut rows = Vec::new();
    let (mut amp_ok, mut mass_ok) = (true, true);
    let mut records = Vec::new();
    for r in &runs {
        let (a, m) = run_invariants(r, bins)?;
        amp_ok &= a;
        mass_ok &= m;
        let amps: Vec<String> = (1..=r.depth()).map(|n| fmt_rational(&r.max_amplitude(n))).collect();
        rows.push(format!("{},{},{},{}", r.seed(), a, m, amps.join(";")));
        records.push(r.to_json(record_pieces));
    }
    let mut checks = vec![
        check("amplitude |f_n| <= 2^(1-n)", amp_ok, Value::Null),
        check("occupation mass equals lambda(K)", mass_ok, Value::Null),
    ];
    let mut data = json!({"runs": records});
    if let Some((u, v, p, trials, seed)) = cheb {
        let rep = fiberdim::perturb::chebyshev_bound_mc(u, v, p, trials, seed)?;
        checks.push(check(
            "Chebyshev failure rate",
            rep.empirical <= rep.bound + 3.0 * rep.sigma,
            rep.to_json(),
        ));
        data["chebyshev"] = rep.to_json();
    }
    let series: Vec<(f64, f64)> = (1..=spec.depth)
        .map(|n| {
            let worst = runs.iter().map(|r| ratio_to_f64(&r.max_amplitude(n))).fold(0.0, f64::max);
            (n as f64, worst)
        })
        .collect();
    Ok(Parts {
        hypotheses: spec.hypotheses(),
        checks,
        data,
        csv: csv_rows("seed,amplitude_ok,mass_ok,max_amplitudes", rows),
        svg: series_svg("max |f_n| per level", "level", &[series]),
    })
}

// -------------------------------------------------------------- fiber-witness

/// Witness on the first ball of the deepest stage that has one; `Ok(None)` when
/// the discovered set is empty.
pub fn witness_for_run(run: &RunRecord, m: usize) -> Res<Value> {
    let set = discovered_open_set(run, m)?;
    let stages = run.depth() - m;
    let Some(ball) = (0..=stages).rev().find_map(|k| set.at_stage(k).first().copied()) else {
        return Ok(json!({"seed": run.seed(), "pass": false, "reason": "no discovered balls"}));
    };
    match witness_fiber_cantor(run, &set, ball)? {
        WitnessOutcome::Tree(t) => {
            let bad = recheck_witness(run, &t);
            let pieces: usize = t.levels.iter().map(Vec::len).sum();
            Ok(json!({"seed": run.seed(), "pass": bad.is_empty(), "ball": ball, "stage": t.k,
                "pieces": pieces, "leaves": t.leaves().len(), "recheck_failures": bad.len(),
                "min_branching": t.min_branching}))
        }
        WitnessOutcome::Failure(f) => Ok(json!({"seed": run.seed(), "pass": false, "ball": ball,
            "reason": f.reason, "level": f.level})),
    }
}

fn fiber_witness(cfg: &Config, dry: bool) -> Res<Parts> {
    let spec = RunSpec::from_config(cfg)?;
    let m = cfg.usize_or("m", 2)?;
    cfg.finish()?;
    if m == 0 || m >= spec.depth {
        return Err(bad("m", format!("need 1 <= m < depth = {}", spec.depth)));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let runs = spec.sample()?;
    let reports = runs
        .iter()
        .map(|r| witness_for_run(r, m))
        .collect::<Res<Vec<_>>>()?;
    let ok = reports.iter().filter(|r| r["pass"] == true).count();
    let rows = reports.iter().map(|r| {
        format!(
            "{},{},{},{}",
            r["seed"],
            r["pass"],
            r["leaves"].as_u64().unwrap_or(0),
            r["recheck_failures"].as_u64().unwrap_or(0)
        )
    });
    let csv = csv_rows("seed,pass,leaves,recheck_failures", rows);
    let series: Vec<(f64, f64)> = reports
        .iter()
        .map(|r| (r["seed"].as_f64().unwrap_or(0.0), r["leaves"].as_f64().unwrap_or(0.0)))
        .collect();
    Ok(Parts {
        hypotheses: spec.hypotheses(),
        checks: vec![check(
            "witness trees pass the exact recheck",
            ok == reports.len(),
            json!({"passed": ok, "runs": reports.len()}),
        )],
        data: json!({"m": m, "witnesses": reports}),
        csv,
        svg: series_svg("witness leaves per seed", "seed", &[series]),
    })
}

// ----------------------------------------------------------------- occupation

#[derive(Debug, Clone, PartialEq)]
pub struct OccupationRow {
    pub seed: u64,
    pub mass_fraction: f64,
    pub max_density: f64,
    pub modal_value: Rational,
    pub level_slope: f64,
    pub level_r2: f64,
}

pub fn occupation_row(run: &RunRecord, bins: usize, density: f64) -> Res<OccupationRow> {
    let h = occupation_histogram(run, bins)?;
    let ls = modal_level_set_fit(run)?;
    Ok(OccupationRow {
        seed: run.seed(),
        mass_fraction: h.fraction_le(density),
        max_density: h.max_density(),
        modal_value: ls.y[0].clone(),
        level_slope: ls.fit.slope,
        level_r2: ls.fit.r2,
    })
}

fn fraction(hits: usize, total: usize) -> f64 {
    hits as f64 / total.max(1) as f64
}

fn occupation(cfg: &Config, dry: bool) -> Res<Parts> {
    let spec = RunSpec::from_config(cfg)?;
    let bins = cfg.usize_or("bins", thresholds::HISTOGRAM_BINS)?;
    let density = cfg.f64_or("density_bound", thresholds::DENSITY_BOUND)?;
    let mass_fraction = cfg.f64_or("mass_fraction", thresholds::MASS_FRACTION)?;
    let min_slope = cfg.f64_or("min_slope", thresholds::LEVEL_SET_MIN_SLOPE)?;
    let seed_fraction = cfg.f64_or("seed_fraction", thresholds::SEED_FRACTION)?;
    cfg.finish()?;
    if spec.d != 1 {
        return Err(bad("d", "level-set fits need d = 1"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let runs = spec.sample()?;
    let rows = runs
        .iter()
        .map(|r| occupation_row(r, bins, density))
        .collect::<Res<Vec<_>>>()?;
    let hist_hits = rows.iter().filter(|r| r.mass_fraction >= mass_fraction).count();
    let slope_hits = rows.iter().filter(|r| r.level_slope >= min_slope).count();
    let checks = vec![
        check(
            "histogram mass under density bound",
            fraction(hist_hits, rows.len()) >= seed_fraction,
            json!({"seeds_passing": hist_hits, "seeds": rows.len(), "bins": bins,
                   "density_bound": density, "mass_fraction": mass_fraction}),
        ),
        check(
            "modal level-set slope",
            fraction(slope_hits, rows.len()) >= seed_fraction,
            json!({"seeds_passing": slope_hits, "seeds": rows.len(), "min_slope": min_slope}),
        ),
    ];
    let csv = csv_rows(
        "seed,mass_fraction,max_density,modal_value,level_slope,level_r2",
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.seed,
                r.mass_fraction,
                r.max_density,
                fmt_rational(&r.modal_value),
                r.level_slope,
                r.level_r2
            )
        }),
    );
    let svg = series_svg(
        "level-set slope and mass fraction per seed",
        "seed",
        &[
            rows.iter().map(|r| (r.seed as f64, r.level_slope)).collect(),
            rows.iter().map(|r| (r.seed as f64, r.mass_fraction)).collect(),
        ],
    );
    let data = json!({"rows": rows.iter().map(|r| json!({"seed": r.seed, "mass_fraction": r.mass_fraction,
        "max_density": r.max_density, "modal_value": fmt_rational(&r.modal_value),
        "level_slope": r.level_slope, "level_r2": r.level_r2})).collect::<Vec<_>>()});
    Ok(Parts {
        hypotheses: spec.hypotheses(),
        checks,
        data,
        csv,
        svg,
    })
}

// ----------------------------------------------------------------- graph-dim

fn graph_dim(cfg: &Config, dry: bool) -> Res<Parts> {
    let spec = RunSpec::from_config(cfg)?;
    let lo = cfg.f64_or("band_lo", thresholds::GRAPH_BAND.0)?;
    let hi = cfg.f64_or("band_hi", thresholds::GRAPH_BAND.1)?;
    let seed_fraction = cfg.f64_or("seed_fraction", thresholds::SEED_FRACTION)?;
    cfg.finish()?;
    if spec.depth < 4 {
        return Err(bad("depth", "graph fits need depth >= 4"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let runs = spec.sample()?;
    let fits = runs.iter().map(graph_fit).collect::<Result<Vec<_>, _>>()?;
    let hits = fits.iter().filter(|f| f.slope >= lo && f.slope <= hi).count();
    let checks = vec![check(
        "graph slope band",
        fraction(hits, fits.len()) >= seed_fraction,
        json!({"seeds_passing": hits, "seeds": fits.len(), "band": [lo, hi]}),
    )];
    let csv = csv_rows(
        "seed,slope,r2,counts",
        runs.iter().zip(&fits).map(|(r, f)| {
            let c: Vec<String> = f.counts.iter().map(u64::to_string).collect();
            format!("{},{},{},{}", r.seed(), f.slope, f.r2, c.join(";"))
        }),
    );
    let svg = fits.first().map(DimensionFit::to_svg).unwrap_or_default();
    let data = json!({"fits": runs.iter().zip(&fits).map(|(r, f)| json!({"seed": r.seed(), "fit": f.to_json()})).collect::<Vec<_>>()});
    Ok(Parts {
        hypotheses: spec.hypotheses(),
        checks,
        data,
        csv,
        svg,
    })
}

// ------------------------------------------------------------ sawtooth-witness

fn modulus(cfg: &Config, key: &str, default: Modulus) -> Res<Modulus> {
    let Some(v) = cfg.value(key) else { return Ok(default) };
    let family = v.get("family").and_then(Value::as_str).unwrap_or("");
    let c = v
        .get("c")
        .map(|c| match c {
            Value::String(s) => fiberdim::num::parse_rational(s).map_err(|e| bad(key, e.to_string())),
            Value::Number(n) => n
                .as_i64()
                .map(|i| Rational::from_integer(i.into()))
                .ok_or_else(|| bad(key, "c must be an integer or \"p/q\"")),
            _ => Err(bad(key, "c must be an integer or \"p/q\"")),
        })
        .transpose()?
        .ok_or_else(|| bad(key, "missing c"))?;
    match family {
        "linear" => Ok(Modulus::linear(c)?),
        "hoelder" => {
            let alpha = v
                .get("alpha")
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(key, "missing alpha"))?;
            Ok(Modulus::hoelder(c, alpha)?)
        }
        _ => Err(bad(key, "family must be \"linear\" or \"hoelder\"")),
    }
}

fn grid_function(cfg: &Config, key: &str) -> Res<Option<GridFunction<Rational>>> {
    let Some(v) = cfg.value(key) else { return Ok(None) };
    let list = |k: &str| -> Res<Vec<Rational>> {
        v.get(k)
            .and_then(Value::as_array)
            .ok_or_else(|| bad(key, format!("missing array {k}")))?
            .iter()
            .map(|x| fiberdim::num::serde_str::value_to_rational(x).map_err(|e| bad(key, e.to_string())))
            .collect()
    };
    Ok(Some(GridFunction::linear(list("xs")?, list("ys")?).map_err(|e| bad(key, e.to_string()))?))
}

fn sawtooth_hypotheses(cfg: &SawtoothConfig) -> Value {
    json!({
        "paper_exact": cfg.paper_exact,
        "levels": cfg.levels.iter().map(|l| json!({"n": l.n, "modulus_ok": l.modulus_ok,
            "growth_ok": l.growth_ok, "b_ok": l.b_ok})).collect::<Vec<_>>(),
    })
}

fn sawtooth_witness(cfg: &Config, dry: bool) -> Res<Parts> {
    let a = cfg.biguint_list_or("a", &[1 << 8, 1 << 9, 1 << 10, 1 << 11])?;
    let b = cfg.biguint_list_or("b", &[1 << 3, 1 << 4, 1 << 5, 1 << 6])?;
    let h = modulus(cfg, "h", Modulus::Linear { c: Rational::one() })?;
    let levels = cfg.usize_or("levels", 3)?;
    let ys = cfg.rational_list_or(
        "ys",
        &[Rational::new((-1).into(), 8.into()), Rational::zero(), Rational::new(1.into(), 8.into())],
    )?;
    let k_lo = cfg.u64_or("k_lo", 4)? as u32;
    let k_hi = cfg.u64_or("k_hi", 14)? as u32;
    let min_slope = cfg.f64_or("min_slope", 0.8)?;
    let f = grid_function(cfg, "f")?;
    cfg.finish()?;
    let sc = sawtooth_config_desk(&h, &a, &b).map_err(|e| bad("b", e.to_string()))?;
    if levels == 0 || levels >= sc.depth() {
        return Err(bad("levels", "need 1 <= levels < len(a)"));
    }
    if k_lo + 2 > k_hi || k_hi > 24 {
        return Err(bad("k_hi", "need k_lo + 2 <= k_hi <= 24"));
    }
    if ys.is_empty() {
        return Err(bad("ys", "must not be empty"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let saw = sawtooth_g(&sc);
    let mut checks = Vec::new();
    let mut per_y = Vec::new();
    let mut rows = Vec::new();
    let mut svg = String::new();
    for y in &ys {
        let tree = witness_level_tree(f.as_ref(), &sc, y, levels)?;
        let (tree_ok, detail) = match &tree {
            LevelTreeOutcome::Tree(t) => {
                let errors = verify_level_tree(f.as_ref(), &sc, t);
                (
                    errors.is_empty(),
                    json!({"m": t.m, "leaves": t.leaf_count(), "errors": errors.iter().take(8).collect::<Vec<_>>(),
                           "tree": t.to_json(16)}),
                )
            }
            LevelTreeOutcome::Failure(e) => (
                false,
                json!({"failure": {"level": e.level, "node": e.node, "reason": e.reason}}),
            ),
        };
        let n = match &tree {
            LevelTreeOutcome::Tree(t) => t.m + levels,
            LevelTreeOutcome::Failure(_) => sc.depth(),
        };
        let counts = sawtooth_level_counts(&saw, n, f.as_ref(), y, k_hi, 1 << 20);
        let used: Vec<(u32, u64)> = counts.iter().copied().filter(|(k, _)| *k >= k_lo).collect();
        let scales: Vec<f64> = used.iter().map(|(k, _)| 0.5f64.powi(*k as i32 + 1)).collect();
        let cs: Vec<u64> = used.iter().map(|(_, c)| *c).collect();
        let fit = DimensionFit::from_counts(scales, cs, (0, used.len().saturating_sub(1)), Anchor::Binary)?;
        let label = fmt_rational(y);
        checks.push(check(&format!("bracket certificates at y = {label}"), tree_ok, Value::Null));
        checks.push(check(
            &format!("level-set slope at y = {label}"),
            fit.slope >= min_slope,
            json!({"slope": fit.slope, "min_slope": min_slope, "n": n}),
        ));
        for (k, c) in &counts {
            rows.push(format!("{label},{k},{c}"));
        }
        if svg.is_empty() {
            svg = fit.to_svg();
        }
        per_y.push(json!({"y": label, "witness": detail, "fit": fit.to_json(),
            "counts": counts.iter().map(|(k, c)| json!([k, c])).collect::<Vec<_>>()}));
    }
    Ok(Parts {
        hypotheses: sawtooth_hypotheses(&sc),
        checks,
        data: json!({"schedule": sc.to_json(), "results": per_y}),
        csv: csv_rows("y,k,count", rows),
        svg,
    })
}

// ------------------------------------------------------------- singleton-cone

fn singleton_cone(cfg: &Config, dry: bool) -> Res<Parts> {
    let x0 = cfg.rational_or("x0", Rational::new(1.into(), 2.into()))?;
    let y0 = cfg.rational_or("y0", Rational::zero())?;
    let h = modulus(cfg, "h", Modulus::Linear { c: Rational::from_integer(2.into()) })?;
    let lip = cfg.rational_or("lip", Rational::one())?;
    let breaks = cfg.usize_or("breaks", 16)?;
    let count = cfg.u64_or("count", 100)?;
    let seed = cfg.u64("seed")?;
    cfg.finish()?;
    if x0.is_negative() || x0 > Rational::one() {
        return Err(bad("x0", "must lie in [0, 1]"));
    }
    if breaks == 0 || breaks > 4096 {
        return Err(bad("breaks", "need 1 <= breaks <= 4096"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let cone = cone_function(&x0, &y0, &h);
    let xs = cone.grid_points();
    let gs: Vec<Rational> = xs.iter().map(|x| cone.eval_rational(x)).collect();
    let results: Vec<(u64, bool, usize)> = fiberdim::par::map_range(count as usize, |i| {
        let f = random_lipschitz_pl(&lip, breaks, &x0, &y0, seed, i as u64);
        let slopes = f.slopes().expect("linear");
        let (fx, fy) = (f.xs(), f.ys());
        let mut piece = 0;
        let mut touches = 0;
        let mut ok = true;
        for (x, g) in xs.iter().zip(&gs) {
            while piece + 1 < slopes.len() && fx[piece + 1] <= *x {
                piece += 1;
            }
            let v = &fy[piece] + &slopes[piece] * (x - &fx[piece]);
            if *x == x0 {
                ok &= v == *g;
                touches += 1;
            } else {
                ok &= v < *g;
            }
        }
        (i as u64, ok, touches)
    });
    let passed = results.iter().filter(|r| r.1).count();
    let dominates = match &h {
        Modulus::Linear { c } => lip < *c,
        Modulus::Hoelder { .. } => false,
    };
    Ok(Parts {
        hypotheses: json!({"h": h.to_json(), "lip": fmt_rational(&lip), "h_exceeds_lipschitz_bound": dominates}),
        checks: vec![check(
            "f < g off x0 on the grid",
            passed == results.len(),
            json!({"passed": passed, "count": count, "grid_points": xs.len()}),
        )],
        data: json!({"x0": fmt_rational(&x0), "y0": fmt_rational(&y0)}),
        csv: csv_rows("index,pass", results.iter().map(|r| format!("{},{}", r.0, r.1))),
        svg: series_svg(
            "cone g",
            "x",
            &[xs.iter().zip(&gs).map(|(x, g)| (ratio_to_f64(x), ratio_to_f64(g))).collect()],
        ),
    })
}

// ------------------------------------------------------------------ staircase

fn staircase(cfg: &Config, dry: bool) -> Res<Parts> {
    let depth = cfg.usize_or("depth", 6)?;
    let alpha = cfg.rational_list_or("alpha", &[])?;
    let diam_levels = cfg.usize_or("diameter_levels", 4)?;
    let h = match cfg.value("h") {
        Some(_) => Some(modulus(cfg, "h", Modulus::Linear { c: Rational::one() })?),
        None => None,
    };
    cfg.finish()?;
    let sc = if alpha.is_empty() {
        if depth == 0 || depth > 16 {
            return Err(bad("depth", "need 1 <= depth <= 16"));
        }
        StaircaseConfig::geometric(depth)
    } else {
        StaircaseConfig::new(alpha).map_err(|e| bad("alpha", e.to_string()))?
    };
    let depth = sc.depth();
    if diam_levels >= depth {
        return Err(bad("diameter_levels", "must be below the depth"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let g = staircase_g(&sc);
    let z1 = sc.z(&[1]);
    let g_zero = g.eval(&Rational::zero());
    let g_z1 = g.eval(&z1);
    let mut diam_ok = true;
    let mut rows = Vec::new();
    for n in 1..=diam_levels {
        let want: Rational =
            (n + 1..=depth).map(|k| sc.alpha(k).clone()).sum::<Rational>() * Rational::from_integer(2.into());
        for i in 1..=(1u64 << n) {
            let got = g.preimage_diameter(n, i);
            let ok = got.as_ref() == Some(&want);
            diam_ok &= ok;
            rows.push(format!(
                "{n},{i},{},{}",
                got.as_ref().map(fmt_rational).unwrap_or_default(),
                fmt_rational(&want)
            ));
        }
    }
    let pts = g.points();
    let monotone = pts.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1)
        && pts.iter().all(|(z, v)| g.eval(z) == *v)
        && pts.windows(2).all(|w| {
            // between consecutive points g is flat at the left value
            let mid = (&w[0].0 + &w[1].0) / Rational::from_integer(2.into());
            g.eval(&mid) == w[0].1
        });
    let mut hyp = json!({"halving_rule": true, "depth": depth});
    if let Some(h) = &h {
        let ok = match c_gamma_sets(&sc, h, depth) {
            Ok(levels) => json!({"ok": true, "empty_segments": levels.iter().map(|l| l.empty_segments()).collect::<Vec<_>>()}),
            Err(e) => json!({"ok": false, "reason": e.to_string()}),
        };
        hyp["c_gamma"] = ok;
    }
    let three_quarters = Rational::new(3.into(), 4.into());
    Ok(Parts {
        hypotheses: hyp,
        checks: vec![
            check("g(0) = 0", g_zero.is_zero(), json!(fmt_rational(&g_zero))),
            check("g(z_1) = 3/4", g_z1 == three_quarters, json!(fmt_rational(&g_z1))),
            check("truncated preimage diameters", diam_ok, Value::Null),
            check("monotone on all truncated points", monotone, json!({"points": pts.len()})),
        ],
        data: json!({"alpha": sc.alphas().iter().map(fmt_rational).collect::<Vec<_>>(),
                     "top_value": fmt_rational(&g.top_value())}),
        csv: csv_rows("n,i,diameter,expected", rows),
        svg: series_svg(
            "truncated staircase",
            "x",
            &[pts.iter().map(|(z, v)| (ratio_to_f64(z), ratio_to_f64(v))).collect()],
        ),
    })
}

// ------------------------------------------------------------- gauge-schedule

fn gauge_from(cfg: &Config, key: &str, default: Gauge<f64>) -> Res<Gauge<f64>> {
    match cfg.value(key) {
        None => Ok(default),
        Some(v) => Gauge::from_json(&v).map_err(|e| bad(key, e.to_string())),
    }
}

/// `s = p / q` when the power exponent is a dyadic rational below one.
fn dyadic_power(g: &Gauge<f64>) -> Option<(u32, u32)> {
    let Gauge::Power { s } = g else { return None };
    let r = f64_to_ratio(*s).ok()?;
    let (p, q) = (r.numer().to_u32()?, r.denom().to_u32()?);
    (q <= 1 << 16 && p < q).then_some((p, q))
}

fn gauge_schedule_exp(cfg: &Config, dry: bool) -> Res<Parts> {
    let g = gauge_from(cfg, "gauge", Gauge::Power { s: 0.5 })?;
    let d = cfg.u64_or("d", 1)? as u32;
    let depth = cfg.usize_or("depth", 3)?;
    let phi_points = match cfg.value("phi_points") {
        None => vec![1.0, 4.0, 10.0],
        Some(v) => v
            .as_array()
            .and_then(|a| a.iter().map(Value::as_f64).collect::<Option<Vec<_>>>())
            .ok_or_else(|| bad("phi_points", "must be an array of numbers"))?,
    };
    let phi_tol = cfg.f64_or("phi_tolerance", 1e-9)?;
    let psi = gauge_from(cfg, "divide_gauge", Gauge::Power { s: 1.5 })?;
    let divide_d = cfg.u64_or("divide_d", 1)? as u32;
    let divide_expect = match cfg.value("divide_expect") {
        None => Some(Gauge::Power { s: 0.5 }),
        Some(Value::Null) => None,
        Some(v) => Some(Gauge::from_json(&v).map_err(|e| bad("divide_expect", e.to_string()))?),
    };
    let grid_n = cfg.usize_or("grid", 1000)?;
    let grid_tol = cfg.f64_or("grid_tolerance", 1e-12)?;
    cfg.finish()?;
    if d == 0 || d > 4 {
        return Err(bad("d", "need 1 <= d <= 4"));
    }
    if depth > 6 {
        return Err(bad("depth", "at most 6 levels"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let mut checks = Vec::new();
    let mut rows = Vec::new();
    let closed = match g {
        Gauge::Power { s } if s < 1.0 => Some(move |x: f64| x.powf(1.0 / (1.0 - s)) + 1.0),
        _ => None,
    };
    let mut phi_ok = true;
    let mut phi_series = Vec::new();
    for &x in &phi_points {
        let p = phi_transform(&g, x, DEFAULT_PHI_TOL.min(phi_tol * 1e-3))?;
        let expected = closed.map(|c| c(x));
        if let Some(e) = expected {
            phi_ok &= (p.value - e).abs() <= phi_tol;
        }
        phi_series.push((x, p.value));
        rows.push(format!("phi,{x},{},{}", p.value, expected.map(|e| e.to_string()).unwrap_or_default()));
    }
    if closed.is_some() {
        checks.push(check("Phi closed form", phi_ok, json!({"tolerance": phi_tol})));
    }
    let divided = divide_by_power(&psi, divide_d)?;
    if let Some(expect) = &divide_expect {
        let grid = log_grid(grid_n, 1e-6, 1.0);
        let worst = grid
            .iter()
            .map(|&r| (divided.eval(r) - expect.eval(r)).abs())
            .fold(0.0, f64::max);
        checks.push(check(
            "divide_by_power matches expectation",
            worst <= grid_tol,
            json!({"max_error": worst, "grid": grid_n}),
        ));
    }
    let sched = gauge_schedule(&g, d, depth)?;
    checks.push(check("schedule inequalities (construction)", sched.all_ok(), Value::Null));
    if let Some((p, q)) = dyadic_power(&g) {
        let re = recheck_power_schedule(&sched, p, q)?;
        checks.push(check(
            "schedule inequalities (exact recheck)",
            re.iter().all(|r| r.growth && r.phi),
            Value::Array(re.iter().map(|r| json!({"n": r.n, "growth": r.growth, "phi": r.phi})).collect()),
        ));
    }
    for l in &sched.levels {
        rows.push(format!("a,{},{},{}", l.n, l.a, l.b));
    }
    Ok(Parts {
        hypotheses: json!({"class_g1": format!("{:?}", g.in_class(1.0)).to_lowercase(),
                           "schedule": sched.to_json()}),
        checks,
        data: json!({"gauge": g.to_json(), "divided": divided.to_json()}),
        csv: csv_rows("kind,key,value,expected", rows),
        svg: series_svg("Phi transform", "x", &[phi_series]),
    })
}

// ------------------------------------------------------------ ultrametric-map

fn ultrametric_map(cfg: &Config, dry: bool) -> Res<Parts> {
    let weights = cfg.rational_list_or(
        "weights",
        &[Rational::new(1.into(), 3.into()), Rational::new(2.into(), 3.into())],
    )?;
    let depth = cfg.usize_or("depth", 3)?;
    let bs = cfg.u64_list_or("uniform_b", &[2, 3, 4])?;
    let udepth = cfg.usize_or("uniform_depth", 4)?;
    cfg.finish()?;
    if depth == 0 || depth > 12 || udepth == 0 || udepth > 8 {
        return Err(bad("depth", "need 1 <= depth <= 12 and 1 <= uniform_depth <= 8"));
    }
    if bs.iter().any(|&b| !(2..=8).contains(&b)) {
        return Err(bad("uniform_b", "entries must lie in 2..=8"));
    }
    let tree: ExactUltrametric =
        UltrametricTree::weighted(&weights, depth).map_err(|e| bad("weights", e.to_string()))?;
    if dry {
        return Ok(Parts::dry());
    }
    let push = pushforward_check(&tree);
    let push_ok = push.iter().all(|c| c.pass);
    let mut checks = vec![
        check("pushforward lengths equal subtree masses", push_ok, json!({"subtrees": push.len()})),
        check("ultrametric inequality", tree.ultrametric_holds()?, Value::Null),
        check("balls nested or disjoint", tree.balls_nested_or_disjoint()?, Value::Null),
    ];
    if tree.leaf_count() <= fiberdim::ultra::EXHAUSTIVE_LIMIT {
        checks.push(check("order is 1-monotone", tree.one_monotone()?, Value::Null));
    }
    let mut rows: Vec<String> = push
        .iter()
        .map(|c| {
            let path: Vec<String> = c.path.iter().map(u32::to_string).collect();
            format!("subtree,{},{},{}", path.join(""), fmt_rational(&(&c.hi - &c.lo)), fmt_rational(&c.mass))
        })
        .collect();
    let mut holder = Vec::new();
    let mut series = Vec::new();
    for &b in &bs {
        let u: ExactUltrametric = UltrametricTree::uniform(b as u32, udepth)?;
        let prof = holder_profile(&u, 0, 0);
        let target = (b as f64).ln() / 2f64.ln();
        // exact witness: mu([x, z]) = b^-n and d(x, z) = 2^-n give exponent log b / log 2
        let exact = prof.witness.as_ref().is_some_and(|(_, _, m, dist)| {
            (1..=udepth as i64).any(|n| {
                *dist == pow2(-n)
                    && *m == Rational::new(1.into(), num_traits::pow(num_bigint::BigInt::from(b), n as usize))
            })
        });
        let ok = exact && prof.min_exponent.is_some_and(|e| (e - target).abs() <= 1e-12);
        checks.push(check(
            &format!("Hoelder exponent for b = {b}"),
            ok,
            json!({"min_exponent": prof.min_exponent, "target": target, "exact_witness": exact}),
        ));
        rows.push(format!("holder,{b},{},{target}", prof.min_exponent.unwrap_or(f64::NAN)));
        series.push((b as f64, prof.min_exponent.unwrap_or(f64::NAN)));
        holder.push(json!({"b": b, "profile": prof.to_json()}));
    }
    Ok(Parts {
        hypotheses: json!({"weights_sum_to_one": weights.iter().sum::<Rational>() == Rational::one()}),
        checks,
        data: json!({"tree": tree.to_json(), "holder": holder}),
        csv: csv_rows("kind,key,value,expected", rows),
        svg: series_svg("min Hoelder exponent by b", "b", &[series]),
    })
}

// ----------------------------------------------------------------- indicatrix

fn indicatrix(cfg: &Config, dry: bool) -> Res<Parts> {
    let count = cfg.u64_or("count", 50)?;
    let breaks = cfg.usize_or("breaks", 64)?;
    let lip = cfg.rational_or("lip", Rational::one())?;
    let seed = cfg.u64("seed")?;
    cfg.finish()?;
    if breaks == 0 || breaks > 4096 {
        return Err(bad("breaks", "need 1 <= breaks <= 4096"));
    }
    if !lip.is_positive() {
        return Err(bad("lip", "must be positive"));
    }
    if dry {
        return Ok(Parts::dry());
    }
    let zero = Rational::zero();
    let mut rows = Vec::new();
    let mut all_ok = true;
    for i in 0..count {
        let f = random_lipschitz_pl(&lip, breaks, &zero, &zero, seed, i);
        let r = banach_indicatrix_check(&f)?;
        all_ok &= r.pass && r.equality == constant_speed(&f);
        rows.push(format!(
            "random,{i},{},{},{}",
            fmt_rational(&r.integral),
            fmt_rational(&r.total_variation),
            fmt_rational(&r.lip)
        ));
    }
    // equality cases: a monotone line and a single tooth, both at constant speed
    let n = breaks as i64;
    let xs: Vec<Rational> = (0..=n).map(|k| Rational::new(k.into(), n.into())).collect();
    let line = GridFunction::linear(xs.clone(), xs.iter().map(|x| x * &lip).collect())?;
    let half = Rational::new(1.into(), 2.into());
    let tooth = GridFunction::linear(
        xs.clone(),
        xs.iter().map(|x| (&half - (x - &half).abs()) * &lip).collect(),
    )?;
    let mut eq_ok = true;
    for (name, f) in [("monotone", &line), ("tooth", &tooth)] {
        let r = banach_indicatrix_check(f)?;
        eq_ok &= r.pass && r.equality;
        rows.push(format!(
            "{name},0,{},{},{}",
            fmt_rational(&r.integral),
            fmt_rational(&r.total_variation),
            fmt_rational(&r.lip)
        ));
    }
    Ok(Parts {
        hypotheses: json!({"monotone_case": is_monotone(&line), "piecewise_linear": true}),
        checks: vec![
            check("integral N = TV(f) <= Lip(f)", all_ok, json!({"count": count})),
            check("equality for monotone and single-tooth cases", eq_ok, Value::Null),
        ],
        data: json!({"count": count, "breaks": breaks}),
        csv: csv_rows("kind,index,integral_n,total_variation,lip", rows),
        svg: series_svg(
            "single tooth",
            "x",
            &[tooth.xs().iter().zip(tooth.ys()).map(|(x, y)| (ratio_to_f64(x), ratio_to_f64(y))).collect()],
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(v: Value) -> Config {
        Config::from_value(v).unwrap()
    }

    #[test]
    fn registry_names_unique() {
        let mut names: Vec<&str> = REGISTRY.iter().map(|r| r.0).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 13);
    }

    #[test]
    fn missing_seed_names_seed() {
        let c = cfg(json!({"experiment": "perturbation-run"}));
        match validate(&c) {
            Err(RunError::Config(e)) => assert_eq!(e.key, "seed"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let c = cfg(json!({"experiment": "staircase", "dpeth": 3}));
        match validate(&c) {
            Err(RunError::Config(e)) => assert_eq!(e.key, "dpeth"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_experiments_pass() {
        for v in [
            json!({"experiment": "fat-cantor-build"}),
            json!({"experiment": "staircase"}),
            json!({"experiment": "ultrametric-map"}),
            json!({"experiment": "indicatrix", "seed": 1, "count": 5}),
            json!({"experiment": "singleton-cone", "seed": 1, "count": 5}),
        ] {
            let out = run(&cfg(v.clone())).unwrap();
            assert!(out.pass, "{v}: {}", out.result["checks"]);
            assert_eq!(out.result["schema"], SCHEMA);
            assert!(out.csv.lines().count() > 1);
            assert!(out.svg.starts_with("<svg"));
        }
    }
}
