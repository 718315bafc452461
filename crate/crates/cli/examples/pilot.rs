//! Pilot for the property-based perturbation checks: depth 5, seeds 0..20.
//! Prints per-seed statistics under several candidate settings.

use fiberdim::cantor::build_fat_cantor;
use fiberdim::num::{big, rat};
use fiberdim::perturb::{occupation_histogram, sample_run};
use fiberdim_cli::estimate::{dyadic_fit, graph_fit, leaf_scale, modal_level_set_fit};
use fiberdim_cli::thresholds::*;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let depth: usize = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let seeds: u64 = std::env::args().nth(2).map_or(Ok(20), |s| s.parse())?;
    let tree = build_fat_cantor(&vec![big(6); depth], &rat(1, 4), depth)?;
    let (mut hist_ok, mut level_ok, mut graph_ok) = (0, 0, 0);
    for seed in 0..seeds {
        let run = sample_run(&tree, 1, None, seed)?;
        let fr: Vec<String> = [8, 16, 32, 64]
            .iter()
            .map(|&b| {
                let h = occupation_histogram(&run, b).expect("bins");
                format!("{b}:{:.3}", h.fraction_le(DENSITY_BOUND))
            })
            .collect();
        let h = occupation_histogram(&run, HISTOGRAM_BINS)?;
        hist_ok += (h.fraction_le(DENSITY_BOUND) >= MASS_FRACTION) as u32;
        let ls = modal_level_set_fit(&run)?;
        level_ok += (ls.fit.slope >= LEVEL_SET_MIN_SLOPE) as u32;
        let set = fiberdim::dimension::PointSet::Intervals(fiberdim::IntervalUnion::from_parts(
            ls.level
                .hulls(&run)
                .iter()
                .map(|(a, b)| (fiberdim::num::ratio_to_f64(a), fiberdim::num::ratio_to_f64(b)))
                .collect(),
        ));
        let alt: Vec<String> = [1u32, 3, 4]
            .iter()
            .map(|&lo| format!("{lo}:{:.3}", dyadic_fit(&set, lo, leaf_scale(&run)).map_or(f64::NAN, |f| f.slope)))
            .collect();
        let g = graph_fit(&run)?;
        graph_ok += (g.slope >= GRAPH_BAND.0 && g.slope <= GRAPH_BAND.1) as u32;
        println!(
            "seed {seed:2} hist {} | level y={} slope {:.3} r2 {:.3} alt {} | graph {:.3}",
            fr.join(" "),
            ls.y[0],
            ls.fit.slope,
            ls.fit.r2,
            alt.join(" "),
            g.slope
        );
    }
    println!("pass counts of {seeds}: histogram {hist_ok} level-set {level_ok} graph {graph_ok}");
    Ok(())
}
