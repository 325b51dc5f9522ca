//! Evacuation of a room through a single door, with and without four columns placed in front of
//! the door. Prints the remaining in-room mass over time and the time at which the room is
//! cleared for several clearing levels.

use std::path::PathBuf;

use crowdlab::harness::analysis::{evacuation_time, remaining_series};
use crowdlab::harness::{compare_runs, run_scenario, CompareMetric, RunConfig, RunOptions, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let root = std::env::var_os("CROWDLAB_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let cfg = RunConfig::preset(ScenarioName::Braess);
    let runs = run_scenario(&cfg, &root, &RunOptions::default())?;

    for r in &runs {
        let series = remaining_series(&r.trajectory.metrics, 0);
        println!("{} ({})", r.label, r.dir.display());
        for level in [0.5, 0.1, 0.05, 0.01] {
            let e = evacuation_time(&series, level);
            println!("  {:>4.0}% left the room at t = {:.3}", 100.0 * (1.0 - level), e.time);
        }
    }
    for (t, m) in remaining_series(&runs[0].trajectory.metrics, 0).iter().step_by(4) {
        let cols = remaining_series(&runs[1].trajectory.metrics, 0);
        // latest row of the other run at or before t
        let other = cols.iter().take_while(|(s, _)| *s <= t + 1e-9).last().map_or(1.0, |p| p.1);
        println!("t = {t:7.3}  remaining empty {m:.4}  columns {other:.4}");
    }
    let gap = compare_runs(&runs[1].dir, &runs[0].dir, CompareMetric::Evac, &cfg.output.metrics_file)?;
    println!("columns minus empty evacuation time: {gap:.3}");
    Ok(())
}
