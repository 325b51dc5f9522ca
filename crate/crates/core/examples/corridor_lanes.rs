//! Orderly crowd walking down a corridor towards an exit at its right end.
//!
//! Writes metrics, PGM frames at the snapshot times and final states below `$CROWDLAB_OUT`
//! (default `runs/`), then prints the lane count and the transverse density profile at each
//! snapshot.

use std::path::PathBuf;

use crowdlab::harness::analysis::{profile_maxima, transverse_profile};
use crowdlab::harness::{run_scenario, Axis, RunConfig, RunOptions, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let root = std::env::var_os("CROWDLAB_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let mut cfg = RunConfig::preset(ScenarioName::Corridor);
    cfg.output.frames = true;
    let out = run_scenario(&cfg, &root, &RunOptions::default())?.remove(0);
    println!("artifacts in {}", out.dir.display());

    let traj = &out.trajectory;
    for &t in &cfg.solver.snapshot_times {
        let f = traj.frame_near(t);
        let rho = &f.state.densities[0];
        let profile = transverse_profile(rho, Axis::X, None);
        let lanes = profile_maxima(&profile, 0.3);
        println!("t = {:.3}: {} lanes at rows {:?}", f.state.t, lanes.len(), lanes);
        let top = profile.iter().cloned().fold(0.0, f64::max);
        for (j, p) in profile.iter().enumerate().rev() {
            if *p > 0.0 {
                let bar = "#".repeat((40.0 * p / top).round() as usize);
                println!("  {j:3} {p:.4} {bar}");
            }
        }
    }
    Ok(())
}
