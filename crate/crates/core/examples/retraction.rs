//! Two populations share a corridor section; the first walks towards the right exit while the
//! second has no preferred direction and only yields to the first. Prints the centres of mass
//! and the number of fingers of the yielding population as they develop.

use crowdlab::harness::analysis::{lane_count, Axis};
use crowdlab::harness::{build_runs, RunConfig, ScenarioName};
use crowdlab::DensityField;

fn centre(rho: &DensityField) -> [f64; 2] {
    let g = rho.grid();
    let (mut m, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for (k, v) in rho.values().iter().enumerate() {
        let (i, j) = g.ij(k);
        let c = g.center(i, j);
        m += v;
        cx += v * c[0];
        cy += v * c[1];
    }
    [cx / m, cy / m]
}

fn main() -> crowdlab::Result<()> {
    let mut cfg = RunConfig::preset(ScenarioName::Retraction);
    cfg.solver.frame_stride = 25;
    let run = build_runs(&cfg)?.remove(0);
    let traj = crowdlab::fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    println!("    t   walker x   yielding x   fingers");
    for f in &traj.frames {
        let [a, b] = [&f.state.densities[0], &f.state.densities[1]];
        println!(
            "{:6.3}   {:8.3}   {:10.3}   {:7}",
            f.state.t,
            centre(a)[0],
            centre(b)[0],
            lane_count(b, Axis::X, 0.3)
        );
    }
    Ok(())
}
