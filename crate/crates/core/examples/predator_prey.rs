//! A predator runs towards the densest part of a group of preys, which walk right and swerve
//! away from it.

use crowdlab::harness::{build_runs, RunConfig, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let mut cfg = RunConfig::preset(ScenarioName::Predator);
    cfg.solver.frame_stride = 10;
    let run = build_runs(&cfg)?.remove(0);
    let traj = crowdlab::fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    let g = *run.scenario.initial[0].grid();
    for f in &traj.frames {
        let rho = &f.state.densities[0];
        let p = f.state.agents[0].position;
        let mut nearest = f64::INFINITY;
        let mut m = 0.0;
        let mut c = [0.0, 0.0];
        for (k, v) in rho.values().iter().enumerate() {
            let (i, j) = g.ij(k);
            let x = g.center(i, j);
            m += v;
            c[0] += v * x[0];
            c[1] += v * x[1];
            if *v > 0.05 {
                nearest = nearest.min((x[0] - p[0]).hypot(x[1] - p[1]));
            }
        }
        println!(
            "t = {:5.2}  predator ({:5.2}, {:5.2})  prey centre ({:5.2}, {:5.2})  gap {:.3}",
            f.state.t,
            p[0],
            p[1],
            c[0] / m,
            c[1] / m,
            nearest
        );
    }
    Ok(())
}
