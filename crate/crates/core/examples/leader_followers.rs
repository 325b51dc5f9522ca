//! A leader walks at constant velocity; the crowd follows it while keeping its distance.

use crowdlab::harness::{build_runs, RunConfig, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let mut cfg = RunConfig::preset(ScenarioName::Leader);
    cfg.solver.frame_stride = 10;
    let run = build_runs(&cfg)?.remove(0);
    let traj = crowdlab::fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    println!("    t   leader            crowd centre      peak density");
    for f in &traj.frames {
        let rho = &f.state.densities[0];
        let g = rho.grid();
        let m: f64 = rho.values().iter().sum();
        let c = rho.values().iter().enumerate().fold([0.0, 0.0], |acc, (k, v)| {
            let (i, j) = g.ij(k);
            let x = g.center(i, j);
            [acc[0] + v * x[0] / m, acc[1] + v * x[1] / m]
        });
        let p = f.state.agents[0].position;
        println!(
            "{:6.3}   ({:6.3}, {:6.3})  ({:6.3}, {:6.3})  {:.4}",
            f.state.t,
            p[0],
            p[1],
            c[0],
            c[1],
            rho.sup()
        );
    }
    Ok(())
}
