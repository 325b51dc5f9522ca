//! Three dogs circle a flock that tends to disperse outside a safe disc; the dogs move away from
//! high density and the sheep flee the dogs. Prints dog positions and the flock's spread.

use crowdlab::harness::{build_runs, RunConfig, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let mut cfg = RunConfig::preset(ScenarioName::Dogs);
    cfg.solver.frame_stride = 10;
    let run = build_runs(&cfg)?.remove(0);
    let traj = crowdlab::fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    let g = *run.scenario.initial[0].grid();
    let [lx, ly] = g.extent();
    let centre = [0.5 * lx, 0.5 * ly];
    for f in &traj.frames {
        let rho = &f.state.densities[0];
        let m: f64 = rho.values().iter().sum();
        let spread = rho
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (i, j) = g.ij(k);
                let x = g.center(i, j);
                v * ((x[0] - centre[0]).powi(2) + (x[1] - centre[1]).powi(2))
            })
            .sum::<f64>()
            / m;
        let dogs: Vec<String> = f
            .state
            .agents
            .iter()
            .map(|a| format!("({:.2}, {:.2})", a.position[0], a.position[1]))
            .collect();
        println!("t = {:5.2}  rms radius {:.3}  dogs {}", f.state.t, spread.sqrt(), dogs.join(" "));
    }
    Ok(())
}
