//! Rearranges the initial crowd to reduce time spent above a critical density. Each iteration
//! computes directional derivatives of the cost along a few smooth mass-redistributing
//! directions from the linearized solution, takes a projected descent step (density kept
//! nonnegative, total mass fixed) and prints one JSON line.

use crowdlab::harness::{build_runs, RunConfig, ScenarioName};
use crowdlab::sensitivity::{cost_derivative, cost_j, CostSpec, Linearization, PerturbationField, SensitivitySetup};
use crowdlab::DensityField;

fn project(values: Vec<f64>, mass: f64, rho: &DensityField) -> crowdlab::Result<DensityField> {
    let g = *rho.grid();
    let clipped: Vec<f64> = values.into_iter().map(|v| v.max(0.0)).collect();
    let m: f64 = clipped.iter().sum::<f64>() * g.cell_area();
    DensityField::new(g, clipped.into_iter().map(|v| v * mass / m).collect())
}

fn main() -> crowdlab::Result<()> {
    let run = build_runs(&RunConfig::preset(ScenarioName::Panic))?.remove(0);
    let t_end = 0.5;
    let setup = SensitivitySetup::new(run.model, None, t_end, 0.45)?;
    let spec = CostSpec::new(0.8, t_end)?;
    let mut rho = run.scenario.initial[0].clone();
    let g = *rho.grid();
    let mass = rho.mass();
    let [lx, ly] = g.extent();
    let modes: Vec<Box<dyn Fn([f64; 2]) -> f64>> = vec![
        Box::new(move |x| (std::f64::consts::PI * x[0] / lx).cos()),
        Box::new(move |x| (std::f64::consts::PI * x[1] / ly).cos()),
        Box::new(move |x| (2.0 * std::f64::consts::PI * x[0] / lx).cos()),
        Box::new(move |x| (2.0 * std::f64::consts::PI * x[1] / ly).cos()),
        Box::new(move |x| (std::f64::consts::PI * x[0] / lx).cos() * (std::f64::consts::PI * x[1] / ly).cos()),
    ];
    let mut step = 0.5;
    let mut traj = setup.run(&rho)?;
    let mut j = cost_j(&traj, &spec)?;
    for iter in 0..12 {
        // directions ρ (φ − mean φ) keep the mass
        let dirs: Vec<PerturbationField> = modes
            .iter()
            .map(|phi| {
                let vals: Vec<f64> = g.map_centers(|x| phi(x));
                let mean = rho.values().iter().zip(&vals).map(|(r, p)| r * p).sum::<f64>() / rho.values().iter().sum::<f64>();
                PerturbationField::new(g, rho.values().iter().zip(&vals).map(|(r, p)| r * (p - mean)).collect())
            })
            .collect::<crowdlab::Result<_>>()?;
        let grads: Vec<f64> = dirs
            .iter()
            .map(|d| cost_derivative(&traj, &setup.linearize(&traj, d, Linearization::Tangent)?, &spec))
            .collect::<crowdlab::Result<_>>()?;
        let norm = grads.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!(
            "{}",
            serde_json::json!({ "iter": iter, "cost": j, "grad_norm": norm, "step": step, "mass": rho.mass(), "peak": rho.sup() })
        );
        if norm == 0.0 {
            break;
        }
        loop {
            let mut vals = rho.values().to_vec();
            for (d, gk) in dirs.iter().zip(&grads) {
                for (v, r) in vals.iter_mut().zip(d.values()) {
                    *v -= step * gk / norm * r;
                }
            }
            let cand = project(vals, mass, &rho)?;
            let t = setup.run(&cand)?;
            let jc = cost_j(&t, &spec)?;
            if jc < j {
                rho = cand;
                traj = t;
                j = jc;
                break;
            }
            step *= 0.5;
            if step < 1e-4 {
                return Ok(());
            }
        }
    }
    Ok(())
}
