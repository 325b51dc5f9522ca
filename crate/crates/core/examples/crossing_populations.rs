//! Two populations walking towards each other in a corridor. Prints the transverse profiles of
//! both populations where they overlap, and the positions of their lane maxima.

use crowdlab::harness::analysis::{profile_maxima, transverse_profile, Axis};
use crowdlab::harness::{build_runs, RunConfig, ScenarioName};

fn main() -> crowdlab::Result<()> {
    let cfg = RunConfig::preset(ScenarioName::Crossing);
    let run = build_runs(&cfg)?.remove(0);
    let traj = crowdlab::fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    for f in &traj.frames {
        let (a, b) = (&f.state.densities[0], &f.state.densities[1]);
        let g = a.grid();
        let cols: Vec<usize> = (0..g.nx)
            .filter(|&i| {
                let s = |d: &crowdlab::DensityField| (0..g.ny).map(|j| d.values()[g.idx(i, j)]).sum::<f64>();
                s(a) > 1e-3 && s(b) > 1e-3
            })
            .collect();
        let range = cols.first().zip(cols.last()).map(|(lo, hi)| (*lo, hi + 1));
        let pa = transverse_profile(a, Axis::X, range);
        let pb = transverse_profile(b, Axis::X, range);
        println!(
            "t = {:6.3}  overlap columns {:3}  maxima {:?} / {:?}",
            f.state.t,
            cols.len(),
            profile_maxima(&pa, 0.3),
            profile_maxima(&pb, 0.3)
        );
        if std::env::var_os("CROWDLAB_VERBOSE").is_some() && cols.len() > 10 {
            for (j, (x, y)) in pa.iter().zip(&pb).enumerate() {
                println!("    {j:3} {x:.4} {y:.4}");
            }
        }
    }
    Ok(())
}
