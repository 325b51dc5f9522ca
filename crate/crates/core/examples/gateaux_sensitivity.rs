//! Linearized sensitivity of the panic crowd. Compares difference quotients of the solution map
//! with the linearized solution for shrinking steps, then compares the derivative of a
//! congestion cost with finite differences. Both tables are written as CSV.

use std::fmt::Write as _;
use std::path::PathBuf;

use crowdlab::harness::verify::random_direction;
use crowdlab::harness::{build_runs, RunConfig, ScenarioName};
use crowdlab::sensitivity::{gateaux_check, optimality_residual, CostSpec, SensitivitySetup};

fn main() -> crowdlab::Result<()> {
    let root = std::env::var_os("CROWDLAB_OUT").map_or_else(|| PathBuf::from("runs"), PathBuf::from);
    let run = build_runs(&RunConfig::preset(ScenarioName::Panic))?.remove(0);
    let rho0 = run.scenario.initial[0].clone();
    let t_end = 0.25;
    let setup = SensitivitySetup::new(run.model, None, t_end, 0.45)?;

    let r0 = random_direction(&rho0, 10);
    let report = gateaux_check(&setup, &rho0, &r0, &[0.1, 0.05, 0.025, 0.0125])?;
    let mut csv = String::from("h,l1_error\n");
    for (h, e) in &report.rows {
        println!("h = {h:<7} error {e:.4e}");
        let _ = writeln!(csv, "{h},{e}");
    }
    println!("fitted rate {:?}, roundoff floor {:.2e}", report.rate, report.floor);

    let spec = CostSpec::new(0.8, t_end)?;
    let dirs: Vec<_> = (0..3).map(|s| random_direction(&rho0, 110 + s)).collect();
    csv.push_str("direction,dj,fd,rel_err\n");
    for (k, row) in optimality_residual(&setup, &rho0, &dirs, &spec, 0.02)?.iter().enumerate() {
        println!("direction {k}: dJ {:.6e}  finite difference {:.6e}  rel {:.2e}", row.dj, row.fd, row.rel_err);
        let _ = writeln!(csv, "{k},{},{},{}", row.dj, row.fd, row.rel_err);
    }
    let path = root.join("sensitivity.csv");
    std::fs::create_dir_all(&root).map_err(|e| crowdlab::Error::Config(e.to_string()))?;
    std::fs::write(&path, csv).map_err(|e| crowdlab::Error::Config(e.to_string()))?;
    println!("tables in {}", path.display());
    Ok(())
}
