//! Scenario runner: configuration files, presets, artifacts and the verification suite.

pub mod analysis;
pub mod bounds;
pub mod config;
pub mod output;
pub mod scenarios;
pub mod verify;

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fv_solver::{self, Trajectory};
use crate::transport_metrics::BoundReport;

pub use analysis::{evacuation_time, lane_count, Axis, EvacuationTime};
pub use config::{parse_config, parse_config_str, RunConfig, ScenarioName};
pub use scenarios::{build_runs, ScenarioRun};
pub use verify::{run_suite, CriterionReport, Suite};

/// Remaining in-room fraction used for reported evacuation times: the room counts as cleared
/// once 99% of its initial mass has left.
pub const EVAC_LEVEL: f64 = 0.01;

/// Margin on the sup-norm growth check written to manifests.
pub const LINF_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Write PGM frames even when the configuration does not ask for them.
    pub frames: bool,
    /// Stop at this time instead of the configured end time.
    pub until: Option<f64>,
}

/// One finished sub-run and where its artifacts went.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: String,
    pub dir: PathBuf,
    pub trajectory: Trajectory,
    pub bounds: Vec<BoundReport>,
    /// Per population; `None` when the scenario has no room.
    pub evacuation: Vec<Option<EvacuationTime>>,
}

/// Directory of a sub-run below the output root (`braess/columns` → `braess/columns`).
pub fn run_dir(root: &Path, label: &str) -> PathBuf {
    label.split('/').fold(root.to_path_buf(), |p, s| p.join(s))
}

/// Runs every sub-run of `cfg` and writes metrics, manifest, final states and optional frames
/// below `out_root`. On a solver abort a diagnostic frame of the last finite state is written
/// before the error is returned.
pub fn run_scenario(cfg: &RunConfig, out_root: &Path, opts: &RunOptions) -> Result<Vec<RunOutcome>> {
    let mut cfg = cfg.clone();
    if let Some(t) = opts.until {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Config(format!("--until must be finite and >= 0, got {t}")));
        }
        cfg.solver.t_end = t;
        cfg.solver.snapshot_times.retain(|s| *s <= t);
    }
    let frames = opts.frames || cfg.output.frames;
    let mut outcomes = Vec::new();
    for run in build_runs(&cfg)? {
        let dir = run_dir(out_root, &run.label);
        let traj = match fv_solver::run(&run.scenario, &run.model, &run.solver) {
            Ok(t) => t,
            Err(e) => {
                if let Error::NonFinite { population, last_good, .. } = &e {
                    output::write(
                        &dir.join(format!("diagnostic_{population}.pgm")),
                        output::pgm_bytes(last_good, cfg.output.rho_display),
                    )?;
                    output::write(&dir.join(format!("diagnostic_{population}.txt")), output::state_text(last_good))?;
                }
                return Err(e);
            }
        };
        output::write(&dir.join(&cfg.output.metrics_file), output::metrics_csv(&traj.metrics))?;
        let last = traj.last();
        for (p, rho) in last.densities.iter().enumerate() {
            output::write(&dir.join(format!("final_{p}.txt")), output::state_text(rho))?;
        }
        if frames {
            for f in &traj.frames {
                for (p, rho) in f.state.densities.iter().enumerate() {
                    output::write(
                        &dir.join("frames").join(output::frame_name(p, f.step)),
                        output::pgm_bytes(rho, cfg.output.rho_display),
                    )?;
                }
            }
        }
        let mut bounds = Vec::new();
        if run.model.is_panic_type() {
            bounds.push(bounds::linf_growth_report(&traj, &run.model, LINF_MARGIN));
        }
        let mut constants = Vec::new();
        for (i, p) in run.model.populations.iter().enumerate() {
            constants.push((format!("kernel_norm_{i}"), p.kernel.norm_constant()));
            constants.push((format!("kernel_radius_{i}"), p.kernel.radius()));
        }
        let evacuation: Vec<Option<EvacuationTime>> = (0..run.model.populations.len())
            .map(|p| {
                run.scenario
                    .room
                    .as_ref()
                    .map(|_| evacuation_time(&analysis::remaining_series(&traj.metrics, p), EVAC_LEVEL))
            })
            .collect();
        for (p, e) in evacuation.iter().enumerate() {
            if let Some(e) = e.filter(|e| e.reached) {
                constants.push((format!("evacuation_time_{p}"), e.time));
            }
        }
        output::write(
            &dir.join("run.toml"),
            output::manifest_toml(&cfg, &run.label, &constants, &bounds),
        )?;
        outcomes.push(RunOutcome {
            label: run.label,
            dir,
            trajectory: traj,
            bounds,
            evacuation,
        });
    }
    Ok(outcomes)
}

/// Distance between two finished runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMetric {
    L1,
    W1,
    Evac,
}

/// Compares the final states (`l1`, `w1`) or the evacuation times (`evac`, `A − B`) of two run
/// directories, summed over populations. `w1` normalises both states to probability measures
/// and aggregates them onto blocks of at most `MAX_ATOMS` cells.
pub fn compare_runs(a: &Path, b: &Path, metric: CompareMetric, metrics_file: &str) -> Result<f64> {
    match metric {
        CompareMetric::L1 | CompareMetric::W1 => {
            let sa = final_states(a)?;
            let sb = final_states(b)?;
            if sa.len() != sb.len() {
                return Err(Error::Config(format!(
                    "runs have {} and {} populations",
                    sa.len(),
                    sb.len()
                )));
            }
            let mut total = 0.0;
            for (x, y) in sa.iter().zip(&sb) {
                total += match metric {
                    CompareMetric::L1 => x.l1_distance(y)?,
                    _ => w1_states(x, y)?,
                };
            }
            Ok(total)
        }
        CompareMetric::Evac => {
            let ta = evac_times(a, metrics_file)?;
            let tb = evac_times(b, metrics_file)?;
            Ok(ta.iter().zip(&tb).map(|(x, y)| x - y).sum())
        }
    }
}

fn final_states(dir: &Path) -> Result<Vec<fv_solver::DensityField>> {
    let mut out = Vec::new();
    loop {
        let p = dir.join(format!("final_{}.txt", out.len()));
        if !p.exists() {
            break;
        }
        out.push(output::parse_state(&output::read(&p)?)?);
    }
    if out.is_empty() {
        return Err(Error::Config(format!("no final states in {}", dir.display())));
    }
    Ok(out)
}

fn w1_states(a: &fv_solver::DensityField, b: &fv_solver::DensityField) -> Result<f64> {
    use crate::transport_metrics::{aggregate_density, w1_discrete, MAX_ATOMS};
    a.grid().check_same(b.grid())?;
    let g = *a.grid();
    let block = ((g.len() as f64 / MAX_ATOMS as f64).sqrt().ceil() as usize).max(1);
    let coarse = crate::geometry::Grid::new(
        g.nx.div_ceil(block),
        g.ny.div_ceil(block),
        g.dx * block as f64,
        g.dy * block as f64,
        g.origin,
    )?;
    let (ma, mb) = (a.mass(), b.mass());
    if ma <= 0.0 || mb <= 0.0 {
        return Err(Error::EmptyMeasure);
    }
    let mu = aggregate_density(a, &coarse)?.normalized();
    let nu = aggregate_density(b, &coarse)?.normalized();
    w1_discrete(&mu, &nu)
}

fn evac_times(dir: &Path, metrics_file: &str) -> Result<Vec<f64>> {
    let rows = output::parse_metrics_csv(&output::read(&dir.join(metrics_file))?)?;
    let pops = rows.iter().map(|r| r.pop + 1).max().unwrap_or(0);
    Ok((0..pops)
        .map(|p| evacuation_time(&analysis::remaining_series(&rows, p), EVAC_LEVEL).time)
        .collect())
}
