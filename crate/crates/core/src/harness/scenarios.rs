//! Scenario presets: geometry, initial data and model for each named run.
//!
//! Corridor, room and crowd layouts are reconstructions chosen to show the qualitative
//! behaviour (lanes, evacuation through a door, crossing flows, agents steering a crowd); they
//! are not copies of any published setup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{LawName, NonlocalName, RunConfig, ScenarioName};
use crate::error::{Error, Result};
use crate::fv_solver::{DensityField, NonlocalUpdate, Scenario, SolverConfig};
use crate::geometry::{preferred_direction_field, DirectionOptions, DomainMask, Grid, Point, VectorField};
use crate::kernels::{make_mollifier, Kernel};
use crate::models::{AgentKind, AgentState, ModelKind, ModelSpec, Population, SpeedLaw, Steering};

/// Everything needed for one solver run.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    /// Scenario name, with a variant suffix for multi-run scenarios (`braess/columns`).
    pub label: String,
    pub scenario: Scenario,
    pub model: ModelSpec,
    pub solver: SolverConfig,
    /// The walkable region is expected to stay invariant.
    pub property_p: bool,
}

pub fn speed_law(cfg: &RunConfig) -> SpeedLaw {
    let m = &cfg.model;
    match m.law {
        LawName::Constant => SpeedLaw::Constant { speed: m.v_max },
        LawName::Lwr => SpeedLaw::LwrOrderly { v_max: m.v_max },
        LawName::AffinePanic => SpeedLaw::AffinePanic {
            v_max: m.v_max,
            blend: m.blend,
        },
    }
}

pub fn solver_config(cfg: &RunConfig) -> SolverConfig {
    let s = &cfg.solver;
    SolverConfig {
        cfl: s.cfl,
        nonlocal_update: match s.nonlocal {
            NonlocalName::Explicit => NonlocalUpdate::Explicit,
            NonlocalName::Picard => NonlocalUpdate::Picard {
                tol: s.picard_tol,
                max_iter: s.picard_max_iter,
            },
        },
        flux: s.flux,
        t_end: s.t_end,
        frame_stride: s.frame_stride,
        dt_max: s.dt_max,
        dt_fixed: None,
        snapshot_times: s.snapshot_times.clone(),
        wall_clip: true,
        edge_tolerance: s.edge_check.then_some(s.edge_tolerance),
        store_frames: true,
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::new(cfg.grid.nx, cfg.grid.ny, cfg.grid.dx, cfg.grid.dy, [0.0, 0.0])
}

fn kernel(cfg: &RunConfig) -> Result<Kernel> {
    make_mollifier(cfg.model.radius, cfg.model.kernel)
}

/// Cell-wise uniform noise in `[-1, 1)`, one stream per population.
fn noise(seed: u64, stream: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `level (1 + amp·noise)` on the cells selected by `inside`, zero elsewhere.
fn noisy_block(g: Grid, level: f64, amp: f64, noise: &[f64], inside: impl Fn(Point) -> bool) -> Result<DensityField> {
    let vals = (0..g.len())
        .map(|k| {
            let (i, j) = g.ij(k);
            if inside(g.center(i, j)) {
                level * (1.0 + amp * noise[k])
            } else {
                0.0
            }
        })
        .collect();
    DensityField::new(g, vals)
}

fn mask_from(g: Grid, walkable: impl Fn(Point) -> bool, exit: impl Fn(Point) -> bool) -> Result<DomainMask> {
    let walk: Vec<bool> = g.map_centers(&walkable);
    let exits: Vec<usize> = (0..g.len())
        .filter(|&k| {
            let (i, j) = g.ij(k);
            walk[k] && exit(g.center(i, j))
        })
        .collect();
    DomainMask::new(g, walk, vec![exits])
}

/// Wall thickness that keeps every walkable cell out of the kernel's reach of the grid edge.
fn wall_thickness(cfg: &RunConfig) -> f64 {
    let cells = (cfg.model.radius / cfg.grid.dx.min(cfg.grid.dy)).ceil() + 2.0;
    cells * cfg.grid.dx.max(cfg.grid.dy)
}

fn require_extent(g: &Grid, need: [f64; 2], what: ScenarioName) -> Result<()> {
    let e = g.extent();
    if e[0] + 1e-9 < need[0] || e[1] + 1e-9 < need[1] {
        return Err(Error::Config(format!(
            "{what} geometry needs a grid of at least {} x {} m, got {} x {}",
            need[0], need[1], e[0], e[1]
        )));
    }
    Ok(())
}

fn scaled(rho: DensityField, s: f64) -> DensityField {
    rho.scaled(s)
}

fn single(kind: ModelKind, nu: VectorField, kernel: Kernel, law: SpeedLaw, agents: Vec<AgentState>) -> ModelSpec {
    ModelSpec {
        kind,
        populations: vec![Population {
            name: "crowd".into(),
            nu,
            kernel,
            law,
        }],
        agents,
    }
}

/// Builds the run(s) of the configured scenario.
pub fn build_runs(cfg: &RunConfig) -> Result<Vec<ScenarioRun>> {
    cfg.validate()?;
    let g = grid(cfg)?;
    let eta = kernel(cfg)?;
    let law = speed_law(cfg);
    let solver = solver_config(cfg);
    let seed = cfg.run.seed;
    let scale = cfg.run.density_scale;
    let [lx, ly] = g.extent();
    let name = cfg.run.scenario;
    let opts = DirectionOptions::default();
    let run = |label: &str, scenario: Scenario, model: ModelSpec, property_p: bool| ScenarioRun {
        label: label.into(),
        scenario,
        model,
        solver: solver.clone(),
        property_p,
    };
    let runs = match name {
        ScenarioName::Corridor => {
            let t = wall_thickness(cfg);
            require_extent(&g, [2.0 * t + 4.4, 2.0 * t + 0.5], name)?;
            let inside = move |x: Point| x[0] > t && x[0] < lx - t && x[1] > t && x[1] < ly - t;
            let mask = mask_from(g, inside, |x| x[0] > lx - t - g.dx)?;
            let nu = preferred_direction_field(&mask, &opts)?;
            let n = noise(seed, 0, g.len());
            let rho = noisy_block(g, 0.6, 0.3, &n, |x| inside(x) && x[0] >= t + 0.2 && x[0] <= t + 4.2)?;
            let model = single(ModelKind::Orderly { eps: cfg.model.eps }, nu, eta, law, vec![]);
            let scen = Scenario {
                name: "corridor".into(),
                mask: Some(mask),
                initial: vec![scaled(rho, scale)],
                room: None,
            };
            vec![run("corridor", scen, model, true)]
        }
        ScenarioName::Evacuation | ScenarioName::Braess => {
            require_extent(&g, [12.0, 7.6], name)?;
            if cfg.model.radius + 2.0 * g.dx.max(g.dy) > 0.8 {
                return Err(Error::Config("evacuation walls are 0.8 m thick; the kernel radius must leave two cells".into()));
            }
            let n = noise(seed, 0, g.len());
            let variants: &[bool] = if name == ScenarioName::Braess { &[false, true] } else { &[false] };
            let mut out = Vec::new();
            for &columns in variants {
                let walk = move |x: Point| evacuation_walkable(x, columns);
                let mask = mask_from(g, walk, |x| x[0] > 11.1 && x[0] < 11.2)?;
                let nu = preferred_direction_field(&mask, &opts)?;
                let rho = noisy_block(g, 0.5, 0.2, &n, |x| x[0] > 1.6 && x[0] < 5.2 && x[1] > 1.4 && x[1] < 6.2)?;
                let room: Vec<bool> = g.map_centers(|x| x[0] < 6.8);
                let model = single(ModelKind::Orderly { eps: cfg.model.eps }, nu, eta, law, vec![]);
                let label = match (name, columns) {
                    (ScenarioName::Evacuation, _) => "evacuation",
                    (_, false) => "braess/empty",
                    (_, true) => "braess/columns",
                };
                let scen = Scenario {
                    name: label.into(),
                    mask: Some(mask),
                    initial: vec![scaled(rho, scale)],
                    room: Some(room),
                };
                out.push(run(label, scen, model, true));
            }
            out
        }
        ScenarioName::Crossing | ScenarioName::Retraction => {
            let t = wall_thickness(cfg);
            require_extent(&g, [2.0 * t + 8.0, 2.0 * t + 0.5], name)?;
            let inside = move |x: Point| x[0] > t && x[0] < lx - t && x[1] > t && x[1] < ly - t;
            let right = mask_from(g, inside, |x| x[0] > lx - t - g.dx)?;
            let left = mask_from(g, inside, |x| x[0] < t + g.dx)?;
            let nu1 = preferred_direction_field(&right, &opts)?;
            let (n1, n2) = (noise(seed, 0, g.len()), noise(seed, 1, g.len()));
            let crossing = name == ScenarioName::Crossing;
            let (nu2, rho1, rho2) = if crossing {
                (
                    preferred_direction_field(&left, &opts)?,
                    noisy_block(g, 0.4, 0.3, &n1, |x| inside(x) && x[0] > t + 0.6 && x[0] < t + 3.6)?,
                    noisy_block(g, 0.4, 0.3, &n2, |x| inside(x) && x[0] > lx - t - 3.6 && x[0] < lx - t - 0.6)?,
                )
            } else {
                let mid = 0.5 * lx;
                (
                    VectorField::zeros(g),
                    noisy_block(g, 0.35, 0.2, &n1, |x| inside(x) && (x[0] - mid).abs() < 2.0)?,
                    noisy_block(g, 0.35, 0.2, &n2, |x| inside(x) && (x[0] - mid).abs() < 2.0)?,
                )
            };
            let model = ModelSpec {
                kind: ModelKind::MultiOrderly {
                    eps_self: cfg.model.eps,
                    eps_other: cfg.model.eps_other,
                },
                populations: vec![
                    Population { name: "rightward".into(), nu: nu1, kernel: eta, law },
                    Population {
                        name: if crossing { "leftward".into() } else { "yielding".into() },
                        nu: nu2,
                        kernel: eta,
                        law,
                    },
                ],
                agents: vec![],
            };
            let scen = Scenario {
                name: name.as_str().into(),
                mask: Some(right),
                initial: vec![scaled(rho1, scale), scaled(rho2, scale)],
                room: None,
            };
            vec![run(name.as_str(), scen, model, true)]
        }
        ScenarioName::Leader => {
            require_extent(&g, [9.0, 6.0], name)?;
            let c = [3.0, 0.5 * ly];
            let n = noise(seed, 0, g.len());
            let rho = noisy_block(g, 0.6, 0.1, &n, |x| dist(x, c) < 1.2)?;
            let leader = AgentState::new(
                AgentKind::Leader {
                    steering: Steering::Constant { direction: [0.5, 0.0] },
                },
                [4.5, 0.5 * ly],
            );
            let model = single(ModelKind::LeaderFollowers, VectorField::zeros(g), eta, law, vec![leader]);
            let scen = Scenario {
                name: "leader".into(),
                mask: None,
                initial: vec![scaled(rho, scale)],
                room: None,
            };
            vec![run("leader", scen, model, false)]
        }
        ScenarioName::Dogs => {
            require_extent(&g, [8.0, 8.0], name)?;
            let c = [0.5 * lx, 0.5 * ly];
            let r0 = 1.5;
            let nu = VectorField::from_fn(g, |x| {
                let d = [x[0] - c[0], x[1] - c[1]];
                let r = d[0].hypot(d[1]);
                if r <= r0 {
                    [0.0, 0.0]
                } else {
                    let s = (r - r0).min(1.0) / r;
                    [-d[0] * s, -d[1] * s]
                }
            });
            let n = noise(seed, 0, g.len());
            let rho = noisy_block(g, 0.6, 0.1, &n, |x| dist(x, c) < 1.0)?;
            let dogs = (0..3)
                .map(|k| {
                    let a = 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                    AgentState::new(AgentKind::Dog, [c[0] + 1.6 * a.cos(), c[1] + 1.6 * a.sin()])
                })
                .collect();
            let model = single(ModelKind::SheepDogs, nu, eta, law, dogs);
            let scen = Scenario {
                name: "dogs".into(),
                mask: None,
                initial: vec![scaled(rho, scale)],
                room: None,
            };
            vec![run("dogs", scen, model, false)]
        }
        ScenarioName::Predator => {
            require_extent(&g, [14.0, 6.0], name)?;
            let c = [5.0, 0.5 * ly];
            let n = noise(seed, 0, g.len());
            let rho = noisy_block(g, 0.6, 0.1, &n, |x| dist(x, c) < 1.2)?;
            let predator = AgentState::new(AgentKind::Predator, [2.0, 0.5 * ly]).with_velocity([0.8, 0.0]);
            let model = single(
                ModelKind::PredatorPrey { base: cfg.model.prey_base_direction },
                VectorField::constant(g, [1.0, 0.0]),
                eta,
                law,
                vec![predator],
            );
            let scen = Scenario {
                name: "predator".into(),
                mask: None,
                initial: vec![scaled(rho, scale)],
                room: None,
            };
            vec![run("predator", scen, model, false)]
        }
        ScenarioName::Panic => {
            let target = [0.65 * lx, 0.55 * ly];
            let blob_c = [0.4 * lx, 0.45 * ly];
            let rb = 0.2 * lx.min(ly);
            let nu = converging_field(g, target, 0.5);
            let rho = DensityField::from_fn(g, |x| {
                let s = (dist(x, blob_c) / rb).powi(2);
                if s < 1.0 { 1.5 * (1.0 - s).powi(2) } else { 0.0 }
            });
            let model = single(ModelKind::Panic, nu, eta, law, vec![]);
            let scen = Scenario {
                name: "panic".into(),
                mask: None,
                initial: vec![scaled(rho, scale)],
                room: None,
            };
            vec![run("panic", scen, model, false)]
        }
    };
    Ok(runs)
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `ν = −(x − x₀)/√(δ² + |x − x₀|²)`.
pub fn converging_field(g: Grid, target: Point, delta: f64) -> VectorField {
    VectorField::from_fn(g, |x| {
        let d = [x[0] - target[0], x[1] - target[1]];
        let s = (delta * delta + d[0] * d[0] + d[1] * d[1]).sqrt();
        [-d[0] / s, -d[1] / s]
    })
}

/// Room `[0.8, 6.8]²`, a 0.4 m wall with a 1 m door, and a reservoir up to `x = 11.2`; optionally
/// four square columns in front of the door.
fn evacuation_walkable(x: Point, columns: bool) -> bool {
    let in_y = x[1] > 0.8 && x[1] < 6.8;
    let room = x[0] > 0.8 && x[0] < 6.8 && in_y;
    let door = x[0] >= 6.8 && x[0] <= 7.2 && x[1] > 3.3 && x[1] < 4.3;
    let reservoir = x[0] > 7.2 && x[0] < 11.2 && in_y;
    if !(room || door || reservoir) {
        return false;
    }
    if columns {
        const CENTRES: [Point; 4] = [[6.2, 3.0], [6.2, 4.6], [5.5, 3.4], [5.5, 4.2]];
        if CENTRES.iter().any(|c| (x[0] - c[0]).abs() < 0.15 && (x[1] - c[1]).abs() < 0.15) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_builds() {
        for name in ScenarioName::ALL {
            let runs = build_runs(&RunConfig::preset(name)).unwrap();
            let expected = if name == ScenarioName::Braess { 2 } else { 1 };
            assert_eq!(runs.len(), expected, "{name}");
            for r in runs {
                r.model.validate().unwrap();
                assert_eq!(r.scenario.initial.len(), r.model.populations.len());
                for rho in &r.scenario.initial {
                    assert!(rho.mass() > 0.0);
                    if let Some(m) = &r.scenario.mask {
                        assert!(crate::geometry::is_support_contained(rho, m, 0.0).unwrap());
                    }
                    if name.is_orderly() {
                        assert!(rho.sup() <= 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn seeds_change_initial_data() {
        let mut c = RunConfig::preset(ScenarioName::Corridor);
        let a = build_runs(&c).unwrap();
        let b = build_runs(&c).unwrap();
        assert_eq!(a[0].scenario.initial, b[0].scenario.initial);
        c.run.seed += 1;
        let d = build_runs(&c).unwrap();
        assert_ne!(a[0].scenario.initial, d[0].scenario.initial);
    }

    #[test]
    fn small_grids_are_rejected() {
        let mut c = RunConfig::preset(ScenarioName::Evacuation);
        c.grid.nx = 60;
        assert!(matches!(build_runs(&c), Err(Error::Config(_))));
    }

    #[test]
    fn columns_block_cells() {
        let c = RunConfig::preset(ScenarioName::Braess);
        let runs = build_runs(&c).unwrap();
        let count = |r: &ScenarioRun| r.scenario.mask.as_ref().unwrap().walkable().iter().filter(|w| **w).count();
        assert!(count(&runs[1]) < count(&runs[0]));
    }
}
