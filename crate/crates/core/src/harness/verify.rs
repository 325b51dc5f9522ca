//! Acceptance suite: one check per criterion, each producing a pass/fail line.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::analysis::{self, evacuation_time, lane_count, profile_maxima, transverse_profile, Axis};
use super::bounds::linf_growth_report;
use super::config::{RunConfig, ScenarioName};
use super::scenarios::{build_runs, ScenarioRun};
use super::EVAC_LEVEL;
use crate::error::{Error, Result};
use crate::fv_solver::{self, DensityField, Scenario, Solver, SolverConfig, State, Trajectory};
use crate::geometry::{Grid, Point, VectorField};
use crate::kernels::{convolve, make_mollifier, Kernel, KernelProfile};
use crate::lagrangian::{
    default_dt, run_lagrangian, sample_particles, transport_driven, DrivenVelocity, LagrangianConfig, MeasurePath,
    MeasureSpec, ParticleEnsemble,
};
use crate::models::{panic_velocity, ModelKind, ModelSpec, Population, SpeedLaw};
use crate::sensitivity::{gateaux_check, loglog_slope, optimality_residual, CostSpec, PerturbationField, SensitivitySetup};
use crate::transport_metrics::{
    aggregate_density, aggregate_points, kr_duality_check, stability_bound_rhs, total_variation, tv_bound_rhs,
    w1_1d, w1_discrete, BoundReport, DiscreteMeasure,
};

/// Result of one acceptance criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// Reported only; never fails the suite.
    pub qualitative: bool,
    pub detail: String,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let tag = if self.qualitative { " QUALITATIVE" } else { "" };
        write!(f, "criterion {:>2} {status}{tag} {}: {}", self.id, self.name, self.detail)
    }
}

impl CriterionReport {
    fn new(id: u8, name: &'static str, passed: bool, detail: String) -> Self {
        CriterionReport {
            id,
            name,
            passed,
            qualitative: false,
            detail,
        }
    }

    fn failed(id: u8, name: &'static str, err: &Error) -> Self {
        CriterionReport::new(id, name, false, format!("error: {err}"))
    }
}

/// Named groups of criteria accepted by `verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    All,
    /// Scenario runs: conservation, maximum principle, sup-norm growth.
    Scenarios,
    /// Total variation, stability and L1 contraction of frozen-flux runs.
    Bounds,
    /// Wasserstein distance, particle stability, particle/grid consistency.
    Wasserstein,
    /// Differentiability of the solution map and the cost derivative.
    Sensitivity,
    /// Lanes, obstacle evacuation, crossing lanes.
    Qualitative,
    Single(u8),
}

impl Suite {
    pub fn criteria(&self) -> Vec<u8> {
        match self {
            Suite::All => (1..=12).collect(),
            Suite::Scenarios => vec![1, 2, 3],
            Suite::Bounds => vec![4, 5, 6],
            Suite::Wasserstein => vec![7, 8, 9],
            Suite::Sensitivity => vec![10, 11],
            Suite::Qualitative => vec![12],
            Suite::Single(k) => vec![*k],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "scenarios" => Suite::Scenarios,
            "bounds" => Suite::Bounds,
            "wasserstein" => Suite::Wasserstein,
            "sensitivity" => Suite::Sensitivity,
            "qualitative" => Suite::Qualitative,
            _ => match s.parse::<u8>() {
                Ok(k) if (1..=12).contains(&k) => Suite::Single(k),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown suite {s:?}; expected all, scenarios, bounds, wasserstein, sensitivity, \
                         qualitative or a criterion number 1-12"
                    )))
                }
            },
        })
    }
}

pub fn run_suite(suite: Suite) -> Vec<CriterionReport> {
    suite.criteria().into_iter().map(criterion).collect()
}

pub fn criterion(id: u8) -> CriterionReport {
    match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(),
        11 => criterion_11(),
        12 => criterion_12(),
        _ => CriterionReport::new(id, "unknown", false, "no such criterion".into()),
    }
}

// ---------------------------------------------------------------------------------------------
// scenario runs

/// Scenario run at preset resolution, kept for the lifetime of the process.
pub struct CachedRun {
    pub scenario: ScenarioName,
    pub run: ScenarioRun,
    pub result: std::result::Result<Trajectory, String>,
    pub elapsed: Duration,
}

/// Longest acceptable wall-clock time of one preset run.
pub const RUN_BUDGET: Duration = Duration::from_secs(30);

pub fn preset_runs() -> &'static [CachedRun] {
    static RUNS: OnceLock<Vec<CachedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let mut out = Vec::new();
        for name in ScenarioName::ALL {
            let runs = match build_runs(&RunConfig::preset(name)) {
                Ok(r) => r,
                Err(e) => panic!("preset {name} does not build: {e}"),
            };
            for run in runs {
                let start = Instant::now();
                let result = fv_solver::run(&run.scenario, &run.model, &run.solver).map_err(|e| e.to_string());
                out.push(CachedRun {
                    scenario: name,
                    run,
                    result,
                    elapsed: start.elapsed(),
                });
            }
        }
        out
    })
}

fn cached(label: &str) -> Option<&'static CachedRun> {
    preset_runs().iter().find(|c| c.run.label == label)
}

fn criterion_1() -> CriterionReport {
    const NAME: &str = "mass conservation and runtime";
    let mut worst = 0.0f64;
    let mut slowest = (String::new(), Duration::ZERO);
    let mut problems = Vec::new();
    for c in preset_runs() {
        if c.elapsed > slowest.1 {
            slowest = (c.run.label.clone(), c.elapsed);
        }
        if c.elapsed > RUN_BUDGET {
            problems.push(format!("{} took {:.1?}", c.run.label, c.elapsed));
        }
        match &c.result {
            Err(e) => problems.push(format!("{} aborted: {e}", c.run.label)),
            Ok(t) => {
                for r in &t.metrics {
                    let m0 = t.initial_mass[r.pop];
                    let rel = (r.mass - m0).abs() / m0.max(f64::MIN_POSITIVE);
                    worst = worst.max(rel);
                    if rel > 1e-10 {
                        problems.push(format!("{} pop {} drift {rel:e} at t = {}", c.run.label, r.pop, r.t));
                        break;
                    }
                }
            }
        }
    }
    CriterionReport::new(
        1,
        NAME,
        problems.is_empty(),
        format!(
            "{} runs, worst relative drift {worst:.2e}, slowest {} {:.1?}{}",
            preset_runs().len(),
            slowest.0,
            slowest.1,
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn criterion_2() -> CriterionReport {
    const NAME: &str = "maximum principle of orderly runs";
    let mut problems = Vec::new();
    let mut lines = Vec::new();
    for c in preset_runs().iter().filter(|c| c.scenario.is_orderly()) {
        let Ok(t) = &c.result else {
            problems.push(format!("{} has no trajectory", c.run.label));
            continue;
        };
        let lo = t.extremes.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
        let hi = t.extremes.iter().map(|e| e.1).fold(0.0, f64::max);
        let multi = t.initial_mass.len() > 1;
        let ok = if multi {
            lo >= -1e-12 && t.max_total_density <= 2.0 + 1e-10
        } else {
            lo >= -1e-12 && hi <= 1.0 + 1e-10
        };
        lines.push(format!(
            "{} min {lo:.3e} max {hi:.6} total {:.6}",
            c.run.label, t.max_total_density
        ));
        if !ok {
            problems.push(c.run.label.clone());
        }
    }
    let detail = if problems.is_empty() {
        lines.join("; ")
    } else {
        format!("violations in {}; {}", problems.join(", "), lines.join("; "))
    };
    CriterionReport::new(2, NAME, problems.is_empty(), detail)
}

fn criterion_3() -> CriterionReport {
    const NAME: &str = "sup-norm growth of panic runs";
    let Some(c) = cached("panic") else {
        return CriterionReport::new(3, NAME, false, "panic preset missing".into());
    };
    match &c.result {
        Err(e) => CriterionReport::new(3, NAME, false, format!("run aborted: {e}")),
        Ok(t) => {
            let r = linf_growth_report(t, &c.run.model, 0.1);
            CriterionReport::new(3, NAME, r.satisfied, bound_detail(&r))
        }
    }
}

fn bound_detail(r: &BoundReport) -> String {
    format!("lhs {:.6e} <= rhs {:.6e} x {:.2}", r.lhs, r.rhs, 1.0 + r.margin)
}

// ---------------------------------------------------------------------------------------------
// frozen-flux runs

/// Panic preset at its own resolution: initial density, direction field, kernel and speed law.
fn panic_setup() -> Result<(DensityField, Population)> {
    let run = build_runs(&RunConfig::preset(ScenarioName::Panic))?.remove(0);
    Ok((run.scenario.initial[0].clone(), run.model.populations[0].clone()))
}

/// `V = v(ρ₀*η) ν`.
fn frozen_field(rho0: &DensityField, pop: &Population, kernel: &Kernel) -> Result<VectorField> {
    panic_velocity(&convolve(rho0, kernel)?, &pop.nu, &pop.law)
}

/// `u_t + div(u V) = 0` expressed as a panic model with unit speed.
fn transport_model(field: VectorField, kernel: Kernel) -> ModelSpec {
    ModelSpec {
        kind: ModelKind::Panic,
        populations: vec![Population {
            name: "frozen".into(),
            nu: field,
            kernel,
            law: SpeedLaw::Constant { speed: 1.0 },
        }],
        agents: vec![],
    }
}

/// Fixed step shared by every run over the given fields, every step recorded.
fn fixed_step_config(fields: &[&VectorField], t_end: f64) -> SolverConfig {
    let g = *fields[0].grid();
    let speed = fields
        .iter()
        .map(|f| {
            let c = f.component_sup();
            (c[0] / g.dx).max(c[1] / g.dy)
        })
        .fold(0.0, f64::max);
    let steps = (t_end * speed / 0.45).ceil().max(1.0);
    SolverConfig {
        t_end,
        dt_fixed: Some(t_end / steps),
        dt_max: f64::INFINITY,
        frame_stride: 1,
        ..SolverConfig::default()
    }
}

fn run_frozen(model: &ModelSpec, rho0: &DensityField, cfg: &SolverConfig) -> Result<Trajectory> {
    Solver::new(model.clone(), None, cfg.clone())?.run(State {
        t: 0.0,
        densities: vec![rho0.clone()],
        agents: vec![],
    })
}

/// Central differences in the interior, one-sided at the edges.
fn ddx(c: &[f64], g: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(g.nx - 1));
            out[g.idx(i, j)] = (c[g.idx(b, j)] - c[g.idx(a, j)]) / ((b - a) as f64 * g.dx);
        }
    }
    out
}

fn ddy(c: &[f64], g: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny {
        let (a, b) = (j.saturating_sub(1), (j + 1).min(g.ny - 1));
        for i in 0..g.nx {
            out[g.idx(i, j)] = (c[g.idx(i, b)] - c[g.idx(i, a)]) / ((b - a) as f64 * g.dy);
        }
    }
    out
}

fn divergence(f: &VectorField) -> Vec<f64> {
    let g = f.grid();
    ddx(&f.u, g).iter().zip(ddy(&f.v, g)).map(|(a, b)| a + b).collect()
}

/// `∫ |∇s|` with central differences.
fn gradient_mass(s: &[f64], g: &Grid) -> f64 {
    ddx(s, g)
        .iter()
        .zip(ddy(s, g))
        .map(|(a, b)| a.hypot(b))
        .sum::<f64>()
        * g.cell_area()
}

/// Largest spectral norm of the Jacobian of `f` over the cells.
fn jacobian_norm(f: &VectorField) -> f64 {
    let g = f.grid();
    let (ux, uy, vx, vy) = (ddx(&f.u, g), ddy(&f.u, g), ddx(&f.v, g), ddy(&f.v, g));
    (0..g.len())
        .map(|k| {
            let p = ux[k].powi(2) + uy[k].powi(2) + vx[k].powi(2) + vy[k].powi(2);
            let q = (ux[k] * vy[k] - uy[k] * vx[k]).powi(2);
            (0.5 * (p + (p * p - 4.0 * q).max(0.0).sqrt())).sqrt()
        })
        .fold(0.0, f64::max)
}

fn criterion_4() -> CriterionReport {
    const NAME: &str = "total variation bound";
    match check_tv() {
        Ok((passed, detail)) => CriterionReport::new(4, NAME, passed, detail),
        Err(e) => CriterionReport::failed(4, NAME, &e),
    }
}

fn check_tv() -> Result<(bool, String)> {
    let (rho0, pop) = panic_setup()?;
    let g = *rho0.grid();
    let field = frozen_field(&rho0, &pop, &pop.kernel)?;
    let t_end = 0.5;
    let cfg = fixed_step_config(&[&field], t_end);
    let traj = run_frozen(&transport_model(field.clone(), pop.kernel), &rho0, &cfg)?;

    // general bound, checked at every step
    let kappa0 = 5.0 * jacobian_norm(&field);
    let grad_div = gradient_mass(&divergence(&field), &g);
    let series: Vec<(f64, f64)> = traj.metrics.iter().map(|r| (r.t, r.linf * grad_div)).collect();
    let tv0 = traj.metrics[0].tv;
    let mut worst: Option<BoundReport> = None;
    for (n, r) in traj.metrics.iter().enumerate().skip(1) {
        let rhs = tv_bound_rhs(tv0, kappa0, r.t, &series[..=n], 2)?;
        let rep = BoundReport::new(
            "tv",
            r.tv,
            rhs,
            0.1,
            vec![("kappa0".into(), kappa0), ("grad_div".into(), grad_div)],
        );
        if worst.as_ref().is_none_or(|w| rep.lhs / rep.rhs > w.lhs / w.rhs) {
            worst = Some(rep);
        }
    }
    let general = worst.ok_or_else(|| Error::InvalidTrajectory("no steps".into()))?;

    // constant field: no growth at all
    let constant = VectorField::constant(g, [0.6, 0.3]);
    let cfg_c = fixed_step_config(&[&constant], t_end);
    let tc = run_frozen(&transport_model(constant, pop.kernel), &rho0, &cfg_c)?;
    let tv_c0 = tc.metrics[0].tv;
    let constant_ok = tc.metrics.iter().all(|r| r.tv <= tv_c0 * (1.0 + 1e-12) + 1e-12);

    // x-independent local flux: orderly model without deviation and constant direction
    let orderly = ModelSpec {
        kind: ModelKind::Orderly { eps: 0.0 },
        populations: vec![Population {
            name: "orderly".into(),
            nu: VectorField::constant(g, [0.8, 0.6]),
            kernel: pop.kernel,
            law: SpeedLaw::LwrOrderly { v_max: 1.0 },
        }],
        agents: vec![],
    };
    let unit = rho0.scaled(0.9 / rho0.sup());
    let cfg_o = SolverConfig {
        t_end,
        frame_stride: 1,
        ..SolverConfig::default()
    };
    let to = Solver::new(orderly, None, cfg_o)?.run(State {
        t: 0.0,
        densities: vec![unit],
        agents: vec![],
    })?;
    let tv_o0 = to.metrics[0].tv;
    let orderly_ok = to.metrics.iter().all(|r| r.tv <= tv_o0 * (1.0 + 1e-12) + 1e-12);

    // pure source: u = u₀ + t S
    let source = DensityField::from_fn(g, |x| (1.3 * x[0]).sin() * (0.7 * x[1]).cos());
    let fwd = |s: &[f64]| -> f64 {
        let mut acc = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let dx = if i + 1 < g.nx { (s[k + 1] - s[k]) / g.dx } else { 0.0 };
                let dy = if j + 1 < g.ny { (s[k + g.nx] - s[k]) / g.dy } else { 0.0 };
                acc += dx.hypot(dy);
            }
        }
        acc * g.cell_area()
    };
    let grad_s = fwd(source.values());
    let tv_u0 = total_variation(rho0.values(), &g);
    let mut source_ok = true;
    for t in [0.1, 0.5, 1.0, 3.0] {
        let u: Vec<f64> = rho0.values().iter().zip(source.values()).map(|(a, b)| a + t * b).collect();
        let rhs = tv_bound_rhs(tv_u0, 0.0, t, &[(0.0, grad_s), (t, grad_s)], 2)?;
        let closed = tv_u0 + std::f64::consts::FRAC_PI_2 * t * grad_s;
        source_ok &= total_variation(&u, &g) <= rhs && (rhs - closed).abs() <= 1e-12 * closed;
    }
    let reduction_ok = tv_bound_rhs(tv_u0, 0.0, 1.0, &[], 2)? == tv_u0;

    let passed = general.satisfied && constant_ok && orderly_ok && source_ok && reduction_ok;
    Ok((
        passed,
        format!(
            "general {} (kappa0 {kappa0:.3}); constant field {constant_ok}; x-independent flux {orderly_ok}; \
             pure source {source_ok}; kappa0 = 0 reduction {reduction_ok}",
            bound_detail(&general)
        ),
    ))
}

fn criterion_5() -> CriterionReport {
    const NAME: &str = "stability under a change of kernel radius";
    match check_stability() {
        Ok(r) => CriterionReport::new(5, NAME, r.satisfied, bound_detail(&r)),
        Err(e) => CriterionReport::failed(5, NAME, &e),
    }
}

fn check_stability() -> Result<BoundReport> {
    let (rho0, pop) = panic_setup()?;
    let g = *rho0.grid();
    let k1 = pop.kernel;
    let k2 = make_mollifier(0.4, KernelProfile::Triweight)?;
    let f1 = frozen_field(&rho0, &pop, &k1)?;
    let f2 = frozen_field(&rho0, &pop, &k2)?;
    let t_end = 0.5;
    let cfg = fixed_step_config(&[&f1, &f2], t_end);
    let a = run_frozen(&transport_model(f1.clone(), k1), &rho0, &cfg)?;
    let b = run_frozen(&transport_model(f2.clone(), k2), &rho0, &cfg)?;
    let lhs = a.last().densities[0].l1_distance(&b.last().densities[0])?;

    let diff = VectorField::new(
        g,
        f1.u.iter().zip(&f2.u).map(|(x, y)| x - y).collect(),
        f1.v.iter().zip(&f2.v).map(|(x, y)| x - y).collect(),
    )?;
    let flux_dev = diff.sup_norm();
    let div_dev: f64 = divergence(&diff).iter().map(|d| d.abs()).sum::<f64>() * g.cell_area();
    let tv_sup = a.metrics.iter().map(|r| r.tv).fold(0.0, f64::max);
    let source: Vec<(f64, f64)> = a
        .metrics
        .iter()
        .zip(&b.metrics)
        .map(|(x, y)| (x.t, x.linf.max(y.linf) * div_dev))
        .collect();
    let rhs = stability_bound_rhs(0.0, 0.0, t_end, tv_sup, &[(0.0, flux_dev), (t_end, flux_dev)], &source)?;
    Ok(BoundReport::new(
        "stability",
        lhs,
        rhs,
        0.05,
        vec![
            ("kappa".into(), 0.0),
            ("tv_sup".into(), tv_sup),
            ("flux_dev".into(), flux_dev),
            ("div_dev".into(), div_dev),
        ],
    ))
}

fn criterion_6() -> CriterionReport {
    const NAME: &str = "L1 contraction for a common frozen flux";
    match check_contraction() {
        Ok((passed, detail)) => CriterionReport::new(6, NAME, passed, detail),
        Err(e) => CriterionReport::failed(6, NAME, &e),
    }
}

fn check_contraction() -> Result<(bool, String)> {
    let (rho0, pop) = panic_setup()?;
    let g = *rho0.grid();
    let field = frozen_field(&rho0, &pop, &pop.kernel)?;
    let cfg = fixed_step_config(&[&field], 0.5);
    let model = transport_model(field, pop.kernel);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let other = DensityField::from_fn(g, |x| {
        let r2 = (x[0] - 1.9).powi(2) + (x[1] - 1.6).powi(2);
        if r2 < 0.5 { 0.8 * (1.0 - r2 / 0.5) * (1.0 + 0.2 * rng.gen::<f64>()) } else { 0.0 }
    });
    let a = run_frozen(&model, &rho0, &cfg)?;
    let b = run_frozen(&model, &other, &cfg)?;
    let mut prev = rho0.l1_distance(&other)?;
    let first = prev;
    let mut worst_increase = f64::NEG_INFINITY;
    for (fa, fb) in a.frames.iter().zip(&b.frames).skip(1) {
        let d = fa.state.densities[0].l1_distance(&fb.state.densities[0])?;
        worst_increase = worst_increase.max(d - prev);
        prev = d;
    }
    Ok((
        worst_increase <= 1e-10,
        format!(
            "{} steps, L1 {first:.6} -> {prev:.6}, largest one-step increase {worst_increase:.2e}",
            a.frames.len() - 1
        ),
    ))
}

// ---------------------------------------------------------------------------------------------
// Wasserstein distance and particles

fn criterion_7() -> CriterionReport {
    const NAME: &str = "W1 against independent oracles";
    match check_w1() {
        Ok((passed, detail)) => CriterionReport::new(7, NAME, passed, detail),
        Err(e) => CriterionReport::failed(7, NAME, &e),
    }
}

fn random_atoms(rng: &mut ChaCha8Rng, n: usize, total: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x * total / s).collect()
}

/// Minimum over all assignments of uniform atoms.
pub fn permutation_w1(a: &[Point], b: &[Point]) -> f64 {
    fn rec(a: &[Point], b: &[Point], used: &mut [bool], k: usize, acc: f64, best: &mut f64) {
        if acc >= *best {
            return;
        }
        if k == a.len() {
            *best = acc;
            return;
        }
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                let d = (a[k][0] - b[j][0]).hypot(a[k][1] - b[j][1]);
                rec(a, b, used, k + 1, acc + d, best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
    best / a.len() as f64
}

fn check_w1() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut err_1d = 0.0f64;
    for _ in 0..100 {
        let (n, m) = (rng.gen_range(1..25), rng.gen_range(1..25));
        let xa: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let xb: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let wa = random_atoms(&mut rng, n, 1.0);
        let wb = random_atoms(&mut rng, m, 1.0);
        let mu = DiscreteMeasure::new(xa.iter().map(|&x| [x, 0.0]).collect(), wa.clone())?;
        let nu = DiscreteMeasure::new(xb.iter().map(|&x| [x, 0.0]).collect(), wb.clone())?;
        let exact = w1_1d(
            &xa.iter().copied().zip(wa).collect::<Vec<_>>(),
            &xb.iter().copied().zip(wb).collect::<Vec<_>>(),
        )?;
        err_1d = err_1d.max((w1_discrete(&mu, &nu)? - exact).abs());
    }
    let mut err_perm = 0.0f64;
    for _ in 0..60 {
        let n = rng.gen_range(1..=8);
        let pa: Vec<Point> = (0..n).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
        let pb: Vec<Point> = (0..n).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
        let w = vec![1.0 / n as f64; n];
        let d = w1_discrete(&DiscreteMeasure::new(pa.clone(), w.clone())?, &DiscreteMeasure::new(pb.clone(), w)?)?;
        err_perm = err_perm.max((d - permutation_w1(&pa, &pb)).abs());
    }
    let mut duality_violations = 0;
    let mut trials = 0;
    for s in 0..100u64 {
        let (n, m) = (rng.gen_range(1..12), rng.gen_range(1..12));
        let pa: Vec<Point> = (0..n).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
        let pb: Vec<Point> = (0..m).map(|_| [rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
        let mu = DiscreteMeasure::new(pa, random_atoms(&mut rng, n, 1.0))?;
        let nu = DiscreteMeasure::new(pb, random_atoms(&mut rng, m, 1.0))?;
        let w = w1_discrete(&mu, &nu)?;
        let lower = kr_duality_check(&mu, &nu, 10, s);
        trials += 10;
        if lower > w + 1e-9 {
            duality_violations += 1;
        }
    }
    Ok((
        err_1d <= 1e-10 && err_perm <= 1e-9 && duality_violations == 0,
        format!(
            "1D max error {err_1d:.1e}; permutation max error {err_perm:.1e}; {duality_violations} duality \
             violations in {trials} probes"
        ),
    ))
}

fn criterion_8() -> CriterionReport {
    const NAME: &str = "Wasserstein stability of driven particles";
    match check_driven() {
        Ok((passed, detail)) => CriterionReport::new(8, NAME, passed, detail),
        Err(e) => CriterionReport::failed(8, NAME, &e),
    }
}

/// Driven-transport setup on `[0, 10]²`: swirling direction field, affine speed, unit radius.
pub fn driven_velocity() -> Result<DrivenVelocity> {
    let g = Grid::new(50, 50, 0.2, 0.2, [0.0, 0.0])?;
    Ok(DrivenVelocity {
        nu: VectorField::from_fn(g, |x| [0.8 * (0.4 * x[1]).cos(), 0.8 * (0.4 * x[0]).sin()]),
        law: SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 },
        kernel: make_mollifier(1.0, KernelProfile::Triweight)?,
    })
}

/// Growth constants `(C, C′)` for probability measures.
pub fn driven_constants(vel: &DrivenVelocity) -> (f64, f64) {
    let c_prime = vel.lip_r() * vel.kernel.lipschitz();
    (vel.lip_x() + c_prime, c_prime)
}

/// Largest `T` with `T e^{CT} C′ ≤ ½`.
pub fn contraction_horizon(c: f64, c_prime: f64) -> f64 {
    let f = |t: f64| t * (c * t).exp() * c_prime - 0.5;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize, centre: Point, spread: f64) -> Result<ParticleEnsemble> {
    let pts: Vec<Point> = (0..n)
        .map(|_| [centre[0] + rng.gen_range(-spread..spread), centre[1] + rng.gen_range(-spread..spread)])
        .collect();
    ParticleEnsemble::new(pts, random_atoms(rng, n, 1.0))
}

fn w1_ensembles(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<f64> {
    w1_discrete(&DiscreteMeasure::from_ensemble(a)?, &DiscreteMeasure::from_ensemble(b)?)
}

fn path_sup_distance(a: &MeasurePath, b: &MeasurePath, times: &[f64]) -> Result<f64> {
    times
        .iter()
        .map(|&t| w1_ensembles(&a.at(t), &b.at(t)))
        .try_fold(0.0f64, |m, d| Ok(m.max(d?)))
}

fn check_driven() -> Result<(bool, String)> {
    let vel = driven_velocity()?;
    let (c, c_prime) = driven_constants(&vel);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t_end = 1.0;
    let dt = 0.02;
    let times: Vec<f64> = (0..=50).map(|k| k as f64 * dt).collect();
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..12 {
        let n = rng.gen_range(20..=200);
        let m = rng.gen_range(20..=200);
        let rho = random_cloud(&mut rng, n, [5.0, 5.0], 1.0)?;
        let sigma = random_cloud(&mut rng, m, [5.2, 4.9], 1.0)?;
        let r = MeasurePath::Translating {
            base: random_cloud(&mut rng, 40, [4.5, 5.0], 0.8)?,
            velocity: [0.5, 0.1],
        };
        let s = MeasurePath::Translating {
            base: random_cloud(&mut rng, 40, [4.7, 5.2], 0.8)?,
            velocity: [0.3, -0.2],
        };
        let rt = transport_driven(&rho, &r, &vel, t_end, dt)?.at(t_end);
        let st = transport_driven(&sigma, &s, &vel, t_end, dt)?.at(t_end);
        let lhs = w1_ensembles(&rt, &st)?;
        let e = (c * t_end).exp();
        let rhs = e * w1_ensembles(&rho, &sigma)? + t_end * e * c_prime * path_sup_distance(&r, &s, &times)?;
        worst = worst.max(lhs / rhs);
    }
    let t_star = contraction_horizon(c, c_prime);
    let steps = 20usize;
    let dt_c = t_star / steps as f64;
    let ctimes: Vec<f64> = (0..=steps).map(|k| k as f64 * dt_c).collect();
    let mut worst_ratio = 0.0f64;
    for _ in 0..5 {
        let rho = random_cloud(&mut rng, 120, [5.0, 5.0], 1.0)?;
        let r = MeasurePath::Translating {
            base: random_cloud(&mut rng, 40, [4.6, 5.0], 0.6)?,
            velocity: [0.4, 0.0],
        };
        let s = MeasurePath::Translating {
            base: random_cloud(&mut rng, 40, [5.3, 5.1], 0.6)?,
            velocity: [-0.3, 0.2],
        };
        let a = transport_driven(&rho, &r, &vel, t_star, dt_c)?;
        let b = transport_driven(&rho, &s, &vel, t_star, dt_c)?;
        let out = path_sup_distance(&a, &b, &ctimes)?;
        let inp = path_sup_distance(&r, &s, &ctimes)?;
        worst_ratio = worst_ratio.max(out / inp);
    }
    Ok((
        worst <= 1.05 && worst_ratio <= 0.5,
        format!(
            "C {c:.3}, C' {c_prime:.3}; worst lhs/rhs {worst:.3} (limit 1.05); T* {t_star:.4}, worst \
             contraction {worst_ratio:.3} (limit 0.5)"
        ),
    ))
}

fn criterion_9() -> CriterionReport {
    const NAME: &str = "particle and grid solvers agree under refinement";
    match check_consistency() {
        Ok((passed, detail)) => CriterionReport::new(9, NAME, passed, detail),
        Err(e) => CriterionReport::failed(9, NAME, &e),
    }
}

/// W1 between the grid and particle solutions of the panic preset on an `n × n` grid at `t_end`,
/// both lumped onto 32 × 32 blocks.
pub fn solver_gap(n: usize, t_end: f64) -> Result<f64> {
    let mut cfg = RunConfig::preset(ScenarioName::Panic);
    cfg.grid.nx = n;
    cfg.grid.ny = n;
    cfg.grid.dx = 4.0 / n as f64;
    cfg.grid.dy = 4.0 / n as f64;
    cfg.solver.t_end = t_end;
    let run = build_runs(&cfg)?.remove(0);
    let traj = fv_solver::run(&run.scenario, &run.model, &run.solver)?;
    let rho0 = &run.scenario.initial[0];
    let g = *rho0.grid();
    let particles = sample_particles(&MeasureSpec::Grid(rho0.clone()), g.len())?;
    let vmax = run.model.populations[0].law.sup_norm() * run.model.populations[0].nu.sup_norm();
    let dt = default_dt(&run.model).min(0.25 * g.dx / vmax.max(1e-12));
    let lag = run_lagrangian(
        vec![particles],
        &run.model,
        &LagrangianConfig {
            t_end,
            dt: Some(dt),
            frame_stride: usize::MAX,
        },
    )?;
    let coarse = Grid::new(32, 32, 0.125, 0.125, [0.0, 0.0])?;
    let ens = &lag.last().ensembles[0];
    let mu = aggregate_density(&traj.last().densities[0], &coarse)?.normalized();
    let nu = aggregate_points(ens.positions(), ens.weights(), &coarse)?.normalized();
    w1_discrete(&mu, &nu)
}

fn check_consistency() -> Result<(bool, String)> {
    let levels = [32usize, 64, 128];
    let mut rows = Vec::new();
    for n in levels {
        rows.push((4.0 / n as f64, solver_gap(n, 0.5)?));
    }
    let monotone = rows.windows(2).all(|w| w[1].1 < w[0].1);
    let order = loglog_slope(&rows).unwrap_or(f64::NAN);
    let list: Vec<String> = rows.iter().map(|(h, w)| format!("h {h:.4}: {w:.3e}")).collect();
    Ok((
        monotone && order >= 0.5,
        format!("{}; order {order:.2} (need 0.5)", list.join(", ")),
    ))
}

// ---------------------------------------------------------------------------------------------
// sensitivity

/// Panic preset with the given speed law, prepared for sensitivity runs to `t_end`.
fn sensitivity_setup(law: Option<SpeedLaw>, t_end: f64) -> Result<(SensitivitySetup, DensityField)> {
    let run = build_runs(&RunConfig::preset(ScenarioName::Panic))?.remove(0);
    let mut model = run.model;
    if let Some(l) = law {
        model.populations[0].law = l;
    }
    let setup = SensitivitySetup::new(model, None, t_end, 0.45)?;
    Ok((setup, run.scenario.initial[0].clone()))
}

/// `ρ₀ φ` with `φ` a random smooth function with values in `[−1, 1]`.
pub fn random_direction(rho0: &DensityField, seed: u64) -> PerturbationField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.3..2.0),
                rng.gen_range(0.3..2.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            )
        })
        .collect();
    let norm: f64 = modes.iter().map(|m| m.0.abs()).sum::<f64>().max(1e-12);
    let g = *rho0.grid();
    let phi: Vec<f64> = g
        .map_centers(|x| modes.iter().map(|(a, kx, ky, p)| a * (kx * x[0] + ky * x[1] + p).cos()).sum::<f64>() / norm);
    PerturbationField::new(g, rho0.values().iter().zip(phi).map(|(r, f)| r * f).collect())
        .expect("direction has the density's shape")
}

fn criterion_10() -> CriterionReport {
    const NAME: &str = "Gateaux differentiability of the solution map";
    match check_gateaux() {
        Ok((passed, detail)) => CriterionReport::new(10, NAME, passed, detail),
        Err(e) => CriterionReport::failed(10, NAME, &e),
    }
}

fn check_gateaux() -> Result<(bool, String)> {
    let hs = [0.1, 0.05, 0.025, 0.0125];
    let (setup, rho0) = sensitivity_setup(None, 0.25)?;
    let r0 = random_direction(&rho0, 10);
    let rep = gateaux_check(&setup, &rho0, &r0, &hs)?;
    let (flat, rho_f) = sensitivity_setup(Some(SpeedLaw::Constant { speed: 1.0 }), 0.25)?;
    let flat_rep = gateaux_check(&flat, &rho_f, &random_direction(&rho_f, 10), &hs)?;
    let flat_ok = flat_rep.rows.iter().all(|r| r.1 <= 10.0 * flat_rep.floor);
    let rate = rep.rate.unwrap_or(f64::NAN);
    let errs: Vec<String> = rep.rows.iter().map(|(h, e)| format!("{h}: {e:.2e}")).collect();
    Ok((
        rate >= 0.8 && rep.monotone && flat_ok,
        format!(
            "errors {}; rate {rate:.3} (need 0.8); constant speed at floor {flat_ok} (max {:.1e}, floor {:.1e})",
            errs.join(", "),
            flat_rep.rows.iter().map(|r| r.1).fold(0.0, f64::max),
            flat_rep.floor
        ),
    ))
}

fn criterion_11() -> CriterionReport {
    const NAME: &str = "cost derivative against finite differences";
    match check_residual() {
        Ok((passed, detail)) => CriterionReport::new(11, NAME, passed, detail),
        Err(e) => CriterionReport::failed(11, NAME, &e),
    }
}

fn check_residual() -> Result<(bool, String)> {
    let t_end = 0.25;
    let (setup, rho0) = sensitivity_setup(None, t_end)?;
    let dirs: Vec<PerturbationField> = (0..3).map(|s| random_direction(&rho0, 110 + s)).collect();
    let spec = CostSpec::new(0.8, t_end)?;
    let rows = optimality_residual(&setup, &rho0, &dirs, &spec, 0.02)?;
    let ok = rows.iter().all(|r| r.at_floor || r.rel_err <= 0.05);
    let list: Vec<String> = rows
        .iter()
        .map(|r| format!("dJ {:.5e} fd {:.5e} rel {:.2e}", r.dj, r.fd, r.rel_err))
        .collect();
    Ok((ok, list.join("; ")))
}

// ---------------------------------------------------------------------------------------------
// qualitative

fn criterion_12() -> CriterionReport {
    const NAME: &str = "lanes, obstacle evacuation, crossing lanes";
    let mut parts = Vec::new();
    let mut ok = true;

    match cached("corridor").map(|c| &c.result) {
        Some(Ok(t)) => {
            let f = t.frame_near(5.043);
            let lanes = lane_count(&f.state.densities[0], Axis::X, 0.3);
            ok &= lanes >= 3;
            parts.push(format!("corridor lanes at t = {:.3}: {lanes}", f.state.t));
        }
        _ => {
            ok = false;
            parts.push("corridor run unavailable".into());
        }
    }

    let evac = |label: &str| -> Option<f64> {
        let t = cached(label)?.result.as_ref().ok()?;
        Some(evacuation_time(&analysis::remaining_series(&t.metrics, 0), EVAC_LEVEL).time)
    };
    match (evac("braess/empty"), evac("braess/columns")) {
        (Some(a), Some(b)) => {
            ok &= b < a;
            parts.push(format!("evacuation time empty {a:.3}, columns {b:.3}"));
        }
        _ => {
            ok = false;
            parts.push("braess runs unavailable".into());
        }
    }

    match cached("crossing").map(|c| &c.result) {
        Some(Ok(t)) => {
            let radius = cached("crossing").map_or(0.0, |c| c.run.model.populations[0].kernel.radius());
            let lanes = crossing_lanes(t, radius);
            let (n1, n2) = (lanes.maxima[0].len(), lanes.maxima[1].len());
            ok &= lanes.shared == 0 && n1 > 0 && n2 > 0;
            parts.push(format!(
                "crossing at t = {:.3}: {n1} and {n2} interior lane maxima, {} shared with the other population",
                lanes.t, lanes.shared
            ));
        }
        _ => {
            ok = false;
            parts.push("crossing run unavailable".into());
        }
    }
    CriterionReport {
        id: 12,
        name: NAME,
        passed: ok,
        qualitative: true,
        detail: parts.join("; "),
    }
}

/// Lane separation of a crossing run at its final time.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingLanes {
    pub t: f64,
    /// Interior lane maxima (transverse indices) of each population.
    pub maxima: [Vec<usize>; 2],
    /// Maxima at which the other population is at least as dense as the lane's own.
    pub shared: usize,
}

/// Transverse profiles are taken over the columns where both populations are present. Rows
/// within one kernel radius of the occupied band's edges are wall layers, not lanes, and are
/// skipped.
pub fn crossing_lanes(t: &Trajectory, radius: f64) -> CrossingLanes {
    let frame = t.frames.last().expect("trajectory has frames");
    let (a, b) = (&frame.state.densities[0], &frame.state.densities[1]);
    let g = a.grid();
    let cols: Vec<usize> = (0..g.nx)
        .filter(|&i| {
            let s = |d: &DensityField| (0..g.ny).map(|j| d.values()[g.idx(i, j)]).sum::<f64>();
            s(a) > 1e-3 && s(b) > 1e-3
        })
        .collect();
    let range = match (cols.first(), cols.last()) {
        (Some(&lo), Some(&hi)) => Some((lo, hi + 1)),
        _ => None,
    };
    let profiles = [transverse_profile(a, Axis::X, range), transverse_profile(b, Axis::X, range)];
    let occupied: Vec<usize> = (0..g.ny).filter(|&j| profiles[0][j] + profiles[1][j] > 0.0).collect();
    let band = (radius / g.dy).ceil() as usize;
    let (lo, hi) = match (occupied.first(), occupied.last()) {
        (Some(&l), Some(&h)) => (l + band, h.saturating_sub(band)),
        _ => (1, 0),
    };
    let maxima = [0, 1].map(|p| {
        profile_maxima(&profiles[p], 0.3)
            .into_iter()
            .filter(|&j| j > lo && j < hi)
            .collect::<Vec<_>>()
    });
    let shared = (0..2)
        .map(|p| maxima[p].iter().filter(|&&j| profiles[1 - p][j] >= profiles[p][j]).count())
        .sum();
    CrossingLanes {
        t: frame.state.t,
        maxima,
        shared,
    }
}

/// Scenario used by examples that only need the preset's geometry and initial data.
pub fn preset_scenario(name: ScenarioName) -> Result<(Scenario, ModelSpec)> {
    let run = build_runs(&RunConfig::preset(name))?.remove(0);
    Ok((run.scenario, run.model))
}
