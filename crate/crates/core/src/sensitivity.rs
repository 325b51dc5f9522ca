//! Linearized panic dynamics, difference-quotient checks of the derivative, and a threshold cost
//! with its directional derivative.
//!
//! The linearized solver is the exact tangent of the discrete split upwind step, so difference
//! quotients of the nonlinear solver converge to it at first order in `h` with no
//! discretization mismatch.

use crate::error::{Error, Result};
use crate::fv_solver::{face_velocities, sweep, DensityField, Solver, SolverConfig, State, SweepFlux, Trajectory};
use crate::geometry::{DomainMask, Grid};
use crate::models::{ModelKind, ModelSpec};

/// Signed per-cell perturbation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationField {
    grid: Grid,
    values: Vec<f64>,
}

impl PerturbationField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.shape(),
                found: (values.len(), 1),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDensity("perturbation values must be finite".into()));
        }
        Ok(PerturbationField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        PerturbationField {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn from_fn(grid: Grid, f: impl FnMut(crate::geometry::Point) -> f64) -> Self {
        PerturbationField {
            values: grid.map_centers(f),
            grid,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.cell_area()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &PerturbationField, b: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(PerturbationField {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect(),
        })
    }

    /// `ρ + h r`, rejecting negative cells.
    pub fn perturb(&self, rho: &DensityField, h: f64) -> Result<DensityField> {
        self.grid.check_same(rho.grid())?;
        let vals = rho.values().iter().zip(&self.values).map(|(a, b)| a + h * b).collect();
        DensityField::new(self.grid, vals)
    }
}

/// Which source term the linearized equation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Linearization {
    /// Source `−div(ρ v′(ρ*η) (r*η) ν)`: the derivative of the solution map.
    #[default]
    Tangent,
    /// Source `−div(ρ v′(ρ*η) ν)` without the `(r*η)` factor. Affine in `r`; for comparison only.
    AsPrinted,
}

/// Perturbations at the base trajectory's frame times.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<PerturbationField>,
    /// `‖r(t)‖_{L1}` per frame.
    pub l1: Vec<f64>,
}

impl LinearizedTrajectory {
    pub fn last(&self) -> &PerturbationField {
        self.fields.last().expect("at least one field")
    }
}

fn require_panic(model: &ModelSpec) -> Result<()> {
    if model.kind != ModelKind::Panic {
        return Err(Error::Unsupported(format!(
            "linearization is implemented for the single-population panic model, not {:?}",
            model.kind
        )));
    }
    Ok(())
}

/// Tangent of one conservative upwind sweep: `δu` transported with `a`, plus the face-velocity
/// perturbation `δa` acting on the upwind value of `u`.
#[allow(clippy::too_many_arguments)]
fn sweep_tangent(
    u: &[f64],
    du: &[f64],
    a: &[f64],
    da: &[f64],
    grid: &Grid,
    lambda: f64,
    along_x: bool,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (lines, len) = if along_x { (ny, nx) } else { (nx, ny) };
    let mut out = du.to_vec();
    let mut fl = vec![0.0; len + 1];
    for line in 0..lines {
        let cell = |p: usize| if along_x { line * nx + p } else { p * nx + line };
        let face = |f: usize| if along_x { line * (nx + 1) + f } else { f * nx + line };
        for f in 0..=len {
            let (ul, dul) = if f > 0 { (u[cell(f - 1)], du[cell(f - 1)]) } else { (0.0, 0.0) };
            let (ur, dur) = if f < len { (u[cell(f)], du[cell(f)]) } else { (0.0, 0.0) };
            let af = a[face(f)];
            let upwind = if af > 0.0 {
                ul
            } else if af < 0.0 {
                ur
            } else {
                0.5 * (ul + ur)
            };
            fl[f] = af.max(0.0) * dul + af.min(0.0) * dur + da[face(f)] * upwind;
        }
        for p in 0..len {
            out[cell(p)] = du[cell(p)] - lambda * (fl[p + 1] - fl[p]);
        }
    }
    out
}

/// Face perturbation matching `face_velocities`: averages, with the wall clip's one-sided
/// derivative.
fn face_tangent(
    component: &[f64],
    dcomponent: &[f64],
    grid: &Grid,
    walkable: Option<&[bool]>,
    wall_clip: bool,
    along_x: bool,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (nf, lines, len) = if along_x { (nx + 1, ny, nx) } else { (ny + 1, nx, ny) };
    let mut out = vec![0.0; nf * lines];
    let cell = |line: usize, p: usize| if along_x { line * nx + p } else { p * nx + line };
    let face = |line: usize, f: usize| if along_x { line * (nx + 1) + f } else { f * nx + line };
    for line in 0..lines {
        for f in 0..=len {
            let left = (f > 0).then(|| cell(line, f - 1));
            let right = (f < len).then(|| cell(line, f));
            out[face(line, f)] = match (left, right) {
                (Some(l), Some(r)) => {
                    let (wl, wr) = walkable.map_or((true, true), |w| (w[l], w[r]));
                    if wall_clip && wl != wr {
                        if wl {
                            if component[l] < 0.0 { dcomponent[l] } else { 0.0 }
                        } else if component[r] > 0.0 {
                            dcomponent[r]
                        } else {
                            0.0
                        }
                    } else if wall_clip && !wl && !wr {
                        0.0
                    } else {
                        0.5 * (dcomponent[l] + dcomponent[r])
                    }
                }
                (Some(l), None) => dcomponent[l],
                (None, Some(r)) => dcomponent[r],
                (None, None) => 0.0,
            };
        }
    }
    out
}

/// Solves the linearized equation along a stored panic trajectory.
///
/// `traj` must hold every step (`frame_stride = 1`, frames stored) and come from `solver`.
pub fn solve_linearized(
    solver: &Solver,
    traj: &Trajectory,
    r0: &PerturbationField,
    variant: Linearization,
) -> Result<LinearizedTrajectory> {
    let model = solver.model();
    require_panic(model)?;
    let g = *solver.grid();
    g.check_same(r0.grid())?;
    for (k, f) in traj.frames.iter().enumerate() {
        if f.step != k {
            return Err(Error::InvalidTrajectory(format!(
                "frame {k} holds step {}; the linearized solver needs every step",
                f.step
            )));
        }
    }
    if traj.steps.len() + 1 != traj.frames.len() {
        return Err(Error::InvalidTrajectory("step records do not match frames".into()));
    }
    let pop = &model.populations[0];
    let stencil = solver.stencil(0);
    let walk = solver.walkable();
    let clip = solver.config().wall_clip;
    let mut r = r0.values.clone();
    let mut out = LinearizedTrajectory {
        times: vec![traj.frames[0].state.t],
        fields: vec![r0.clone()],
        l1: vec![r0.l1_norm()],
    };
    for (n, rec) in traj.steps.iter().enumerate() {
        let rho = traj.frames[n].state.densities[0].values();
        let dt = rec.dt;
        let c = stencil.apply(rho, false).values;
        let dc = match variant {
            Linearization::Tangent => stencil.apply(&r, false).values,
            Linearization::AsPrinted => vec![1.0; g.len()],
        };
        let mut ax = vec![0.0; g.len()];
        let mut ay = vec![0.0; g.len()];
        let mut dax = vec![0.0; g.len()];
        let mut day = vec![0.0; g.len()];
        for k in 0..g.len() {
            let s = pop.law.eval(c[k]);
            let ds = pop.law.derivative(c[k]) * dc[k];
            ax[k] = s * pop.nu.u[k];
            ay[k] = s * pop.nu.v[k];
            dax[k] = ds * pop.nu.u[k];
            day[k] = ds * pop.nu.v[k];
        }
        let fx = face_velocities(&ax, &g, walk, clip, true);
        let dfx = face_tangent(&ax, &dax, &g, walk, clip, true);
        let half = sweep(rho, &g, &fx, SweepFlux::Linear, dt / g.dx, true);
        let dhalf = sweep_tangent(rho, &r, &fx.a, &dfx, &g, dt / g.dx, true);
        let fy = face_velocities(&ay, &g, walk, clip, false);
        let dfy = face_tangent(&ay, &day, &g, walk, clip, false);
        r = sweep_tangent(&half, &dhalf, &fy.a, &dfy, &g, dt / g.dy, false);
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                t: traj.frames[n + 1].state.t,
                population: 0,
                last_good: Box::new(traj.frames[n].state.densities[0].clone()),
            });
        }
        let field = PerturbationField { grid: g, values: r.clone() };
        out.times.push(traj.frames[n + 1].state.t);
        out.l1.push(field.l1_norm());
        out.fields.push(field);
    }
    Ok(out)
}

/// Threshold cost `∫₀^T ∫ max(0, ρ−ρ_c)^p ψ dx dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSpec {
    pub rho_c: f64,
    pub exponent: f64,
    /// Per-cell time-independent weight; `None` means 1 everywhere.
    pub weight: Option<Vec<f64>>,
    pub horizon: f64,
}

impl CostSpec {
    pub fn new(rho_c: f64, horizon: f64) -> Result<Self> {
        let spec = CostSpec {
            rho_c,
            exponent: 2.0,
            weight: None,
            horizon,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_c > 0.0 && self.rho_c.is_finite()) {
            return Err(Error::Config(format!("rho_c must be > 0, got {}", self.rho_c)));
        }
        // p > 1 keeps the penalty C¹ at the threshold
        if !(self.exponent > 1.0 && self.exponent.is_finite()) {
            return Err(Error::Config(format!("penalty exponent must be > 1, got {}", self.exponent)));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if let Some(w) = &self.weight {
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Config("weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn penalty(&self, rho: f64) -> f64 {
        (rho - self.rho_c).max(0.0).powf(self.exponent)
    }

    pub fn penalty_derivative(&self, rho: f64) -> f64 {
        let e = rho - self.rho_c;
        if e > 0.0 {
            self.exponent * e.powf(self.exponent - 1.0)
        } else {
            0.0
        }
    }

    fn weight_at(&self, k: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[k])
    }
}

/// Intervals `[t_n, t_{n+1}] ∩ [0, T]` with their lengths.
fn intervals(times: &[f64], horizon: f64) -> impl Iterator<Item = (usize, f64)> + '_ {
    (0..times.len().saturating_sub(1)).filter_map(move |n| {
        let len = times[n + 1].min(horizon) - times[n];
        (len > 0.0).then_some((n, len))
    })
}

/// Time and space midpoint quadrature of the cost over the recorded frames of population 0.
pub fn cost_j(traj: &Trajectory, spec: &CostSpec) -> Result<f64> {
    spec.validate()?;
    let times = traj.times();
    let g = *traj.frames[0].state.densities[0].grid();
    if let Some(w) = &spec.weight {
        if w.len() != g.len() {
            return Err(Error::ShapeMismatch {
                expected: g.shape(),
                found: (w.len(), 1),
            });
        }
    }
    let area = g.cell_area();
    let mut total = 0.0;
    for (n, len) in intervals(&times, spec.horizon) {
        let a = traj.frames[n].state.densities[0].values();
        let b = traj.frames[n + 1].state.densities[0].values();
        let s: f64 = (0..g.len())
            .map(|k| spec.penalty(0.5 * (a[k] + b[k])) * spec.weight_at(k))
            .sum();
        total += len * s * area;
    }
    Ok(total)
}

/// `dJ[r] = ∫∫ f′(ρ) r ψ`, the exact derivative of [`cost_j`] along the linearized solution.
pub fn cost_derivative(traj: &Trajectory, lin: &LinearizedTrajectory, spec: &CostSpec) -> Result<f64> {
    spec.validate()?;
    if lin.fields.len() != traj.frames.len() {
        return Err(Error::InvalidTrajectory("linearized solution does not match the trajectory".into()));
    }
    let times = traj.times();
    let g = *traj.frames[0].state.densities[0].grid();
    let area = g.cell_area();
    let mut total = 0.0;
    for (n, len) in intervals(&times, spec.horizon) {
        let a = traj.frames[n].state.densities[0].values();
        let b = traj.frames[n + 1].state.densities[0].values();
        let (ra, rb) = (lin.fields[n].values(), lin.fields[n + 1].values());
        let s: f64 = (0..g.len())
            .map(|k| spec.penalty_derivative(0.5 * (a[k] + b[k])) * 0.5 * (ra[k] + rb[k]) * spec.weight_at(k))
            .sum();
        total += len * s * area;
    }
    Ok(total)
}

/// Model, geometry and step control shared by the derivative checks.
///
/// The step is fixed from an a-priori speed bound so that perturbed runs share the base run's
/// time grid.
#[derive(Debug, Clone)]
pub struct SensitivitySetup {
    solver: Solver,
}

impl SensitivitySetup {
    pub fn new(model: ModelSpec, mask: Option<DomainMask>, t_end: f64, cfl: f64) -> Result<Self> {
        require_panic(&model)?;
        let pop = &model.populations[0];
        let g = *model.grid();
        let c = pop.nu.component_sup();
        let speed = pop.law.sup_norm() * (c[0] / g.dx).max(c[1] / g.dy);
        let dt = if speed > 0.0 { cfl / speed } else { t_end.max(1e-3) };
        let steps = (t_end / dt).ceil().max(1.0);
        let cfg = SolverConfig {
            cfl,
            t_end,
            dt_fixed: Some(t_end / steps),
            dt_max: f64::INFINITY,
            frame_stride: 1,
            store_frames: true,
            edge_tolerance: None,
            ..SolverConfig::default()
        };
        Ok(SensitivitySetup {
            solver: Solver::new(model, mask, cfg)?,
        })
    }

    pub fn solver(&self) -> &Solver {
        &self.solver
    }

    pub fn run(&self, rho0: &DensityField) -> Result<Trajectory> {
        self.solver.run(State {
            t: 0.0,
            densities: vec![rho0.clone()],
            agents: Vec::new(),
        })
    }

    pub fn linearize(&self, traj: &Trajectory, r0: &PerturbationField, variant: Linearization) -> Result<LinearizedTrajectory> {
        solve_linearized(&self.solver, traj, r0, variant)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateauxReport {
    /// `(h, ‖(S_T(ρ₀+h r₀) − S_Tρ₀)/h − Σ_T r₀‖_{L1})`.
    pub rows: Vec<(f64, f64)>,
    /// Errors below this are roundoff.
    pub floor: f64,
    /// Least-squares slope of `log error` against `log h` over the rows above the floor;
    /// `None` when fewer than two rows are above it.
    pub rate: Option<f64>,
    /// Errors decrease with `h` wherever they are above the floor.
    pub monotone: bool,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = points.iter().map(|(x, y)| (x.ln(), y.ln())).unzip();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Difference quotients of the solution map against the linearized solution at the horizon.
pub fn gateaux_check(
    setup: &SensitivitySetup,
    rho0: &DensityField,
    r0: &PerturbationField,
    h_list: &[f64],
) -> Result<GateauxReport> {
    if h_list.is_empty() || h_list.iter().any(|h| !(*h > 0.0)) || h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("h values must be positive and decreasing".into()));
    }
    let base = setup.run(rho0)?;
    let lin = setup.linearize(&base, r0, Linearization::Tangent)?;
    let sigma = lin.last().values();
    let s0 = base.last().densities[0].values();
    let area = rho0.grid().cell_area();
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let pert = setup.run(&r0.perturb(rho0, h)?)?;
        if pert.frames.len() != base.frames.len() {
            return Err(Error::InvalidTrajectory("perturbed run used a different time grid".into()));
        }
        let sh = pert.last().densities[0].values();
        let err: f64 = (0..s0.len()).map(|k| ((sh[k] - s0[k]) / h - sigma[k]).abs()).sum::<f64>() * area;
        rows.push((h, err));
    }
    let scale = rho0.mass() + r0.l1_norm() + lin.last().l1_norm();
    let floor = 1e-12 * scale / h_list[h_list.len() - 1];
    let above: Vec<(f64, f64)> = rows.iter().copied().filter(|r| r.1 > 10.0 * floor).collect();
    let monotone = above.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(GateauxReport {
        rate: loglog_slope(&above),
        rows,
        floor,
        monotone,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualRow {
    /// Directional derivative from the linearized solution.
    pub dj: f64,
    /// Richardson-extrapolated forward difference `2 D(h/2) − D(h)`.
    pub fd: f64,
    pub rel_err: f64,
    /// `|dj|` is at roundoff level relative to `J`.
    pub at_floor: bool,
}

/// `dJ` along each direction, checked against difference quotients of `J` with step `h`.
pub fn optimality_residual(
    setup: &SensitivitySetup,
    rho0: &DensityField,
    directions: &[PerturbationField],
    spec: &CostSpec,
    h: f64,
) -> Result<Vec<ResidualRow>> {
    if directions.is_empty() {
        return Err(Error::Config("need at least one direction".into()));
    }
    let base = setup.run(rho0)?;
    let j0 = cost_j(&base, spec)?;
    let mut rows = Vec::with_capacity(directions.len());
    for r0 in directions {
        let lin = setup.linearize(&base, r0, Linearization::Tangent)?;
        let dj = cost_derivative(&base, &lin, spec)?;
        let quotient = |s: f64| -> Result<f64> {
            let run = setup.run(&r0.perturb(rho0, s)?)?;
            Ok((cost_j(&run, spec)? - j0) / s)
        };
        let fd = 2.0 * quotient(0.5 * h)? - quotient(h)?;
        let floor = 1e-10 * (j0.abs() + 1e-300);
        let at_floor = dj.abs() <= floor && fd.abs() <= floor.max(1e-12);
        let rel_err = if at_floor { 0.0 } else { (dj - fd).abs() / dj.abs().max(fd.abs()) };
        rows.push(ResidualRow { dj, fd, rel_err, at_floor });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use crate::kernels::{make_mollifier, KernelProfile};
    use crate::models::{Population, SpeedLaw};

    fn setup(law: SpeedLaw, n: usize, t_end: f64) -> (SensitivitySetup, Grid) {
        let g = Grid::new(n, n, 4.0 / n as f64, 4.0 / n as f64, [0.0, 0.0]).unwrap();
        let nu = VectorField::from_fn(g, |x| {
            let d = [2.6 - x[0], 2.2 - x[1]];
            let s = (0.25 + d[0] * d[0] + d[1] * d[1]).sqrt();
            [d[0] / s, d[1] / s]
        });
        let model = ModelSpec {
            kind: ModelKind::Panic,
            populations: vec![Population {
                name: "crowd".into(),
                nu,
                kernel: make_mollifier(0.5, KernelProfile::Triweight).unwrap(),
                law,
            }],
            agents: vec![],
        };
        (SensitivitySetup::new(model, None, t_end, 0.45).unwrap(), g)
    }

    fn blob(g: Grid) -> DensityField {
        DensityField::from_fn(g, |x| {
            let r2 = (x[0] - 1.8).powi(2) + (x[1] - 1.9).powi(2);
            if r2 < 0.64 { 1.5 * (1.0 - r2 / 0.64).powi(2) } else { 0.0 }
        })
    }

    fn bump(g: Grid, c: [f64; 2], a: f64) -> PerturbationField {
        PerturbationField::from_fn(g, |x| {
            let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            if r2 < 0.16 { a * (1.0 - r2 / 0.16).powi(2) } else { 0.0 }
        })
    }

    #[test]
    fn zero_data_gives_zero_perturbation() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 32, 0.2);
        let base = s.run(&DensityField::zeros(g)).unwrap();
        let lin = s.linearize(&base, &PerturbationField::zeros(g), Linearization::Tangent).unwrap();
        assert!(lin.fields.iter().all(|f| f.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_in_the_direction() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 32, 0.2);
        let rho = blob(g);
        let base = s.run(&rho).unwrap();
        let r = bump(g, [1.6, 1.8], 0.7);
        let q = bump(g, [2.1, 2.0], -0.4);
        let (a, b) = (1.7, -0.6);
        let lr = s.linearize(&base, &r, Linearization::Tangent).unwrap();
        let lq = s.linearize(&base, &q, Linearization::Tangent).unwrap();
        let lc = s.linearize(&base, &r.combine(a, &q, b).unwrap(), Linearization::Tangent).unwrap();
        let lhs = lc.last().values();
        let rhs = lr.last().combine(a, lq.last(), b).unwrap();
        let err: f64 = lhs.iter().zip(rhs.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn constant_speed_is_exactly_linear() {
        let (s, g) = setup(SpeedLaw::Constant { speed: 1.0 }, 32, 0.2);
        let rho = blob(g);
        let r = bump(g, [1.7, 1.9], 1.0);
        let rep = gateaux_check(&s, &rho, &r, &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        for (_, e) in &rep.rows {
            assert!(*e <= 10.0 * rep.floor, "{rep:?}");
        }
        let base = s.run(&rho).unwrap();
        let lin = s.linearize(&base, &r, Linearization::Tangent).unwrap();
        for w in lin.l1.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }

    #[test]
    fn zero_direction_has_zero_error() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 24, 0.1);
        let rep = gateaux_check(&s, &blob(g), &PerturbationField::zeros(g), &[0.1, 0.05]).unwrap();
        assert!(rep.rows.iter().all(|r| r.1 == 0.0));
    }

    #[test]
    fn difference_quotients_converge() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 32, 0.2);
        let rep = gateaux_check(&s, &blob(g), &bump(g, [1.7, 1.9], 1.0), &[0.1, 0.05, 0.025, 0.0125]).unwrap();
        assert!(rep.monotone, "{rep:?}");
        assert!(rep.rate.unwrap() > 0.8, "{rep:?}");
    }

    #[test]
    fn printed_variant_differs() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 24, 0.1);
        let rho = blob(g);
        let base = s.run(&rho).unwrap();
        let z = PerturbationField::zeros(g);
        let printed = s.linearize(&base, &z, Linearization::AsPrinted).unwrap();
        assert!(printed.last().l1_norm() > 0.0);
    }

    #[test]
    fn cost_basics() {
        let g = Grid::new(10, 10, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let spec = CostSpec::new(0.5, 1.0).unwrap();
        let frame = |v: f64, step: usize, t: f64| crate::fv_solver::Frame {
            step,
            state: State {
                t,
                densities: vec![DensityField::new(g, vec![v; g.len()]).unwrap()],
                agents: vec![],
            },
        };
        let traj = |v: f64| Trajectory {
            frames: (0..=4).map(|k| frame(v, k, k as f64 * 0.25)).collect(),
            metrics: vec![],
            steps: vec![],
            picard: vec![],
            extremes: vec![],
            max_total_density: v,
            initial_mass: vec![v],
            clamped_mass: 0.0,
        };
        assert_eq!(cost_j(&traj(0.5), &spec).unwrap(), 0.0);
        assert!((cost_j(&traj(1.5), &spec).unwrap() - 1.0).abs() < 1e-12);
        assert!(cost_j(&traj(1.2), &spec).unwrap() < cost_j(&traj(1.3), &spec).unwrap());
        assert!(CostSpec::new(0.0, 1.0).is_err());
    }

    #[test]
    fn cost_derivative_matches_differences() {
        let (s, g) = setup(SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.2 }, 32, 0.2);
        let rho = blob(g);
        let spec = CostSpec::new(0.8, 0.2).unwrap();
        let dir = PerturbationField::new(g, rho.values().iter().enumerate().map(|(k, v)| v * ((k % 7) as f64 / 7.0 - 0.4)).collect()).unwrap();
        let rows = optimality_residual(&s, &rho, &[dir], &spec, 0.02).unwrap();
        assert!(rows[0].dj.abs() > 0.0);
        assert!(rows[0].rel_err < 0.05, "{rows:?}");
        let none = CostSpec::new(10.0, 0.2).unwrap();
        let rows = optimality_residual(&s, &rho, &[bump(g, [1.8, 1.9], 0.3)], &none, 0.02).unwrap();
        assert_eq!(rows[0].dj, 0.0);
    }
}
