//! Eulerian finite-volume solver.
//!
//! Each step freezes the nonlocal terms at the start of the step (or iterates them to a fixed
//! point in Picard mode) and applies one x-sweep followed by one y-sweep of a monotone
//! first-order scheme. Fluxes linear in the density use upwinding; fluxes of the form
//! `ρ v(ρ) W(x)` use the Godunov flux of the concave/convex face flux, or Rusanov on request.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{is_support_contained, DomainMask, Grid, Point};
use crate::kernels::{ConvField, Stencil};
use crate::models::{advance_agents, transport_field, AgentState, ModelSpec, SpeedLaw, TransportField};
use crate::transport_metrics::total_variation;

/// Nonnegative cell averages on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidDensity(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDensity(format!(
                "densities must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(DensityField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        DensityField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at cell centres; negative samples are clipped to zero.
    pub fn from_fn(grid: Grid, f: impl FnMut(Point) -> f64) -> Self {
        let values = grid.map_centers(f).into_iter().map(|v| v.max(0.0)).collect();
        DensityField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().fold(0.0, |a, &b| a.max(b))
    }

    pub fn scaled(&self, a: f64) -> Self {
        DensityField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * a.max(0.0)).collect(),
        }
    }

    pub fn l1_distance(&self, other: &DensityField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_area())
    }

    pub fn total_variation(&self) -> f64 {
        total_variation(&self.values, &self.grid)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NonlocalUpdate {
    /// Convolutions frozen at the start of each step.
    #[default]
    Explicit,
    /// Per-step fixed point: convolutions of the step-midpoint density, iterated until the L1
    /// change falls below `tol` (at most `max_iter` sweeps).
    Picard { tol: f64, max_iter: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FluxScheme {
    #[default]
    Godunov,
    LaxFriedrichs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub cfl: f64,
    pub nonlocal_update: NonlocalUpdate,
    pub flux: FluxScheme,
    pub t_end: f64,
    /// Frames (and metric rows) are recorded every `frame_stride` steps, at every snapshot time
    /// and at `t_end`.
    pub frame_stride: usize,
    pub dt_max: f64,
    /// Use this step instead of the CFL-derived one (still checked against the stability limit).
    pub dt_fixed: Option<f64>,
    pub snapshot_times: Vec<f64>,
    /// Block flux into non-walkable cells at walkable/non-walkable faces.
    pub wall_clip: bool,
    /// Abort when more than `edge_tolerance` (relative) of a population lies within one kernel
    /// radius of the grid edge. Disabled when `None`.
    pub edge_tolerance: Option<f64>,
    /// Keep densities of non-snapshot frames (metric rows are always kept).
    pub store_frames: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cfl: 0.45,
            nonlocal_update: NonlocalUpdate::Explicit,
            flux: FluxScheme::Godunov,
            t_end: 1.0,
            frame_stride: 1,
            dt_max: 0.1,
            dt_fixed: None,
            snapshot_times: Vec::new(),
            wall_clip: true,
            edge_tolerance: Some(1e-10),
            store_frames: true,
        }
    }
}

/// Largest admissible Courant number for the split scheme.
pub const MAX_CFL: f64 = 0.5;

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSolverConfig(m));
        if !(self.cfl > 0.0 && self.cfl <= MAX_CFL) {
            return bad(format!("cfl must lie in (0, {MAX_CFL}], got {}", self.cfl));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be finite and >= 0, got {}", self.t_end));
        }
        if self.frame_stride == 0 {
            return bad("frame_stride must be >= 1".into());
        }
        if !(self.dt_max > 0.0) {
            return bad(format!("dt_max must be > 0, got {}", self.dt_max));
        }
        if let Some(dt) = self.dt_fixed {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt_fixed must be > 0, got {dt}"));
            }
        }
        if let NonlocalUpdate::Picard { tol, max_iter } = self.nonlocal_update {
            if !(tol > 0.0) || max_iter == 0 {
                return bad("picard needs tol > 0 and max_iter >= 1".into());
            }
        }
        if self.snapshot_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("snapshot times must be finite and >= 0".into());
        }
        Ok(())
    }
}

/// Geometry and initial data of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mask: Option<DomainMask>,
    pub initial: Vec<DensityField>,
    /// Cells counted as "still inside" for the evacuated fraction.
    pub room: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    pub densities: Vec<DensityField>,
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub step: usize,
    pub state: State,
}

/// One metric row per population per recorded frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub t: f64,
    pub pop: usize,
    pub mass: f64,
    pub linf: f64,
    pub tv: f64,
    pub support_ok: bool,
    /// Fraction of the population's initial in-room mass that has left the room.
    pub evac_frac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub clamped_mass: f64,
    pub picard_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardRecord {
    pub t: f64,
    /// L1 changes between successive sweeps.
    pub changes: Vec<f64>,
    /// Ratios of successive changes.
    pub factors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub frames: Vec<Frame>,
    pub metrics: Vec<MetricRow>,
    pub steps: Vec<StepRecord>,
    pub picard: Vec<PicardRecord>,
    /// Per population `(min, max)` over every step, not only recorded frames.
    pub extremes: Vec<(f64, f64)>,
    /// Largest cellwise sum of all populations over every step.
    pub max_total_density: f64,
    pub initial_mass: Vec<f64>,
    pub clamped_mass: f64,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.state.t).collect()
    }

    pub fn last(&self) -> &State {
        &self.frames.last().expect("trajectory has at least one frame").state
    }

    /// Frame recorded closest to `t`.
    pub fn frame_near(&self, t: f64) -> &Frame {
        self.frames
            .iter()
            .min_by(|a, b| (a.state.t - t).abs().total_cmp(&(b.state.t - t).abs()))
            .expect("trajectory has at least one frame")
    }

    pub fn metrics_for(&self, pop: usize) -> impl Iterator<Item = &MetricRow> {
        self.metrics.iter().filter(move |r| r.pop == pop)
    }
}

/// `dt = cfl·min(dx, dy)/max(|V|_∞, 1e-12)`, capped at `dt_max`.
pub fn cfl_dt(speeds: &[[f64; 2]], grid: &Grid, cfl: f64, dt_max: f64) -> f64 {
    let s = speeds
        .iter()
        .map(|c| c[0].max(c[1]))
        .fold(0.0, f64::max)
        .max(1e-12);
    (cfl * grid.dx.min(grid.dy) / s).min(dt_max)
}

/// Same formula for plain velocity fields.
pub fn cfl_dt_for_fields(fields: &[&crate::geometry::VectorField], grid: &Grid, cfl: f64, dt_max: f64) -> f64 {
    let speeds: Vec<[f64; 2]> = fields.iter().map(|f| {
        let s = f.sup_norm();
        [s, s]
    }).collect();
    cfl_dt(&speeds, grid, cfl, dt_max)
}

/// Per-face transport data of one population for one sweep direction.
#[derive(Debug, Clone)]
pub(crate) struct FaceVelocities {
    /// Along-sweep component at each face; x-faces `f + j (nx+1)`, y-faces `i + f nx`.
    pub a: Vec<f64>,
    /// Faces between a walkable and a non-walkable cell.
    pub wall: Vec<bool>,
}

/// Face values of one component: average of the two cells, one-sided and clipped at walls.
pub(crate) fn face_velocities(
    component: &[f64],
    grid: &Grid,
    walkable: Option<&[bool]>,
    wall_clip: bool,
    along_x: bool,
) -> FaceVelocities {
    let (nx, ny) = (grid.nx, grid.ny);
    let (nf, lines, len) = if along_x { (nx + 1, ny, nx) } else { (ny + 1, nx, ny) };
    let mut a = vec![0.0; nf * lines];
    let mut wall = vec![false; nf * lines];
    let cell = |line: usize, p: usize| if along_x { line * nx + p } else { p * nx + line };
    let face = |line: usize, f: usize| if along_x { line * (nx + 1) + f } else { f * nx + line };
    for line in 0..lines {
        for f in 0..=len {
            let left = (f > 0).then(|| cell(line, f - 1));
            let right = (f < len).then(|| cell(line, f));
            let val = match (left, right) {
                (Some(l), Some(r)) => {
                    let (wl, wr) = walkable.map_or((true, true), |w| (w[l], w[r]));
                    if wall_clip && wl != wr {
                        wall[face(line, f)] = true;
                        if wl {
                            component[l].min(0.0)
                        } else {
                            component[r].max(0.0)
                        }
                    } else if wall_clip && !wl && !wr {
                        0.0
                    } else {
                        0.5 * (component[l] + component[r])
                    }
                }
                (Some(l), None) => component[l],
                (None, Some(r)) => component[r],
                (None, None) => 0.0,
            };
            a[face(line, f)] = val;
        }
    }
    FaceVelocities { a, wall }
}

/// Godunov flux of `w g(u)` for a unimodal `g` with maximiser `peak`.
#[inline]
fn godunov_flux(law: &SpeedLaw, peak: Option<f64>, w: f64, ul: f64, ur: f64) -> f64 {
    match peak {
        None => {
            let a = w * law.eval(0.0);
            a.max(0.0) * ul + a.min(0.0) * ur
        }
        Some(p) => {
            if w > 0.0 {
                w * law.flux(ul.min(p)).min(law.flux(ur.max(p)))
            } else if w < 0.0 {
                w * law.flux(ul.max(p)).min(law.flux(ur.min(p)))
            } else {
                0.0
            }
        }
    }
}

#[inline]
fn rusanov_flux(law: &SpeedLaw, peak: Option<f64>, w: f64, ul: f64, ur: f64) -> f64 {
    let (gl, gr) = (law.flux(ul), law.flux(ur));
    let mut slope = law.flux_derivative(ul).abs().max(law.flux_derivative(ur).abs());
    if let Some(p) = peak {
        if (ul - p) * (ur - p) < 0.0 {
            slope = slope.max(law.flux_derivative(p).abs());
        }
    }
    0.5 * w * (gl + gr) - 0.5 * w.abs() * slope * (ur - ul)
}

/// What a sweep transports.
#[derive(Debug, Clone, Copy)]
pub(crate) enum SweepFlux<'a> {
    Linear,
    Local { law: &'a SpeedLaw, peak: Option<f64>, scheme: FluxScheme },
}

/// One conservative sweep `u_i ← u_i − λ (F_{i+½} − F_{i−½})` along x or y.
pub(crate) fn sweep(
    values: &[f64],
    grid: &Grid,
    faces: &FaceVelocities,
    flux: SweepFlux<'_>,
    lambda: f64,
    along_x: bool,
) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (lines, len) = if along_x { (ny, nx) } else { (nx, ny) };
    let mut out = values.to_vec();
    let mut fl = vec![0.0; len + 1];
    for line in 0..lines {
        let cell = |p: usize| if along_x { line * nx + p } else { p * nx + line };
        let face = |f: usize| if along_x { line * (nx + 1) + f } else { f * nx + line };
        let mut any = false;
        for f in 0..=len {
            let ul = if f > 0 { values[cell(f - 1)] } else { 0.0 };
            let ur = if f < len { values[cell(f)] } else { 0.0 };
            if ul == 0.0 && ur == 0.0 {
                fl[f] = 0.0;
                continue;
            }
            any = true;
            let a = faces.a[face(f)];
            fl[f] = match flux {
                SweepFlux::Linear => a.max(0.0) * ul + a.min(0.0) * ur,
                SweepFlux::Local { law, peak, scheme } => {
                    if scheme == FluxScheme::LaxFriedrichs && !faces.wall[face(f)] {
                        rusanov_flux(law, peak, a, ul, ur)
                    } else {
                        godunov_flux(law, peak, a, ul, ur)
                    }
                }
            };
        }
        if !any {
            continue;
        }
        for p in 0..len {
            out[cell(p)] = values[cell(p)] - lambda * (fl[p + 1] - fl[p]);
        }
    }
    out
}

/// Frozen nonlocal data for one step.
#[derive(Debug, Clone)]
pub(crate) struct Frozen {
    pub convs: Vec<ConvField>,
    pub fields: Vec<TransportField>,
}

/// Stateful driver holding the precomputed stencils of a model.
#[derive(Debug, Clone)]
pub struct Solver {
    model: ModelSpec,
    mask: Option<DomainMask>,
    room: Option<Vec<bool>>,
    cfg: SolverConfig,
    stencils: Vec<Stencil>,
    peaks: Vec<Option<f64>>,
    edge_band: usize,
}

/// Result of one step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    pub dt: f64,
    pub clamped_mass: f64,
    pub picard: Option<PicardRecord>,
}

impl Solver {
    pub fn new(model: ModelSpec, mask: Option<DomainMask>, cfg: SolverConfig) -> Result<Self> {
        model.validate()?;
        cfg.validate()?;
        let grid = *model.grid();
        if let Some(m) = &mask {
            grid.check_same(m.grid())?;
        }
        let stencils = model
            .populations
            .iter()
            .map(|p| Stencil::new(&grid, &p.kernel))
            .collect::<Result<Vec<_>>>()?;
        let edge_band = stencils
            .iter()
            .map(|s| s.reach()[0].max(s.reach()[1]))
            .max()
            .unwrap_or(1);
        let peaks = model.populations.iter().map(|p| p.law.flux_peak()).collect();
        Ok(Solver {
            model,
            mask,
            room: None,
            cfg,
            stencils,
            peaks,
            edge_band,
        })
    }

    pub fn with_room(mut self, room: Option<Vec<bool>>) -> Self {
        self.room = room;
        self
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn mask(&self) -> Option<&DomainMask> {
        self.mask.as_ref()
    }

    pub fn grid(&self) -> &Grid {
        self.model.grid()
    }

    pub(crate) fn stencil(&self, i: usize) -> &Stencil {
        &self.stencils[i]
    }

    pub(crate) fn walkable(&self) -> Option<&[bool]> {
        self.mask.as_ref().map(|m| m.walkable())
    }

    fn check_state(&self, state: &State) -> Result<()> {
        if state.densities.len() != self.model.populations.len() {
            return Err(Error::InvalidModel(format!(
                "{} densities for {} populations",
                state.densities.len(),
                self.model.populations.len()
            )));
        }
        for d in &state.densities {
            self.grid().check_same(d.grid())?;
        }
        Ok(())
    }

    /// Convolutions of the given densities and the resulting frozen transport.
    pub(crate) fn freeze(&self, densities: &[&[f64]], agents: &[AgentState]) -> Result<Frozen> {
        let with_gradient = self.model.needs_gradient();
        let convs: Vec<ConvField> = densities
            .iter()
            .zip(&self.stencils)
            .map(|(d, s)| s.apply(d, with_gradient))
            .collect();
        let fields = (0..self.model.populations.len())
            .map(|i| transport_field(&self.model, i, &convs, agents))
            .collect::<Result<Vec<_>>>()?;
        Ok(Frozen { convs, fields })
    }

    /// Stable step for the frozen data: `cfl·h / max characteristic speed`.
    pub(crate) fn stable_dt(&self, frozen: &Frozen, densities: &[DensityField]) -> f64 {
        let speeds: Vec<[f64; 2]> = frozen
            .fields
            .iter()
            .zip(densities)
            .map(|(f, d)| f.wave_speed(d.sup()))
            .collect();
        cfl_dt(&speeds, self.grid(), self.cfg.cfl, f64::INFINITY)
    }

    fn courant(&self, frozen: &Frozen, densities: &[DensityField], dt: f64) -> f64 {
        let g = self.grid();
        frozen
            .fields
            .iter()
            .zip(densities)
            .map(|(f, d)| {
                let s = f.wave_speed(d.sup());
                dt * (s[0] / g.dx).max(s[1] / g.dy)
            })
            .fold(0.0, f64::max)
    }

    /// Split update of one population with frozen transport.
    pub(crate) fn transport(&self, i: usize, values: &[f64], field: &TransportField, dt: f64) -> Vec<f64> {
        let g = *self.grid();
        let walk = self.walkable();
        let (comp_x, comp_y, flux) = match field {
            TransportField::Linear(a) => (&a.u, &a.v, SweepFlux::Linear),
            TransportField::Local { direction, law } => (
                &direction.u,
                &direction.v,
                SweepFlux::Local {
                    law,
                    peak: self.peaks[i],
                    scheme: self.cfg.flux,
                },
            ),
        };
        let fx = face_velocities(comp_x, &g, walk, self.cfg.wall_clip, true);
        let half = sweep(values, &g, &fx, flux, dt / g.dx, true);
        let fy = face_velocities(comp_y, &g, walk, self.cfg.wall_clip, false);
        sweep(&half, &g, &fy, flux, dt / g.dy, false)
    }

    fn apply_frozen(&self, state: &State, frozen: &Frozen, dt: f64) -> Result<(Vec<Vec<f64>>, Vec<AgentState>)> {
        let next: Vec<Vec<f64>> = state
            .densities
            .iter()
            .enumerate()
            .map(|(i, d)| self.transport(i, d.values(), &frozen.fields[i], dt))
            .collect();
        let agents = if state.agents.is_empty() {
            Vec::new()
        } else {
            let crowd = &frozen.convs[0];
            advance_agents(&state.agents, state.t, dt, |_, x| crowd.sample(x))
        };
        Ok((next, agents))
    }

    /// One step with the given `dt`.
    pub fn step(&self, state: &State, dt: f64) -> Result<StepOutcome> {
        self.check_state(state)?;
        let views: Vec<&[f64]> = state.densities.iter().map(|d| d.values()).collect();
        let frozen = self.freeze(&views, &state.agents)?;
        self.step_frozen(state, frozen, dt)
    }

    fn step_frozen(&self, state: &State, frozen: Frozen, dt: f64) -> Result<StepOutcome> {
        let c = self.courant(&frozen, &state.densities, dt);
        if c > MAX_CFL * (1.0 + 1e-9) {
            let limit = dt * MAX_CFL / c;
            return Err(Error::CflViolation { dt, limit });
        }
        let (mut next, mut agents) = self.apply_frozen(state, &frozen, dt)?;
        let mut record = None;
        if let NonlocalUpdate::Picard { tol, max_iter } = self.cfg.nonlocal_update {
            let mut rec = PicardRecord {
                t: state.t,
                changes: Vec::new(),
                factors: Vec::new(),
            };
            let area = self.grid().cell_area();
            let mut streak = 0;
            for _ in 0..max_iter {
                let mids: Vec<Vec<f64>> = state
                    .densities
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| a.values().iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect())
                    .collect();
                let views: Vec<&[f64]> = mids.iter().map(|m| m.as_slice()).collect();
                let frozen_k = self.freeze(&views, &state.agents)?;
                let (cand, cand_agents) = self.apply_frozen(state, &frozen_k, dt)?;
                let change: f64 = cand
                    .iter()
                    .zip(&next)
                    .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
                    .sum::<f64>()
                    * area;
                if let Some(&prev) = rec.changes.last() {
                    let factor = if prev > 0.0 { change / prev } else { 0.0 };
                    rec.factors.push(factor);
                    if factor >= 1.0 && change > tol {
                        streak += 1;
                        if streak >= 3 {
                            return Err(Error::PicardDiverged {
                                t: state.t,
                                factors: rec.factors,
                            });
                        }
                    } else {
                        streak = 0;
                    }
                }
                rec.changes.push(change);
                next = cand;
                agents = cand_agents;
                if change < tol {
                    break;
                }
            }
            record = Some(rec);
        }
        let t = state.t + dt;
        let mut clamped = 0.0;
        let area = self.grid().cell_area();
        let mut densities = Vec::with_capacity(next.len());
        for (pop, mut vals) in next.into_iter().enumerate() {
            for v in vals.iter_mut() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        t,
                        population: pop,
                        last_good: Box::new(state.densities[pop].clone()),
                    });
                }
                if *v < 0.0 {
                    clamped += -*v * area;
                    *v = 0.0;
                }
            }
            densities.push(DensityField {
                grid: *self.grid(),
                values: vals,
            });
        }
        Ok(StepOutcome {
            state: State { t, densities, agents },
            dt,
            clamped_mass: clamped,
            picard: record,
        })
    }

    /// Step with an automatically chosen `dt`, never overshooting `t_target`.
    pub fn advance(&self, state: &State, t_target: f64) -> Result<StepOutcome> {
        self.check_state(state)?;
        let views: Vec<&[f64]> = state.densities.iter().map(|d| d.values()).collect();
        let frozen = self.freeze(&views, &state.agents)?;
        let mut dt = match self.cfg.dt_fixed {
            Some(dt) => dt,
            None => self.stable_dt(&frozen, &state.densities).min(self.cfg.dt_max),
        };
        let remaining = t_target - state.t;
        if dt >= remaining * (1.0 - 1e-12) {
            dt = remaining;
        } else if self.cfg.dt_fixed.is_none() && dt > 0.5 * remaining {
            // split the last stretch evenly rather than leaving a sliver
            dt = 0.5 * remaining;
        }
        self.step_frozen(state, frozen, dt)
    }

    fn edge_violation(&self, state: &State, initial_mass: &[f64]) -> Option<(usize, f64)> {
        let tol = self.cfg.edge_tolerance?;
        let g = self.grid();
        for (pop, d) in state.densities.iter().enumerate() {
            if initial_mass[pop] <= 0.0 {
                continue;
            }
            let mut edge = 0.0;
            for j in 0..g.ny {
                let band_row = j < self.edge_band || j + self.edge_band >= g.ny;
                for i in 0..g.nx {
                    if band_row || i < self.edge_band || i + self.edge_band >= g.nx {
                        edge += d.values[g.idx(i, j)];
                    }
                }
            }
            let rel = edge * g.cell_area() / initial_mass[pop];
            if rel > tol {
                return Some((pop, rel));
            }
        }
        None
    }

    fn metric_rows(&self, state: &State, initial_room: &[f64]) -> Vec<MetricRow> {
        state
            .densities
            .iter()
            .enumerate()
            .map(|(pop, d)| {
                let support_ok = match &self.mask {
                    Some(m) => is_support_contained(d, m, 1e-10).unwrap_or(false),
                    None => true,
                };
                let evac_frac = match &self.room {
                    Some(room) if initial_room[pop] > 0.0 => {
                        let inside = room_mass(d, room);
                        (1.0 - inside / initial_room[pop]).max(0.0)
                    }
                    _ => 0.0,
                };
                MetricRow {
                    t: state.t,
                    pop,
                    mass: d.mass(),
                    linf: d.sup(),
                    tv: d.total_variation(),
                    support_ok,
                    evac_frac,
                }
            })
            .collect()
    }

    /// Advances `initial` to `t_end`, recording frames and metrics.
    pub fn run(&self, initial: State) -> Result<Trajectory> {
        self.check_state(&initial)?;
        let cfg = &self.cfg;
        let initial_mass: Vec<f64> = initial.densities.iter().map(|d| d.mass()).collect();
        let initial_room: Vec<f64> = match &self.room {
            Some(room) => initial.densities.iter().map(|d| room_mass(d, room)).collect(),
            None => vec![0.0; initial.densities.len()],
        };
        let mut targets: Vec<f64> = cfg
            .snapshot_times
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < cfg.t_end)
            .collect();
        targets.push(cfg.t_end);
        targets.sort_by(f64::total_cmp);
        targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let mut extremes: Vec<(f64, f64)> = initial
            .densities
            .iter()
            .map(|d| {
                let lo = d.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                (lo, d.sup())
            })
            .collect();
        let mut max_total = total_sup(&initial.densities);
        let mut traj = Trajectory {
            frames: Vec::new(),
            metrics: self.metric_rows(&initial, &initial_room),
            steps: Vec::new(),
            picard: Vec::new(),
            extremes: Vec::new(),
            max_total_density: 0.0,
            initial_mass: initial_mass.clone(),
            clamped_mass: 0.0,
        };
        traj.frames.push(Frame {
            step: 0,
            state: initial.clone(),
        });
        let mut state = initial;
        let mut step = 0usize;
        for &target in &targets {
            while state.t < target - 1e-12 {
                let out = self.advance(&state, target)?;
                step += 1;
                state = out.state;
                if (state.t - target).abs() < 1e-12 {
                    state.t = target;
                }
                traj.clamped_mass += out.clamped_mass;
                traj.steps.push(StepRecord {
                    t: state.t,
                    dt: out.dt,
                    clamped_mass: out.clamped_mass,
                    picard_sweeps: out.picard.as_ref().map_or(1, |p| p.changes.len()),
                });
                if let Some(p) = out.picard {
                    traj.picard.push(p);
                }
                for (e, d) in extremes.iter_mut().zip(&state.densities) {
                    let lo = d.values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                    e.0 = e.0.min(lo);
                    e.1 = e.1.max(d.sup());
                }
                max_total = max_total.max(total_sup(&state.densities));
                if let Some((population, edge_mass)) = self.edge_violation(&state, &initial_mass) {
                    return Err(Error::SupportAtEdge {
                        t: state.t,
                        population,
                        edge_mass,
                    });
                }
                let at_target = state.t >= target;
                if step % cfg.frame_stride == 0 || at_target {
                    traj.metrics.extend(self.metric_rows(&state, &initial_room));
                    if cfg.store_frames || at_target {
                        traj.frames.push(Frame {
                            step,
                            state: state.clone(),
                        });
                    }
                }
            }
        }
        traj.extremes = extremes;
        traj.max_total_density = max_total;
        Ok(traj)
    }
}

fn room_mass(d: &DensityField, room: &[bool]) -> f64 {
    d.values
        .iter()
        .zip(room)
        .filter(|(_, &r)| r)
        .map(|(v, _)| v)
        .sum::<f64>()
        * d.grid.cell_area()
}

fn total_sup(densities: &[DensityField]) -> f64 {
    let n = densities[0].values.len();
    (0..n)
        .map(|k| densities.iter().map(|d| d.values[k]).sum::<f64>())
        .fold(0.0, f64::max)
}

/// One step of `model` from `state` with the given `dt`.
pub fn step(
    state: &State,
    model: &ModelSpec,
    mask: Option<&DomainMask>,
    cfg: &SolverConfig,
    dt: f64,
) -> Result<State> {
    let solver = Solver::new(model.clone(), mask.cloned(), cfg.clone())?;
    Ok(solver.step(state, dt)?.state)
}

/// Runs a scenario to `cfg.t_end`.
pub fn run(scenario: &Scenario, model: &ModelSpec, cfg: &SolverConfig) -> Result<Trajectory> {
    let solver = Solver::new(model.clone(), scenario.mask.clone(), cfg.clone())?
        .with_room(scenario.room.clone());
    let initial = State {
        t: 0.0,
        densities: scenario.initial.clone(),
        agents: model.agents.clone(),
    };
    solver.run(initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VectorField;
    use crate::kernels::{make_mollifier, KernelProfile};
    use crate::models::{ModelKind, Population};

    fn panic_model(g: Grid, nu: [f64; 2], law: SpeedLaw, r: f64) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Panic,
            populations: vec![Population {
                name: "crowd".into(),
                nu: VectorField::constant(g, nu),
                kernel: make_mollifier(r, KernelProfile::Triweight).unwrap(),
                law,
            }],
            agents: vec![],
        }
    }

    fn state(d: DensityField) -> State {
        State {
            t: 0.0,
            densities: vec![d],
            agents: vec![],
        }
    }

    #[test]
    fn cfl_formula() {
        let g = Grid::new(10, 10, 0.1, 0.1, [0.0, 0.0]).unwrap();
        assert!((cfl_dt(&[[2.0, 1.0]], &g, 0.5, 1.0) - 0.025).abs() < 1e-15);
        assert_eq!(cfl_dt(&[[0.0, 0.0]], &g, 0.5, 0.3), 0.3);
        let g2 = Grid::new(10, 10, 0.05, 0.05, [0.0, 0.0]).unwrap();
        assert!((cfl_dt(&[[2.0, 0.0]], &g2, 0.5, 1.0) * 2.0 - cfl_dt(&[[2.0, 0.0]], &g, 0.5, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_is_a_fixed_point_and_mass_is_conserved() {
        let g = Grid::new(40, 40, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let m = panic_model(g, [0.6, 0.8], SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.1 }, 0.3);
        let cfg = SolverConfig::default();
        let zero = step(&state(DensityField::zeros(g)), &m, None, &cfg, 0.02).unwrap();
        assert!(zero.densities[0].values().iter().all(|&v| v == 0.0));
        let rho = DensityField::from_fn(g, |x| {
            let d2 = (x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2);
            if d2 < 0.8 { 1.5 } else { 0.0 }
        });
        let m0 = rho.mass();
        let s = step(&state(rho), &m, None, &cfg, 0.04).unwrap();
        assert!((s.densities[0].mass() - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn translation_error_is_first_order() {
        // 1D-uniform setup: profile in x, constant in y over the whole grid.
        let errs: Vec<f64> = [100usize, 200, 400]
            .iter()
            .map(|&n| {
                let h = 4.0 / n as f64;
                let g = Grid::new(n, 4, h, 1.0, [0.0, 0.0]).unwrap();
                let profile = |x: f64| (-(x - 1.5f64).powi(2) / 0.1).exp();
                let rho = DensityField::from_fn(g, |x| profile(x[0]));
                let m = panic_model(g, [1.0, 0.0], SpeedLaw::Constant { speed: 1.0 }, 1.0);
                let cfg = SolverConfig {
                    t_end: 1.0,
                    edge_tolerance: None,
                    store_frames: false,
                    ..SolverConfig::default()
                };
                let tr = Solver::new(m, None, cfg).unwrap().run(state(rho)).unwrap();
                let exact = DensityField::from_fn(g, |x| profile(x[0] - 1.0));
                tr.last().densities[0].l1_distance(&exact).unwrap()
            })
            .collect();
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        assert!(order1 > 0.7 && order2 > 0.7, "{errs:?}");
    }

    #[test]
    fn orderly_godunov_keeps_unit_state() {
        let g = Grid::new(30, 30, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let model = ModelSpec {
            kind: ModelKind::Orderly { eps: 1.0 },
            populations: vec![Population {
                name: "crowd".into(),
                nu: VectorField::from_fn(g, |x| [x[1].cos(), x[0].sin()]),
                kernel: make_mollifier(0.35, KernelProfile::Triweight).unwrap(),
                law: SpeedLaw::LwrOrderly { v_max: 1.0 },
            }],
            agents: vec![],
        };
        let rho = DensityField::from_fn(g, |x| if (x[0] - 1.5).abs() < 0.6 && (x[1] - 1.5).abs() < 0.6 { 1.0 } else { 0.0 });
        let cfg = SolverConfig { t_end: 0.5, edge_tolerance: None, ..SolverConfig::default() };
        let tr = Solver::new(model, None, cfg).unwrap().run(state(rho)).unwrap();
        let (lo, hi) = tr.extremes[0];
        assert!(lo >= 0.0 && hi <= 1.0 + 1e-12, "{lo} {hi}");
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = Grid::new(20, 20, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let m = panic_model(g, [1.0, 0.0], SpeedLaw::Constant { speed: 2.0 }, 0.3);
        let rho = DensityField::from_fn(g, |x| if (x[0] - 1.0).abs() < 0.3 { 1.0 } else { 0.0 });
        let err = step(&state(rho), &m, None, &SolverConfig::default(), 0.1).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn edge_contact_aborts() {
        let g = Grid::new(30, 10, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let m = panic_model(g, [1.0, 0.0], SpeedLaw::Constant { speed: 1.0 }, 0.2);
        let rho = DensityField::from_fn(g, |x| if (x[0] - 1.5).abs() < 0.3 && (x[1] - 0.5).abs() < 0.1 { 1.0 } else { 0.0 });
        let cfg = SolverConfig { t_end: 3.0, ..SolverConfig::default() };
        let err = Solver::new(m, None, cfg).unwrap().run(state(rho)).unwrap_err();
        assert!(matches!(err, Error::SupportAtEdge { .. }), "{err:?}");
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SolverConfig { cfl: 0.6, ..SolverConfig::default() },
            SolverConfig { frame_stride: 0, ..SolverConfig::default() },
            SolverConfig { t_end: -1.0, ..SolverConfig::default() },
            SolverConfig {
                nonlocal_update: NonlocalUpdate::Picard { tol: 0.0, max_iter: 3 },
                ..SolverConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert!(DensityField::new(Grid::new(3, 3, 1.0, 1.0, [0.0, 0.0]).unwrap(), vec![-1.0; 9]).is_err());
    }

    #[test]
    fn walls_block_inflow() {
        let g = Grid::new(20, 20, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let walkable: Vec<bool> = (0..g.len()).map(|k| { let (i, j) = g.ij(k); (4..16).contains(&i) && (4..16).contains(&j) }).collect();
        let mask = DomainMask::new(g, walkable.clone(), vec![]).unwrap();
        let m = panic_model(g, [1.0, 0.3], SpeedLaw::Constant { speed: 1.0 }, 0.3);
        let rho = DensityField::from_fn(g, |x| if (x[0] - 1.0).abs() < 0.4 && (x[1] - 1.0).abs() < 0.4 { 0.8 } else { 0.0 });
        let cfg = SolverConfig { t_end: 2.0, ..SolverConfig::default() };
        let tr = Solver::new(m, Some(mask.clone()), cfg).unwrap().run(state(rho.clone())).unwrap();
        for f in &tr.frames {
            assert!(is_support_contained(&f.state.densities[0], &mask, 0.0).unwrap());
        }
        assert!((tr.last().densities[0].mass() - rho.mass()).abs() < 1e-12 * rho.mass());
    }
}
