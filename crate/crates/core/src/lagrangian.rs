//! Particle solver: weighted particles carried by the ODE flow of the nonlocal velocity, with the
//! convolution evaluated exactly from the particles.

use crate::error::{Error, Result};
use crate::fv_solver::DensityField;
use crate::geometry::{Grid, Point, VectorField};
use crate::kernels::{Kernel, ParticleIndex};
use crate::models::{advance_agents, AgentState, ModelKind, ModelSpec, SpeedLaw};

/// Weighted particles representing a positive measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<Point>,
    weights: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::InvalidDensity(format!(
                "{} positions but {} weights",
                positions.len(),
                weights.len()
            )));
        }
        if positions.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidDensity("particle weights must be positive".into()));
        }
        if positions.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidDensity("particle positions must be finite".into()));
        }
        Ok(ParticleEnsemble { positions, weights })
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same weights at new positions.
    pub fn moved(&self, positions: Vec<Point>) -> Self {
        assert_eq!(positions.len(), self.weights.len(), "particle count changed");
        ParticleEnsemble {
            positions,
            weights: self.weights.clone(),
        }
    }
}

/// Initial measure: explicit atoms or a grid density.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Atoms(Vec<(Point, f64)>),
    Grid(DensityField),
}

/// Deterministic stratified sampling.
///
/// Atoms are taken verbatim. A grid density's support bounding box is split into about `n`
/// rectangular cell blocks; each block with mass becomes one particle at its centre of mass.
pub fn sample_particles(spec: &MeasureSpec, n: usize) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::InvalidDensity("need at least one particle".into()));
    }
    match spec {
        MeasureSpec::Atoms(atoms) => {
            let atoms: Vec<&(Point, f64)> = atoms.iter().filter(|a| a.1 > 0.0).collect();
            if atoms.is_empty() {
                return Err(Error::EmptyMeasure);
            }
            ParticleEnsemble::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1).collect())
        }
        MeasureSpec::Grid(rho) => {
            let g = rho.grid();
            let vals = rho.values();
            let occupied: Vec<usize> = (0..g.len()).filter(|&k| vals[k] > 0.0).collect();
            if occupied.is_empty() {
                return Err(Error::EmptyMeasure);
            }
            let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
            for &k in &occupied {
                let (i, j) = g.ij(k);
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
            let (w, h) = (i1 - i0 + 1, j1 - j0 + 1);
            let kx = ((n as f64 * w as f64 / h as f64).sqrt().round() as usize).clamp(1, w);
            let ky = ((n as f64 / kx as f64).round() as usize).clamp(1, h);
            let edges = |count: usize, len: usize| -> Vec<usize> {
                (0..=count).map(|b| (b * len + count / 2) / count).collect()
            };
            let (ex, ey) = (edges(kx, w), edges(ky, h));
            let area = g.cell_area();
            let mut pos = Vec::new();
            let mut wts = Vec::new();
            for by in 0..ky {
                for bx in 0..kx {
                    let (mut m, mut mx, mut my) = (0.0, 0.0, 0.0);
                    for j in j0 + ey[by]..j0 + ey[by + 1] {
                        for i in i0 + ex[bx]..i0 + ex[bx + 1] {
                            let q = vals[g.idx(i, j)] * area;
                            if q > 0.0 {
                                let c = g.center(i, j);
                                m += q;
                                mx += q * c[0];
                                my += q * c[1];
                            }
                        }
                    }
                    if m > 0.0 {
                        pos.push([mx / m, my / m]);
                        wts.push(m);
                    }
                }
            }
            ParticleEnsemble::new(pos, wts)
        }
    }
}

/// `T♯μ`: positions mapped, weights kept.
pub fn push_forward(p: &ParticleEnsemble, map: impl Fn(Point) -> Point) -> ParticleEnsemble {
    p.moved(p.positions.iter().map(|&x| map(x)).collect())
}

/// Mass-conserving binning of particles into grid cells (density = cell mass / cell area).
pub fn rasterize(p: &ParticleEnsemble, grid: &Grid) -> Result<DensityField> {
    let mut vals = vec![0.0; grid.len()];
    let area = grid.cell_area();
    for (x, w) in p.positions.iter().zip(&p.weights) {
        let (i, j) = grid
            .locate(*x)
            .ok_or_else(|| Error::InvalidGrid(format!("particle at {x:?} lies outside the grid")))?;
        vals[grid.idx(i, j)] += w / area;
    }
    DensityField::new(*grid, vals)
}

/// Positions of the tracked particles at time `t`; the identity at `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub t: f64,
    pub initial: Vec<Point>,
    pub current: Vec<Point>,
}

impl FlowMap {
    pub fn identity(p: &ParticleEnsemble) -> Self {
        FlowMap {
            t: 0.0,
            initial: p.positions.clone(),
            current: p.positions.clone(),
        }
    }

    /// Image of the `k`-th initial position.
    pub fn image(&self, k: usize) -> Point {
        self.current[k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianConfig {
    pub t_end: f64,
    /// Fixed step; defaults to `min_i 0.1 R_i / ‖V_i‖_∞`.
    pub dt: Option<f64>,
    pub frame_stride: usize,
}

impl Default for LagrangianConfig {
    fn default() -> Self {
        LagrangianConfig {
            t_end: 1.0,
            dt: None,
            frame_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleFrame {
    pub t: f64,
    pub ensembles: Vec<ParticleEnsemble>,
    pub agents: Vec<AgentState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianTrajectory {
    pub frames: Vec<ParticleFrame>,
    pub dt: f64,
}

impl LagrangianTrajectory {
    pub fn last(&self) -> &ParticleFrame {
        self.frames.last().expect("trajectory has at least one frame")
    }

    /// Flow map of population `pop` at the last frame.
    pub fn flow_map(&self, pop: usize) -> FlowMap {
        FlowMap {
            t: self.last().t,
            initial: self.frames[0].ensembles[pop].positions.clone(),
            current: self.last().ensembles[pop].positions.clone(),
        }
    }
}

fn check_supported(model: &ModelSpec) -> Result<()> {
    match model.kind {
        ModelKind::Panic | ModelKind::MultiPanic => Ok(()),
        other => Err(Error::Unsupported(format!(
            "the particle solver handles panic-type models only, not {other:?}: the other fluxes depend on the pointwise density"
        ))),
    }
}

/// Velocities of every particle of every population for the given positions.
fn velocities(model: &ModelSpec, positions: &[Vec<Point>], weights: &[&[f64]]) -> (Vec<Vec<[f64; 2]>>, Vec<ParticleIndex>) {
    let indices: Vec<ParticleIndex> = model
        .populations
        .iter()
        .zip(positions.iter().zip(weights))
        .map(|(p, (x, w))| ParticleIndex::new(x, w, &p.kernel))
        .collect();
    let vel = model
        .populations
        .iter()
        .zip(positions)
        .map(|(pop, xs)| {
            xs.iter()
                .map(|&x| {
                    let c: f64 = indices.iter().map(|ix| ix.query(x).0).sum();
                    let s = pop.law.eval(c);
                    let nu = pop.nu.sample(x);
                    [s * nu[0], s * nu[1]]
                })
                .collect()
        })
        .collect();
    (vel, indices)
}

fn crowd_lookup(indices: &[ParticleIndex], x: Point) -> (f64, [f64; 2]) {
    indices.iter().fold((0.0, [0.0, 0.0]), |acc, ix| {
        let (v, g) = ix.query(x);
        (acc.0 + v, [acc.1[0] + g[0], acc.1[1] + g[1]])
    })
}

/// RK4 step of every particle and agent; weights are untouched.
pub fn lagrangian_step(
    ensembles: &[ParticleEnsemble],
    agents: &[AgentState],
    model: &ModelSpec,
    t: f64,
    dt: f64,
) -> Result<(Vec<ParticleEnsemble>, Vec<AgentState>)> {
    check_supported(model)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidSolverConfig(format!("dt must be > 0, got {dt}")));
    }
    if ensembles.len() != model.populations.len() {
        return Err(Error::InvalidModel(format!(
            "{} ensembles for {} populations",
            ensembles.len(),
            model.populations.len()
        )));
    }
    let weights: Vec<&[f64]> = ensembles.iter().map(|e| e.weights()).collect();
    let x0: Vec<Vec<Point>> = ensembles.iter().map(|e| e.positions.clone()).collect();
    let shift = |base: &[Vec<Point>], k: &[Vec<[f64; 2]>], h: f64| -> Vec<Vec<Point>> {
        base.iter()
            .zip(k)
            .map(|(xs, vs)| xs.iter().zip(vs).map(|(x, v)| [x[0] + h * v[0], x[1] + h * v[1]]).collect())
            .collect()
    };
    let (k1, i1) = velocities(model, &x0, &weights);
    let x2 = shift(&x0, &k1, 0.5 * dt);
    let (k2, i2) = velocities(model, &x2, &weights);
    let x3 = shift(&x0, &k2, 0.5 * dt);
    let (k3, i3) = velocities(model, &x3, &weights);
    let x4 = shift(&x0, &k3, dt);
    let (k4, i4) = velocities(model, &x4, &weights);

    let mut next = Vec::with_capacity(ensembles.len());
    for (p, e) in ensembles.iter().enumerate() {
        let mut pos = Vec::with_capacity(e.len());
        for n in 0..e.len() {
            let x = x0[p][n];
            let v = [
                (k1[p][n][0] + 2.0 * k2[p][n][0] + 2.0 * k3[p][n][0] + k4[p][n][0]) / 6.0,
                (k1[p][n][1] + 2.0 * k2[p][n][1] + 2.0 * k3[p][n][1] + k4[p][n][1]) / 6.0,
            ];
            let y = [x[0] + dt * v[0], x[1] + dt * v[1]];
            if !(y[0].is_finite() && y[1].is_finite()) {
                return Err(Error::NonFinite {
                    t: t + dt,
                    population: p,
                    last_good: Box::new(DensityField::zeros(*model.grid())),
                });
            }
            pos.push(y);
        }
        next.push(e.moved(pos));
    }
    // Agents see the crowd at the RK4 stage times: t, t + dt/2 (twice), t + dt.
    let stage = [&i1, &i2, &i3, &i4];
    let mut calls = 0usize;
    let new_agents = advance_agents(agents, t, dt, |_, x| {
        let idx = stage[calls.min(3)];
        calls += 1;
        crowd_lookup(idx, x)
    });
    Ok((next, new_agents))
}

/// A-priori step `min_i 0.1 R_i / ‖V_i‖_∞`.
pub fn default_dt(model: &ModelSpec) -> f64 {
    model
        .populations
        .iter()
        .map(|p| {
            let vmax = p.law.sup_norm() * p.nu.sup_norm();
            0.1 * p.kernel.radius() / vmax.max(1e-12)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Time loop of [`lagrangian_step`], recording frames every `frame_stride` steps and at the end.
pub fn run_lagrangian(
    initial: Vec<ParticleEnsemble>,
    model: &ModelSpec,
    cfg: &LagrangianConfig,
) -> Result<LagrangianTrajectory> {
    check_supported(model)?;
    model.validate()?;
    if cfg.frame_stride == 0 || !(cfg.t_end >= 0.0) {
        return Err(Error::InvalidSolverConfig("need frame_stride >= 1 and t_end >= 0".into()));
    }
    let dt = cfg.dt.unwrap_or_else(|| default_dt(model));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidSolverConfig(format!("bad particle time step {dt}")));
    }
    let mut frame = ParticleFrame {
        t: 0.0,
        ensembles: initial,
        agents: model.agents.clone(),
    };
    let mut traj = LagrangianTrajectory {
        frames: vec![frame.clone()],
        dt,
    };
    let steps = (cfg.t_end / dt - 1e-9).ceil().max(0.0) as usize;
    for s in 0..steps {
        let h = (cfg.t_end - frame.t).min(dt);
        let (ens, agents) = lagrangian_step(&frame.ensembles, &frame.agents, model, frame.t, h)?;
        frame = ParticleFrame {
            t: if s + 1 == steps { cfg.t_end } else { frame.t + h },
            ensembles: ens,
            agents,
        };
        if (s + 1) % cfg.frame_stride == 0 || s + 1 == steps {
            traj.frames.push(frame.clone());
        }
    }
    Ok(traj)
}

/// Velocity law `V(x, r) = v(r) ν(x)` driven by a prescribed measure path.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivenVelocity {
    pub nu: VectorField,
    pub law: SpeedLaw,
    pub kernel: Kernel,
}

impl DrivenVelocity {
    /// `Lip_x(V) ≤ ‖v‖_∞ Lip(ν)`.
    pub fn lip_x(&self) -> f64 {
        self.law.sup_norm() * self.nu.lipschitz_bound()
    }

    /// `Lip_r(V) ≤ Lip(v) ‖ν‖_∞`.
    pub fn lip_r(&self) -> f64 {
        self.law.lipschitz() * self.nu.sup_norm()
    }
}

/// Time-dependent measure used to drive a transport.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasurePath {
    Static(ParticleEnsemble),
    /// `base` translated by `velocity · t`.
    Translating { base: ParticleEnsemble, velocity: [f64; 2] },
    /// Same particles at increasing times; positions interpolate linearly in between.
    Sampled { times: Vec<f64>, frames: Vec<ParticleEnsemble> },
}

impl MeasurePath {
    pub fn at(&self, t: f64) -> ParticleEnsemble {
        match self {
            MeasurePath::Static(p) => p.clone(),
            MeasurePath::Translating { base, velocity } => {
                push_forward(base, |x| [x[0] + velocity[0] * t, x[1] + velocity[1] * t])
            }
            MeasurePath::Sampled { times, frames } => {
                let k = times.partition_point(|&s| s <= t);
                if k == 0 {
                    return frames[0].clone();
                }
                if k >= times.len() {
                    return frames[frames.len() - 1].clone();
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let s = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
                let (a, b) = (&frames[k - 1], &frames[k]);
                a.moved(
                    a.positions
                        .iter()
                        .zip(&b.positions)
                        .map(|(p, q)| [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])])
                        .collect(),
                )
            }
        }
    }
}

/// Transports `initial` along `dX/dt = v(r_t*η(X)) ν(X)` with RK4 for `t_end`, returning the
/// path sampled at the step times.
pub fn transport_driven(
    initial: &ParticleEnsemble,
    path: &MeasurePath,
    vel: &DrivenVelocity,
    t_end: f64,
    dt: f64,
) -> Result<MeasurePath> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidSolverConfig("need dt > 0 and t_end >= 0".into()));
    }
    let field = |t: f64, xs: &[Point]| -> Vec<[f64; 2]> {
        let r = path.at(t);
        let idx = ParticleIndex::from_ensemble(&r, &vel.kernel);
        xs.iter()
            .map(|&x| {
                let s = vel.law.eval(idx.query(x).0);
                let n = vel.nu.sample(x);
                [s * n[0], s * n[1]]
            })
            .collect()
    };
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut times = vec![0.0];
    let mut frames = vec![initial.clone()];
    let mut x = initial.positions.clone();
    let mut t = 0.0;
    for s in 0..steps {
        let h = (t_end - t).min(dt);
        let add = |base: &[Point], k: &[[f64; 2]], a: f64| -> Vec<Point> {
            base.iter().zip(k).map(|(p, v)| [p[0] + a * v[0], p[1] + a * v[1]]).collect()
        };
        let k1 = field(t, &x);
        let k2 = field(t + 0.5 * h, &add(&x, &k1, 0.5 * h));
        let k3 = field(t + 0.5 * h, &add(&x, &k2, 0.5 * h));
        let k4 = field(t + h, &add(&x, &k3, h));
        for n in 0..x.len() {
            for c in 0..2 {
                x[n][c] += h * (k1[n][c] + 2.0 * k2[n][c] + 2.0 * k3[n][c] + k4[n][c]) / 6.0;
            }
        }
        t = if s + 1 == steps { t_end } else { t + h };
        times.push(t);
        frames.push(initial.moved(x.clone()));
    }
    Ok(MeasurePath::Sampled { times, frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{eval_convolution_at, make_mollifier, KernelProfile};
    use crate::models::{AgentKind, Population, Steering};

    fn grid() -> Grid {
        Grid::new(40, 40, 0.25, 0.25, [0.0, 0.0]).unwrap()
    }

    fn panic_model(nu: VectorField, law: SpeedLaw, r: f64) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Panic,
            populations: vec![Population {
                name: "crowd".into(),
                nu,
                kernel: make_mollifier(r, KernelProfile::Triweight).unwrap(),
                law,
            }],
            agents: vec![],
        }
    }

    #[test]
    fn sampling_rules() {
        let one = sample_particles(&MeasureSpec::Atoms(vec![([1.0, 2.0], 0.7)]), 5).unwrap();
        assert_eq!(one.positions(), &[[1.0, 2.0]]);
        assert_eq!(one.weights(), &[0.7]);
        let g = Grid::new(40, 40, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let sq = DensityField::new(g, vec![1.0; g.len()]).unwrap();
        let p = sample_particles(&MeasureSpec::Grid(sq.clone()), 16).unwrap();
        assert_eq!(p.len(), 16);
        assert!(p.weights().iter().all(|w| (w - p.weights()[0]).abs() < 1e-15));
        let mut xs: Vec<f64> = p.positions().iter().map(|x| x[0]).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(xs.len(), 4);
        let blob = DensityField::from_fn(g, |x| (-((x[0] - 2.0).powi(2) + (x[1] - 2.0).powi(2)) * 4.0).exp());
        let p = sample_particles(&MeasureSpec::Grid(blob.clone()), 10_000).unwrap();
        assert!((p.mass() - blob.mass()).abs() < 1e-12);
        assert!(matches!(
            sample_particles(&MeasureSpec::Grid(DensityField::zeros(g)), 4),
            Err(Error::EmptyMeasure)
        ));
    }

    #[test]
    fn constant_velocity_translates_exactly() {
        let g = grid();
        let model = panic_model(VectorField::constant(g, [0.3, -0.2]), SpeedLaw::Constant { speed: 2.0 }, 0.5);
        let p = ParticleEnsemble::new(vec![[3.0, 4.0], [5.0, 5.5], [3.2, 4.1]], vec![0.2, 0.3, 0.5]).unwrap();
        let (next, _) = lagrangian_step(&[p.clone()], &[], &model, 0.0, 0.1).unwrap();
        for (a, b) in p.positions().iter().zip(next[0].positions()) {
            assert!((b[0] - a[0] - 0.06).abs() < 1e-15 && (b[1] - a[1] + 0.04).abs() < 1e-15);
        }
        assert_eq!(next[0].weights(), p.weights());
    }

    #[test]
    fn dirac_population_reproduces_agent_coupling() {
        let g = grid();
        let k1 = make_mollifier(0.8, KernelProfile::Triweight).unwrap();
        let k2 = make_mollifier(0.5, KernelProfile::Triweight).unwrap();
        let law = SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.1 };
        let nu1 = VectorField::constant(g, [1.0, 0.0]);
        let nu2 = VectorField::from_fn(g, |x| {
            let a = 0.3 * x[0] - 0.2 * x[1];
            [a.cos(), a.sin()]
        });
        let model = ModelSpec {
            kind: ModelKind::MultiPanic,
            populations: vec![
                Population { name: "crowd".into(), nu: nu1, kernel: k1, law },
                Population { name: "agent".into(), nu: nu2.clone(), kernel: k2, law },
            ],
            agents: vec![],
        };
        let crowd = ParticleEnsemble::new(
            (0..50).map(|n| [4.0 + 0.03 * n as f64, 5.0 + 0.01 * (n % 7) as f64]).collect(),
            vec![0.02; 50],
        )
        .unwrap();
        let p = [4.6, 5.05];
        let agent = ParticleEnsemble::new(vec![p], vec![1.0]).unwrap();
        let (vel, _) = velocities(
            &model,
            &[crowd.positions().to_vec(), agent.positions().to_vec()],
            &[crowd.weights(), agent.weights()],
        );
        let c = eval_convolution_at(&crowd, &k1, p) + k2.eval([0.0, 0.0]);
        let s = law.eval(c);
        let n = nu2.sample(p);
        assert!((vel[1][0][0] - s * n[0]).abs() < 1e-12);
        assert!((vel[1][0][1] - s * n[1]).abs() < 1e-12);
    }

    #[test]
    fn single_particle_follows_the_field() {
        // tiny kernel and a lone particle: pure transport along nu with v(η(0) w)
        let g = grid();
        let nu = VectorField::from_fn(g, |x| [-(x[1] - 5.0) * 0.2, (x[0] - 5.0) * 0.2]);
        let law = SpeedLaw::Constant { speed: 1.0 };
        let model = panic_model(nu.clone(), law, 0.3);
        let p = ParticleEnsemble::new(vec![[6.0, 5.0]], vec![1.0]).unwrap();
        let cfg = LagrangianConfig { t_end: 2.0, dt: Some(0.02), frame_stride: 100 };
        let traj = run_lagrangian(vec![p.clone()], &model, &cfg).unwrap();
        // reference: RK4 at dt/100 on the same bilinear field
        let mut x = [6.0, 5.0];
        let h = 0.0002;
        let f = |y: Point| nu.sample(y);
        for _ in 0..10_000 {
            let a = f(x);
            let b = f([x[0] + 0.5 * h * a[0], x[1] + 0.5 * h * a[1]]);
            let c = f([x[0] + 0.5 * h * b[0], x[1] + 0.5 * h * b[1]]);
            let d = f([x[0] + h * c[0], x[1] + h * c[1]]);
            x[0] += h * (a[0] + 2.0 * b[0] + 2.0 * c[0] + d[0]) / 6.0;
            x[1] += h * (a[1] + 2.0 * b[1] + 2.0 * c[1] + d[1]) / 6.0;
        }
        let y = traj.last().ensembles[0].positions()[0];
        assert!((y[0] - x[0]).abs() < 1e-10 && (y[1] - x[1]).abs() < 1e-10, "{y:?} vs {x:?}");
    }

    #[test]
    fn mass_and_determinism() {
        let g = grid();
        let model = panic_model(
            VectorField::from_fn(g, |x| { let d = [5.0 - x[0], 5.0 - x[1]]; let n = d[0].hypot(d[1]).max(1.0); [d[0] / n, d[1] / n] }),
            SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.1 },
            0.6,
        );
        let rho = DensityField::from_fn(g, |x| 2.0 * (-((x[0] - 4.0).powi(2) + (x[1] - 5.5).powi(2))).exp() * f64::from(((x[0] - 4.0).powi(2) + (x[1] - 5.5).powi(2)) < 2.0));
        let p = sample_particles(&MeasureSpec::Grid(rho), 400).unwrap();
        let cfg = LagrangianConfig { t_end: 0.5, dt: None, frame_stride: 2 };
        let a = run_lagrangian(vec![p.clone()], &model, &cfg).unwrap();
        let b = run_lagrangian(vec![p.clone()], &model, &cfg).unwrap();
        assert_eq!(a, b);
        for f in &a.frames {
            assert_eq!(f.ensembles[0].weights(), p.weights());
        }
        assert!((a.last().t - 0.5).abs() < 1e-15);
        let fm = a.flow_map(0);
        assert_eq!(fm.initial, p.positions());
    }

    #[test]
    fn push_forward_identities() {
        let p = ParticleEnsemble::new(vec![[0.0, 1.0], [2.0, 3.0]], vec![0.25, 0.75]).unwrap();
        assert_eq!(push_forward(&p, |x| x), p);
        let q = push_forward(&p, |x| [2.0 * x[0] - x[1] + 1.0, 0.5 * x[1]]);
        let phi = |x: Point| x[0] * x[0] - 3.0 * x[1] + x[0] * x[1];
        let lhs: f64 = q.positions().iter().zip(q.weights()).map(|(x, w)| w * phi(*x)).sum();
        let rhs: f64 = p.positions().iter().zip(p.weights()).map(|(x, w)| w * phi([2.0 * x[0] - x[1] + 1.0, 0.5 * x[1]])).sum();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn orderly_is_unsupported_and_agents_ride_along() {
        let g = grid();
        let mut model = panic_model(VectorField::constant(g, [1.0, 0.0]), SpeedLaw::Constant { speed: 0.5 }, 0.5);
        model.kind = ModelKind::Orderly { eps: 1.0 };
        let p = ParticleEnsemble::new(vec![[3.0, 3.0]], vec![1.0]).unwrap();
        assert!(matches!(lagrangian_step(&[p.clone()], &[], &model, 0.0, 0.1), Err(Error::Unsupported(_))));
        model.kind = ModelKind::Panic;
        let leader = AgentState::new(AgentKind::Leader { steering: Steering::Constant { direction: [0.0, 1.0] } }, [3.0, 3.0]);
        let (_, agents) = lagrangian_step(&[p], &[leader], &model, 0.0, 0.1).unwrap();
        // leader starts on top of the particle, so it moves faster than ψ alone
        assert!(agents[0].position[1] - 3.0 > 0.1);
    }

    #[test]
    fn rasterize_conserves_mass() {
        let g = grid();
        let p = ParticleEnsemble::new(vec![[1.0, 1.0], [1.01, 1.02], [7.3, 2.2]], vec![0.5, 0.25, 0.25]).unwrap();
        let r = rasterize(&p, &g).unwrap();
        assert!((r.mass() - 1.0).abs() < 1e-15);
        let out = ParticleEnsemble::new(vec![[-1.0, 1.0]], vec![1.0]).unwrap();
        assert!(rasterize(&out, &g).is_err());
    }
}
