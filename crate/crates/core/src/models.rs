//! Velocity laws for the single- and multi-population models and the agent right-hand sides.
//!
//! Every grid model reduces, once the nonlocal terms are frozen, to one of two flux shapes:
//! `ρ A(x)` (linear in the density, the panic family) or `ρ v(ρ) W(x)` (the orderly family and
//! the agent-coupled crowds). [`transport_field`] builds whichever applies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grid, Point, VectorField};
use crate::kernels::{ConvField, Kernel};

/// Scalar speed as a function of a (local or averaged) density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpeedLaw {
    /// `v(r) = speed` for every `r`.
    Constant { speed: f64 },
    /// `v(r) = v_max (1 - r)`.
    LwrOrderly { v_max: f64 },
    /// `v(r) = v_max max(0, 1 - r)` with the kink at `r = 1` replaced by a C² cubic blend of
    /// total width `blend`.
    AffinePanic { v_max: f64, blend: f64 },
}

/// C² ramp: `max(0, s)` with a cubic blend on `[-h, h]`.
fn smooth_ramp(s: f64, h: f64) -> f64 {
    if s <= -h {
        0.0
    } else if s <= 0.0 {
        (s + h).powi(3) / (6.0 * h * h)
    } else if s < h {
        s + (h - s).powi(3) / (6.0 * h * h)
    } else {
        s
    }
}

fn smooth_ramp_slope(s: f64, h: f64) -> f64 {
    if s <= -h {
        0.0
    } else if s <= 0.0 {
        (s + h).powi(2) / (2.0 * h * h)
    } else if s < h {
        1.0 - (h - s).powi(2) / (2.0 * h * h)
    } else {
        1.0
    }
}

impl SpeedLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpeedLaw::Constant { speed } => speed.is_finite(),
            SpeedLaw::LwrOrderly { v_max } => v_max >= 0.0 && v_max.is_finite(),
            SpeedLaw::AffinePanic { v_max, blend } => {
                v_max >= 0.0 && v_max.is_finite() && blend > 0.0 && blend < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!("bad speed law parameters: {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            SpeedLaw::Constant { speed } => speed,
            SpeedLaw::LwrOrderly { v_max } => v_max * (1.0 - r),
            SpeedLaw::AffinePanic { v_max, blend } => v_max * smooth_ramp(1.0 - r, 0.5 * blend),
        }
    }

    #[inline]
    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            SpeedLaw::Constant { .. } => 0.0,
            SpeedLaw::LwrOrderly { v_max } => -v_max,
            SpeedLaw::AffinePanic { v_max, blend } => -v_max * smooth_ramp_slope(1.0 - r, 0.5 * blend),
        }
    }

    /// Lipschitz constant of `v` on `[0, ∞)`.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            SpeedLaw::Constant { .. } => 0.0,
            SpeedLaw::LwrOrderly { v_max } | SpeedLaw::AffinePanic { v_max, .. } => v_max,
        }
    }

    /// `sup |v|` over the densities the law is used on: `[0, 1]` for the LWR law, `[0, ∞)` otherwise.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            SpeedLaw::Constant { speed } => speed.abs(),
            SpeedLaw::LwrOrderly { v_max } => v_max,
            SpeedLaw::AffinePanic { v_max, blend } => v_max * smooth_ramp(1.0, 0.5 * blend),
        }
    }

    /// Local flux `g(u) = u v(u)`.
    #[inline]
    pub fn flux(&self, u: f64) -> f64 {
        u * self.eval(u)
    }

    #[inline]
    pub fn flux_derivative(&self, u: f64) -> f64 {
        self.eval(u) + u * self.derivative(u)
    }

    /// Maximiser of `g` on `[0, ∞)`, or `None` when `v` is constant (monotone flux).
    pub fn flux_peak(&self) -> Option<f64> {
        match *self {
            SpeedLaw::Constant { .. } => None,
            SpeedLaw::LwrOrderly { .. } => Some(0.5),
            SpeedLaw::AffinePanic { blend, .. } => {
                // g is unimodal on [0, 1 + blend/2]; golden-section search.
                let (mut a, mut b) = (0.0f64, 1.0 + 0.5 * blend);
                let phi = 0.5 * (5f64.sqrt() - 1.0);
                let g = |u: f64| self.flux(u);
                for _ in 0..200 {
                    let c = b - phi * (b - a);
                    let d = a + phi * (b - a);
                    if g(c) > g(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                Some(0.5 * (a + b))
            }
        }
    }

    /// Upper bound of `|g'(u)|` for `u ∈ [0, max(1, u_max)]`.
    pub fn flux_slope_bound(&self, u_max: f64) -> f64 {
        let top = u_max.max(1.0);
        match *self {
            SpeedLaw::Constant { speed } => speed.abs(),
            SpeedLaw::LwrOrderly { v_max } => v_max * (2.0 * top - 1.0).max(1.0),
            SpeedLaw::AffinePanic { v_max, .. } => v_max * (1.0 + top),
        }
    }
}

/// `g / √(1 + |g|²)`, a vector of norm below one.
#[inline]
pub fn normalized_gradient(g: [f64; 2]) -> [f64; 2] {
    let s = 1.0 / (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
    [g[0] * s, g[1] * s]
}

fn check_grid(a: &Grid, b: &Grid) -> Result<()> {
    a.check_same(b)
}

/// `V = v(ρ*η) ν`.
pub fn panic_velocity(conv: &ConvField, nu: &VectorField, law: &SpeedLaw) -> Result<VectorField> {
    check_grid(conv.grid(), nu.grid())?;
    let mut out = VectorField::zeros(*nu.grid());
    for k in 0..out.u.len() {
        let s = law.eval(conv.values[k]);
        out.u[k] = s * nu.u[k];
        out.v[k] = s * nu.v[k];
    }
    Ok(out)
}

/// Direction `W = ν − ε ∇(ρ*η)/√(1+|∇(ρ*η)|²)` of the orderly model.
pub fn orderly_direction(conv: &ConvField, nu: &VectorField, eps: f64) -> Result<VectorField> {
    multi_orderly_direction(std::slice::from_ref(conv), nu, 0, eps, 0.0)
}

/// `V = v(ρ) W` with `W` from [`orderly_direction`].
pub fn orderly_velocity(
    rho: &[f64],
    conv: &ConvField,
    nu: &VectorField,
    law: &SpeedLaw,
    eps: f64,
) -> Result<VectorField> {
    let w = orderly_direction(conv, nu, eps)?;
    scale_by_local_speed(rho, w, law)
}

fn scale_by_local_speed(rho: &[f64], mut w: VectorField, law: &SpeedLaw) -> Result<VectorField> {
    if rho.len() != w.u.len() {
        return Err(Error::InvalidDensity(format!(
            "density has {} cells, field has {}",
            rho.len(),
            w.u.len()
        )));
    }
    for (k, &r) in rho.iter().enumerate() {
        let s = law.eval(r);
        w.u[k] *= s;
        w.v[k] *= s;
    }
    Ok(w)
}

/// `V_i = v(Σ_j ρ_j*η_j) ν_i`.
pub fn multi_panic_velocity(
    convs: &[ConvField],
    nu_i: &VectorField,
    law: &SpeedLaw,
    i: usize,
) -> Result<VectorField> {
    if i >= convs.len() {
        return Err(Error::PopulationOutOfRange {
            index: i,
            len: convs.len(),
        });
    }
    let mut total = convs[0].clone();
    for c in &convs[1..] {
        check_grid(total.grid(), c.grid())?;
        for (a, b) in total.values.iter_mut().zip(&c.values) {
            *a += b;
        }
    }
    panic_velocity(&total, nu_i, law)
}

/// `W_i = ν_i − ε_self g_i − ε_other Σ_{j≠i} g_j` with `g_j` the normalised gradient of `ρ_j*η_j`.
pub fn multi_orderly_direction(
    convs: &[ConvField],
    nu_i: &VectorField,
    i: usize,
    eps_self: f64,
    eps_other: f64,
) -> Result<VectorField> {
    if i >= convs.len() {
        return Err(Error::PopulationOutOfRange {
            index: i,
            len: convs.len(),
        });
    }
    let mut out = nu_i.clone();
    for (j, c) in convs.iter().enumerate() {
        check_grid(c.grid(), nu_i.grid())?;
        let eps = if j == i { eps_self } else { eps_other };
        if eps == 0.0 {
            continue;
        }
        for k in 0..out.u.len() {
            let g = normalized_gradient(c.gradient(k));
            out.u[k] -= eps * g[0];
            out.v[k] -= eps * g[1];
        }
    }
    Ok(out)
}

/// `V_i = v_i(ρ_i) W_i` with `W_i` from [`multi_orderly_direction`]. Requires two populations.
pub fn multi_orderly_velocity(
    rho_i: &[f64],
    convs: &[ConvField],
    nu_i: &VectorField,
    law_i: &SpeedLaw,
    i: usize,
    eps_self: f64,
    eps_other: f64,
) -> Result<VectorField> {
    if convs.len() != 2 {
        return Err(Error::InvalidModel(format!(
            "the two-population orderly model needs exactly 2 populations, got {}",
            convs.len()
        )));
    }
    let w = multi_orderly_direction(convs, nu_i, i, eps_self, eps_other)?;
    scale_by_local_speed(rho_i, w, law_i)
}

/// `(x - p) e^{-|x - p|}`: bounded repulsion away from `p`.
#[inline]
pub fn repulsion(x: Point, p: Point) -> [f64; 2] {
    let d = [x[0] - p[0], x[1] - p[1]];
    let e = (-(d[0].hypot(d[1]))).exp();
    [d[0] * e, d[1] * e]
}

/// Leader velocity `(1 + ρ*η(p)) ψ`.
pub fn agent_rhs_leader(conv_at_p: f64, psi: [f64; 2]) -> [f64; 2] {
    [(1.0 + conv_at_p) * psi[0], (1.0 + conv_at_p) * psi[1]]
}

/// Direction of the followers' flux, `(p - x) e^{-|p - x|}`.
pub fn follower_direction(x: Point, p: Point) -> [f64; 2] {
    repulsion(p, x)
}

/// Follower velocity `v(ρ(x)) (p - x) e^{-|p - x|}`.
pub fn follower_velocity(law: &SpeedLaw, rho: f64, x: Point, p: Point) -> [f64; 2] {
    let s = law.eval(rho);
    let d = follower_direction(x, p);
    [s * d[0], s * d[1]]
}

/// Dog velocity: the gradient of the averaged density rotated by +π/2, normalised by
/// `√(1 + |∇|²)`.
pub fn agent_rhs_dog(conv_grad_at_p: [f64; 2]) -> [f64; 2] {
    let n = normalized_gradient(conv_grad_at_p);
    [-n[1], n[0]]
}

/// Predator acceleration `ρ*∇η(p)`.
pub fn agent_rhs_predator(conv_grad_at_p: [f64; 2]) -> [f64; 2] {
    conv_grad_at_p
}

/// Leading direction of the prey flux.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreyBase {
    /// The scenario's preferred direction `ν(x)`.
    #[default]
    Nu,
    /// The constant vector `(1, 1)`.
    Ones,
}

/// Prey direction `base + (x - p) e^{-|x - p|}`.
pub fn prey_direction(base: [f64; 2], x: Point, p: Point) -> [f64; 2] {
    let r = repulsion(x, p);
    [base[0] + r[0], base[1] + r[1]]
}

/// Prey velocity `v(ρ) (base + (x - p) e^{-|x - p|})`.
pub fn prey_velocity(law: &SpeedLaw, rho: f64, base: [f64; 2], x: Point, p: Point) -> [f64; 2] {
    let s = law.eval(rho);
    let d = prey_direction(base, x, p);
    [s * d[0], s * d[1]]
}

/// Leader steering input `ψ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Steering {
    Constant { direction: [f64; 2] },
    /// `speed (cos(ωt + phase), sin(ωt + phase))`.
    Circle { speed: f64, omega: f64, phase: f64 },
}

impl Steering {
    pub fn at(&self, t: f64) -> [f64; 2] {
        match *self {
            Steering::Constant { direction } => direction,
            Steering::Circle { speed, omega, phase } => {
                let a = omega * t + phase;
                [speed * a.cos(), speed * a.sin()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentKind {
    Leader { steering: Steering },
    Dog,
    /// Second-order dynamics; the state's `velocity` is integrated.
    Predator,
}

/// Position (and, for predators, velocity) of a single agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub kind: AgentKind,
    pub position: Point,
    pub velocity: [f64; 2],
}

impl AgentState {
    pub fn new(kind: AgentKind, position: Point) -> Self {
        AgentState {
            kind,
            position,
            velocity: [0.0, 0.0],
        }
    }

    pub fn with_velocity(mut self, velocity: [f64; 2]) -> Self {
        self.velocity = velocity;
        self
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().chain(&self.velocity).all(|x| x.is_finite())
    }
}

/// Time derivative of an agent state: `(dp/dt, dv/dt)`.
pub type AgentRate = ([f64; 2], [f64; 2]);

/// Rate of change of every agent given a lookup of `(ρ*η, ∇(ρ*η))` of the crowd at a point.
pub fn agent_rates(
    agents: &[AgentState],
    t: f64,
    mut conv_at: impl FnMut(Point) -> (f64, [f64; 2]),
) -> Vec<AgentRate> {
    agents
        .iter()
        .map(|a| {
            let (c, g) = conv_at(a.position);
            match a.kind {
                AgentKind::Leader { steering } => (agent_rhs_leader(c, steering.at(t)), [0.0, 0.0]),
                AgentKind::Dog => (agent_rhs_dog(g), [0.0, 0.0]),
                AgentKind::Predator => (a.velocity, agent_rhs_predator(g)),
            }
        })
        .collect()
}

/// Classical RK4 step for the agents with a time-dependent crowd lookup.
pub fn advance_agents(
    agents: &[AgentState],
    t: f64,
    dt: f64,
    mut conv_at: impl FnMut(f64, Point) -> (f64, [f64; 2]),
) -> Vec<AgentState> {
    if agents.is_empty() {
        return Vec::new();
    }
    let shifted = |base: &[AgentState], k: &[AgentRate], h: f64| -> Vec<AgentState> {
        base.iter()
            .zip(k)
            .map(|(a, (dp, dv))| AgentState {
                kind: a.kind,
                position: [a.position[0] + h * dp[0], a.position[1] + h * dp[1]],
                velocity: [a.velocity[0] + h * dv[0], a.velocity[1] + h * dv[1]],
            })
            .collect()
    };
    let k1 = agent_rates(agents, t, |x| conv_at(t, x));
    let s2 = shifted(agents, &k1, 0.5 * dt);
    let k2 = agent_rates(&s2, t + 0.5 * dt, |x| conv_at(t + 0.5 * dt, x));
    let s3 = shifted(agents, &k2, 0.5 * dt);
    let k3 = agent_rates(&s3, t + 0.5 * dt, |x| conv_at(t + 0.5 * dt, x));
    let s4 = shifted(agents, &k3, dt);
    let k4 = agent_rates(&s4, t + dt, |x| conv_at(t + dt, x));
    agents
        .iter()
        .enumerate()
        .map(|(n, a)| {
            let comb = |f: fn(&AgentRate) -> [f64; 2]| {
                let (a1, a2, a3, a4) = (f(&k1[n]), f(&k2[n]), f(&k3[n]), f(&k4[n]));
                [
                    (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0]) / 6.0,
                    (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1]) / 6.0,
                ]
            };
            let dp = comb(|r| r.0);
            let dv = comb(|r| r.1);
            let mut next = AgentState {
                kind: a.kind,
                position: [a.position[0] + dt * dp[0], a.position[1] + dt * dp[1]],
                velocity: [a.velocity[0] + dt * dv[0], a.velocity[1] + dt * dv[1]],
            };
            if !matches!(a.kind, AgentKind::Predator) {
                // first-order agents report their current speed as velocity
                next.velocity = dp;
            }
            next
        })
        .collect()
}

/// Which system of equations is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    Panic,
    /// Orderly crowd; `eps` weights the deviation term (1 in the basic model).
    Orderly { eps: f64 },
    MultiPanic,
    MultiOrderly { eps_self: f64, eps_other: f64 },
    /// Followers attracted by leader agents.
    LeaderFollowers,
    /// Sheep repelled by dog agents.
    SheepDogs,
    /// Preys repelled by a single predator agent.
    PredatorPrey { base: PreyBase },
}

/// Data attached to one population.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub name: String,
    pub nu: VectorField,
    pub kernel: Kernel,
    pub law: SpeedLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub populations: Vec<Population>,
    pub agents: Vec<AgentState>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.populations.len();
        if k == 0 {
            return Err(Error::InvalidModel("at least one population is required".into()));
        }
        let grid = *self.populations[0].nu.grid();
        for p in &self.populations {
            p.law.validate()?;
            grid.check_same(p.nu.grid())?;
        }
        let count = |pred: fn(&AgentKind) -> bool| self.agents.iter().filter(|a| pred(&a.kind)).count();
        let need_single = |what: &str| -> Result<()> {
            if k != 1 {
                return Err(Error::InvalidModel(format!("{what} takes one population, got {k}")));
            }
            Ok(())
        };
        match self.kind {
            ModelKind::Panic => need_single("the panic model")?,
            ModelKind::Orderly { eps } => {
                need_single("the orderly model")?;
                if !(eps >= 0.0) {
                    return Err(Error::InvalidModel(format!("eps must be >= 0, got {eps}")));
                }
            }
            ModelKind::MultiPanic => {
                if k < 2 {
                    return Err(Error::InvalidModel("multi-population panic needs >= 2 populations".into()));
                }
            }
            ModelKind::MultiOrderly { eps_self, eps_other } => {
                if k != 2 {
                    return Err(Error::InvalidModel(format!(
                        "the two-population orderly model needs exactly 2 populations, got {k}"
                    )));
                }
                if !(eps_self >= 0.0 && eps_other >= 0.0) {
                    return Err(Error::InvalidModel("interaction weights must be >= 0".into()));
                }
            }
            ModelKind::LeaderFollowers => {
                need_single("the leader model")?;
                if count(|a| matches!(a, AgentKind::Leader { .. })) == 0 {
                    return Err(Error::InvalidModel("leader model without a leader".into()));
                }
            }
            ModelKind::SheepDogs => {
                need_single("the dogs model")?;
                if count(|a| matches!(a, AgentKind::Dog)) == 0 {
                    return Err(Error::InvalidModel("dogs model without a dog".into()));
                }
            }
            ModelKind::PredatorPrey { .. } => {
                need_single("the predator model")?;
                if count(|a| matches!(a, AgentKind::Predator)) != 1 {
                    return Err(Error::InvalidModel("predator model needs exactly one predator".into()));
                }
            }
        }
        if self.agents.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("agent state is not finite".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        self.populations[0].nu.grid()
    }

    /// True for models whose flux is linear in the density once the nonlocal term is frozen.
    pub fn is_panic_type(&self) -> bool {
        matches!(self.kind, ModelKind::Panic | ModelKind::MultiPanic)
    }

    /// True for models whose flux is `ρ v(ρ) W(x)`.
    pub fn is_local_speed_type(&self) -> bool {
        !self.is_panic_type()
    }

    /// True when the frozen transport or an agent reads `∇(ρ*η)`.
    pub fn needs_gradient(&self) -> bool {
        !self.is_panic_type() || !self.agents.is_empty()
    }
}

/// Frozen transport of one population over a step.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportField {
    /// Flux `ρ A(x)`.
    Linear(VectorField),
    /// Flux `ρ v(ρ) W(x)`.
    Local { direction: VectorField, law: SpeedLaw },
}

impl TransportField {
    /// Pointwise velocity for the given density values.
    pub fn velocity(&self, rho: &[f64]) -> Result<VectorField> {
        match self {
            TransportField::Linear(a) => Ok(a.clone()),
            TransportField::Local { direction, law } => scale_by_local_speed(rho, direction.clone(), law),
        }
    }

    /// Upper bound on the characteristic speed for densities up to `u_max`, per component.
    pub fn wave_speed(&self, u_max: f64) -> [f64; 2] {
        match self {
            TransportField::Linear(a) => a.component_sup(),
            TransportField::Local { direction, law } => {
                let s = law.flux_slope_bound(u_max);
                let c = direction.component_sup();
                [s * c[0], s * c[1]]
            }
        }
    }
}

/// Builds the frozen transport of population `i` from the convolutions of every population and
/// the current agent states.
pub fn transport_field(
    model: &ModelSpec,
    i: usize,
    convs: &[ConvField],
    agents: &[AgentState],
) -> Result<TransportField> {
    let pop = model
        .populations
        .get(i)
        .ok_or(Error::PopulationOutOfRange {
            index: i,
            len: model.populations.len(),
        })?;
    let local = |direction: VectorField| TransportField::Local {
        direction,
        law: pop.law,
    };
    Ok(match model.kind {
        ModelKind::Panic => TransportField::Linear(panic_velocity(&convs[0], &pop.nu, &pop.law)?),
        ModelKind::MultiPanic => TransportField::Linear(multi_panic_velocity(convs, &pop.nu, &pop.law, i)?),
        ModelKind::Orderly { eps } => local(orderly_direction(&convs[0], &pop.nu, eps)?),
        ModelKind::MultiOrderly { eps_self, eps_other } => {
            local(multi_orderly_direction(convs, &pop.nu, i, eps_self, eps_other)?)
        }
        ModelKind::LeaderFollowers => {
            let leaders: Vec<Point> = agents
                .iter()
                .filter(|a| matches!(a.kind, AgentKind::Leader { .. }))
                .map(|a| a.position)
                .collect();
            local(VectorField::from_fn(*pop.nu.grid(), |x| {
                leaders.iter().fold([0.0, 0.0], |acc, &p| {
                    let d = follower_direction(x, p);
                    [acc[0] + d[0], acc[1] + d[1]]
                })
            }))
        }
        ModelKind::SheepDogs => {
            let dogs: Vec<Point> = agents
                .iter()
                .filter(|a| matches!(a.kind, AgentKind::Dog))
                .map(|a| a.position)
                .collect();
            let grid = *pop.nu.grid();
            let mut w = pop.nu.clone();
            for k in 0..grid.len() {
                let (ci, cj) = grid.ij(k);
                let x = grid.center(ci, cj);
                for &p in &dogs {
                    let r = repulsion(x, p);
                    w.u[k] += r[0];
                    w.v[k] += r[1];
                }
            }
            local(w)
        }
        ModelKind::PredatorPrey { base } => {
            let p = agents
                .iter()
                .find(|a| matches!(a.kind, AgentKind::Predator))
                .map(|a| a.position)
                .ok_or_else(|| Error::InvalidModel("predator model needs a predator".into()))?;
            let grid = *pop.nu.grid();
            let mut w = VectorField::zeros(grid);
            for k in 0..grid.len() {
                let (ci, cj) = grid.ij(k);
                let b = match base {
                    PreyBase::Nu => pop.nu.at(k),
                    PreyBase::Ones => [1.0, 1.0],
                };
                let d = prey_direction(b, grid.center(ci, cj), p);
                w.u[k] = d[0];
                w.v[k] = d[1];
            }
            local(w)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv_solver::DensityField;
    use crate::kernels::{convolve, make_mollifier, KernelProfile};

    fn grid() -> Grid {
        Grid::new(30, 30, 0.1, 0.1, [0.0, 0.0]).unwrap()
    }

    fn blob(g: Grid, c: Point, r: f64, a: f64) -> DensityField {
        DensityField::from_fn(g, |x| {
            let d2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
            a * (-d2 / (r * r)).exp()
        })
    }

    #[test]
    fn speed_laws() {
        let lwr = SpeedLaw::LwrOrderly { v_max: 2.0 };
        assert_eq!(lwr.eval(1.0), 0.0);
        assert_eq!(lwr.eval(0.0), 2.0);
        let p = SpeedLaw::AffinePanic { v_max: 1.5, blend: 0.1 };
        assert_eq!(p.eval(0.0), 1.5);
        assert!((p.eval(0.5) - 0.75).abs() < 1e-15);
        assert_eq!(p.eval(1.2), 0.0);
        // C¹ across the blend edges, monotone
        let mut last = f64::INFINITY;
        for n in 0..=2000 {
            let r = n as f64 / 1000.0;
            let v = p.eval(r);
            assert!(v <= last + 1e-15);
            last = v;
            let fd = (p.eval(r + 1e-7) - p.eval(r - 1e-7)) / 2e-7;
            assert!((fd - p.derivative(r)).abs() < 1e-5, "r={r}");
        }
        assert!((lwr.flux_peak().unwrap() - 0.5).abs() < 1e-15);
        let peak = p.flux_peak().unwrap();
        assert!((peak - 0.5).abs() < 1e-6);
        assert_eq!(SpeedLaw::Constant { speed: 1.0 }.flux_peak(), None);
    }

    #[test]
    fn panic_velocity_cases() {
        let g = grid();
        let nu = VectorField::from_fn(g, |x| {
            let a = x[0] + 2.0 * x[1];
            [a.cos(), a.sin()]
        });
        let law = SpeedLaw::AffinePanic { v_max: 1.3, blend: 0.1 };
        let zero = ConvField::zeros(g);
        let v = panic_velocity(&zero, &nu, &law).unwrap();
        for k in 0..g.len() {
            assert_eq!(v.at(k), [1.3 * nu.u[k], 1.3 * nu.v[k]]);
        }
        let mut one = ConvField::zeros(g);
        one.values.fill(1.0);
        let v = panic_velocity(&one, &nu, &SpeedLaw::LwrOrderly { v_max: 1.0 }).unwrap();
        assert!(v.u.iter().chain(&v.v).all(|&x| x == 0.0));

        let k = make_mollifier(0.4, KernelProfile::Triweight).unwrap();
        let conv = convolve(&blob(g, [1.5, 1.5], 0.5, 2.0), &k).unwrap();
        let v = panic_velocity(&conv, &nu, &law).unwrap();
        for c in 0..g.len() {
            let s = law.eval(conv.values[c]);
            assert_eq!(v.u[c], s * nu.u[c]);
            assert_eq!(v.v[c], s * nu.v[c]);
        }
    }

    #[test]
    fn orderly_velocity_cases() {
        let g = grid();
        let nu = VectorField::constant(g, [1.0, 0.0]);
        let law = SpeedLaw::LwrOrderly { v_max: 1.0 };
        let k = make_mollifier(0.4, KernelProfile::Triweight).unwrap();
        // constant density: gradient vanishes in the interior
        let rho = DensityField::new(g, vec![0.4; g.len()]).unwrap();
        let conv = convolve(&rho, &k).unwrap();
        let v = orderly_velocity(rho.values(), &conv, &nu, &law, 1.0).unwrap();
        let c = g.idx(15, 15);
        assert!((v.u[c] - 0.6).abs() < 1e-10 && v.v[c].abs() < 1e-10);
        // density one: no motion whatever the gradient
        let mut vals = vec![0.0; g.len()];
        vals[c] = 1.0;
        let rho = DensityField::new(g, vals).unwrap();
        let conv = convolve(&rho, &k).unwrap();
        let v = orderly_velocity(rho.values(), &conv, &nu, &law, 1.0).unwrap();
        assert_eq!(v.at(c), [0.0, 0.0]);
        // blob to the left pushes to the right
        let rho = blob(g, [1.0, 1.5], 0.3, 0.8);
        let conv = convolve(&rho, &k).unwrap();
        let zero_nu = VectorField::zeros(g);
        let w = orderly_direction(&conv, &zero_nu, 1.0).unwrap();
        for j in 12..18 {
            for i in 11..14 {
                let q = g.idx(i, j);
                let out = [g.center(i, j)[0] - 1.0, g.center(i, j)[1] - 1.5];
                assert!(w.u[q] * out[0] + w.v[q] * out[1] > 0.0);
                assert!(w.u[q].hypot(w.v[q]) < 1.0);
            }
        }
    }

    #[test]
    fn multi_models_reduce_and_vanish() {
        let g = grid();
        let nu1 = VectorField::constant(g, [0.6, 0.8]);
        let nu2 = VectorField::constant(g, [-1.0, 0.0]);
        let law = SpeedLaw::AffinePanic { v_max: 1.0, blend: 0.1 };
        let k = make_mollifier(0.4, KernelProfile::Triweight).unwrap();
        let c1 = convolve(&blob(g, [1.0, 1.0], 0.4, 1.0), &k).unwrap();
        let c2 = convolve(&blob(g, [2.0, 2.0], 0.4, 1.5), &k).unwrap();
        let zero = ConvField::zeros(g);
        let single = panic_velocity(&c1, &nu1, &law).unwrap();
        let multi = multi_panic_velocity(&[c1.clone(), zero], &nu1, &law, 0).unwrap();
        assert_eq!(single, multi);
        let v2 = multi_panic_velocity(&[c1.clone(), c2.clone()], &nu2, &law, 1).unwrap();
        for q in 0..g.len() {
            let s = law.eval(c1.values[q] + c2.values[q]);
            assert_eq!(v2.at(q), [s * nu2.u[q], s * nu2.v[q]]);
        }
        assert!(matches!(
            multi_panic_velocity(&[c1.clone(), c2.clone()], &nu2, &law, 2),
            Err(Error::PopulationOutOfRange { .. })
        ));
        let mut a = ConvField::zeros(g);
        a.values.fill(0.25);
        let mut b = ConvField::zeros(g);
        b.values.fill(0.75);
        let v = multi_panic_velocity(&[a, b], &nu1, &SpeedLaw::LwrOrderly { v_max: 1.0 }, 0).unwrap();
        assert!(v.u.iter().chain(&v.v).all(|&x| x == 0.0));

        let rho = vec![0.3; g.len()];
        let lwr = SpeedLaw::LwrOrderly { v_max: 1.0 };
        let v = multi_orderly_velocity(&rho, &[c1.clone(), c2.clone()], &nu1, &lwr, 0, 0.0, 0.0).unwrap();
        for q in 0..g.len() {
            assert_eq!(v.at(q), [0.7 * 0.6, 0.7 * 0.8]);
        }
        assert!(multi_orderly_velocity(&rho, std::slice::from_ref(&c1), &nu1, &lwr, 0, 0.3, 0.7).is_err());
    }

    #[test]
    fn agent_laws() {
        assert_eq!(agent_rhs_leader(0.0, [0.3, -0.2]), [0.3, -0.2]);
        assert_eq!(agent_rhs_leader(1.0, [1.0, 0.0]), [2.0, 0.0]);
        let mut last = 0.0;
        for n in 0..50 {
            let s = agent_rhs_leader(n as f64 * 0.1, [0.4, 0.3]);
            let sp = s[0].hypot(s[1]);
            assert!(sp >= last);
            last = sp;
        }
        let law = SpeedLaw::LwrOrderly { v_max: 1.0 };
        assert_eq!(follower_velocity(&law, 0.3, [1.0, 2.0], [1.0, 2.0]), [0.0, 0.0]);
        assert_eq!(follower_velocity(&law, 1.0, [1.0, 2.0], [3.0, 2.0]), [0.0, 0.0]);
        assert_eq!(agent_rhs_dog([0.0, 0.0]), [0.0, 0.0]);
        let d = agent_rhs_dog([2.0, 0.0]);
        assert_eq!(d[0] * 2.0, 0.0);
        assert!(d[1] > 0.0);
        assert_eq!(agent_rhs_predator([0.1, -0.4]), [0.1, -0.4]);
        let r = repulsion([50.0, 0.0], [0.0, 0.0]);
        assert!(r[0] < 1e-18);
        assert_eq!(repulsion([1.0, 1.0], [1.0, 1.0]), [0.0, 0.0]);
    }

    #[test]
    fn steering_and_agent_integration() {
        let s = Steering::Circle { speed: 2.0, omega: 1.0, phase: 0.0 };
        let a = s.at(std::f64::consts::FRAC_PI_2);
        assert!(a[0].abs() < 1e-15 && (a[1] - 2.0).abs() < 1e-15);
        // predator with no crowd coasts in a straight line
        let p = AgentState::new(AgentKind::Predator, [1.0, 1.0]).with_velocity([0.5, -0.25]);
        let mut agents = vec![p];
        let mut t = 0.0;
        for _ in 0..10 {
            agents = advance_agents(&agents, t, 0.1, |_, _| (0.0, [0.0, 0.0]));
            t += 0.1;
        }
        assert!((agents[0].position[0] - 1.5).abs() < 1e-12);
        assert!((agents[0].position[1] - 0.75).abs() < 1e-12);
        // a leader on a circle without followers
        let l = AgentState::new(AgentKind::Leader { steering: s }, [0.0, 0.0]);
        let mut agents = vec![l];
        let mut t = 0.0;
        let dt = 0.01;
        for _ in 0..100 {
            agents = advance_agents(&agents, t, dt, |_, _| (0.0, [0.0, 0.0]));
            t += dt;
        }
        let exact = [2.0 * t.sin(), 2.0 * (1.0 - t.cos())];
        assert!((agents[0].position[0] - exact[0]).abs() < 1e-9);
        assert!((agents[0].position[1] - exact[1]).abs() < 1e-9);
    }
}
