//! Total variation, exact Wasserstein-1 distances between discrete measures, a
//! Kantorovich–Rubinstein lower bound, and evaluators for the a-priori bounds checked against
//! solver output.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fv_solver::DensityField;
use crate::geometry::{Grid, Point};
use crate::lagrangian::ParticleEnsemble;

/// Largest support accepted by [`w1_discrete`] on either side.
pub const MAX_ATOMS: usize = 2000;

/// Finitely many weighted atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidDensity(format!(
                "{} atoms but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0))
            || points.iter().flatten().any(|x| !x.is_finite())
        {
            return Err(Error::InvalidDensity(
                "atoms need finite positions and positive weights".into(),
            ));
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn from_atoms(atoms: &[(Point, f64)]) -> Result<Self> {
        Self::new(
            atoms.iter().map(|a| a.0).collect(),
            atoms.iter().map(|a| a.1).collect(),
        )
    }

    pub fn from_ensemble(p: &ParticleEnsemble) -> Result<Self> {
        Self::new(p.positions().to_vec(), p.weights().to_vec())
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same atoms rescaled to unit mass.
    pub fn normalized(&self) -> Self {
        let m = self.mass();
        DiscreteMeasure {
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w / m).collect(),
        }
    }

    /// Integral of `f` against the measure.
    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(*p)).sum()
    }
}

/// Lumps the mass of a grid density into the blocks of `coarse` (which must tile the same
/// region), one atom per nonempty block at the block centre.
pub fn aggregate_density(rho: &DensityField, coarse: &Grid) -> Result<DiscreteMeasure> {
    let g = rho.grid();
    let mut mass = vec![0.0; coarse.len()];
    let area = g.cell_area();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let v = rho.values()[g.idx(i, j)];
            if v == 0.0 {
                continue;
            }
            let (ci, cj) = coarse.locate(g.center(i, j)).ok_or_else(|| {
                Error::InvalidGrid("coarse grid does not cover the density grid".into())
            })?;
            mass[coarse.idx(ci, cj)] += v * area;
        }
    }
    block_measure(coarse, &mass)
}

/// Lumps weighted points into the blocks of `coarse`; points outside are an error.
pub fn aggregate_points(points: &[Point], weights: &[f64], coarse: &Grid) -> Result<DiscreteMeasure> {
    let mut mass = vec![0.0; coarse.len()];
    for (p, w) in points.iter().zip(weights) {
        let (ci, cj) = coarse
            .locate(*p)
            .ok_or_else(|| Error::InvalidGrid(format!("point {p:?} lies outside the coarse grid")))?;
        mass[coarse.idx(ci, cj)] += w;
    }
    block_measure(coarse, &mass)
}

fn block_measure(coarse: &Grid, mass: &[f64]) -> Result<DiscreteMeasure> {
    let mut pts = Vec::new();
    let mut ws = Vec::new();
    for (k, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            let (i, j) = coarse.ij(k);
            pts.push(coarse.center(i, j));
            ws.push(m);
        }
    }
    DiscreteMeasure::new(pts, ws)
}

#[inline]
fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn check_masses(a: f64, b: f64) -> Result<()> {
    if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
        return Err(Error::MassMismatch { left: a, right: b });
    }
    Ok(())
}

/// Exact W1 distance between two measures of equal mass by successive shortest augmenting paths
/// (Dijkstra with node potentials) on the complete bipartite graph with Euclidean costs.
pub fn w1_discrete(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if m.len() > MAX_ATOMS {
            return Err(Error::SupportTooLarge {
                size: m.len(),
                limit: MAX_ATOMS,
            });
        }
    }
    check_masses(mu.mass(), nu.mass())?;
    Ok(min_cost_transport(mu, nu))
}

fn min_cost_transport(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (n, m) = (mu.len(), nu.len());
    let cost: Vec<f64> = mu
        .points
        .iter()
        .flat_map(|&a| nu.points.iter().map(move |&b| dist(a, b)))
        .collect();
    let total = mu.mass().max(nu.mass());
    let eps = 1e-15 * total;
    let mut supply = mu.weights.clone();
    let mut demand = nu.weights.clone();
    let mut flow = vec![0.0; n * m];
    let mut pot_u = vec![0.0; n];
    let mut pot_v = vec![0.0; m];
    let mut dist_u = vec![0.0; n];
    let mut dist_v = vec![0.0; m];
    let mut done_u = vec![false; n];
    let mut done_v = vec![false; m];
    let mut prev_v = vec![usize::MAX; m];
    let mut prev_u = vec![usize::MAX; n];

    loop {
        let remaining: f64 = supply.iter().filter(|&&s| s > eps).sum();
        if remaining <= eps * (n + m) as f64 {
            break;
        }
        for i in 0..n {
            dist_u[i] = if supply[i] > eps { 0.0 } else { f64::INFINITY };
            done_u[i] = false;
            prev_u[i] = usize::MAX;
        }
        dist_v.fill(f64::INFINITY);
        done_v.fill(false);
        prev_v.fill(usize::MAX);
        let mut target = None;
        loop {
            // dense selection of the closest unsettled node
            let mut best = f64::INFINITY;
            let mut pick: Option<(bool, usize)> = None;
            for i in 0..n {
                if !done_u[i] && dist_u[i] < best {
                    best = dist_u[i];
                    pick = Some((true, i));
                }
            }
            for j in 0..m {
                if !done_v[j] && dist_v[j] < best {
                    best = dist_v[j];
                    pick = Some((false, j));
                }
            }
            let Some((is_source, k)) = pick else { break };
            if is_source {
                done_u[k] = true;
                let row = &cost[k * m..(k + 1) * m];
                for j in 0..m {
                    if done_v[j] {
                        continue;
                    }
                    let reduced = (row[j] + pot_u[k] - pot_v[j]).max(0.0);
                    let nd = dist_u[k] + reduced;
                    if nd < dist_v[j] {
                        dist_v[j] = nd;
                        prev_v[j] = k;
                    }
                }
            } else {
                if demand[k] > eps {
                    target = Some(k);
                    break;
                }
                done_v[k] = true;
                for i in 0..n {
                    if done_u[i] || flow[i * m + k] <= eps {
                        continue;
                    }
                    let reduced = (-cost[i * m + k] + pot_v[k] - pot_u[i]).max(0.0);
                    let nd = dist_v[k] + reduced;
                    if nd < dist_u[i] {
                        dist_u[i] = nd;
                        prev_u[i] = k;
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let d_t = dist_v[t];
        for i in 0..n {
            pot_u[i] += dist_u[i].min(d_t);
        }
        for j in 0..m {
            pot_v[j] += dist_v[j].min(d_t);
        }
        // walk back to the root source, collecting the bottleneck
        let mut delta = demand[t];
        let mut j = t;
        let root;
        loop {
            let i = prev_v[j];
            let back = prev_u[i];
            if back == usize::MAX {
                root = i;
                break;
            }
            delta = delta.min(flow[i * m + back]);
            j = back;
        }
        delta = delta.min(supply[root]);
        let mut j = t;
        loop {
            let i = prev_v[j];
            flow[i * m + j] += delta;
            let back = prev_u[i];
            if back == usize::MAX {
                break;
            }
            let f = &mut flow[i * m + back];
            *f -= delta;
            if *f <= eps {
                *f = 0.0;
            }
            j = back;
        }
        supply[root] -= delta;
        if supply[root] <= eps {
            supply[root] = 0.0;
        }
        demand[t] -= delta;
        if demand[t] <= eps {
            demand[t] = 0.0;
        }
    }
    flow.iter().zip(&cost).map(|(f, c)| f * c).sum()
}

/// W1 on the line: `∫ |F_μ − F_ν|`. Atoms are `(position, weight)`.
pub fn w1_1d(mu: &[(f64, f64)], nu: &[(f64, f64)]) -> Result<f64> {
    let ma: f64 = mu.iter().map(|a| a.1).sum();
    let mb: f64 = nu.iter().map(|a| a.1).sum();
    check_masses(ma, mb)?;
    let mut events: Vec<(f64, f64)> = mu
        .iter()
        .map(|&(x, w)| (x, w))
        .chain(nu.iter().map(|&(x, w)| (x, -w)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut cdf = 0.0;
    let mut total = 0.0;
    for k in 0..events.len() {
        cdf += events[k].1;
        if k + 1 < events.len() {
            total += cdf.abs() * (events[k + 1].0 - events[k].0);
        }
    }
    Ok(total)
}

/// Best lower bound on W1 found among `probes` random 1-Lipschitz test functions.
///
/// The probe set mixes cones `|z − a|`, distance functions to either support, linear maps of
/// unit slope, and Lipschitz envelopes `min_s (g(s) + |z − s|)` of values `g` on the union of the
/// supports refined by random local search.
pub fn kr_duality_check(mu: &DiscreteMeasure, nu: &DiscreteMeasure, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support: Vec<Point> = mu.points.iter().chain(&nu.points).copied().collect();
    let ns = support.len();
    // signed weight of each support point
    let signed: Vec<f64> = mu.weights.iter().copied().chain(nu.weights.iter().map(|w| -w)).collect();
    let score = |vals: &[f64]| -> f64 { vals.iter().zip(&signed).map(|(v, w)| v * w).sum() };
    let envelope = |g: &[f64]| -> Vec<f64> {
        (0..ns)
            .map(|a| {
                (0..ns)
                    .map(|b| g[b] + dist(support[a], support[b]))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &support {
        for c in 0..2 {
            lo[c] = lo[c].min(p[c]);
            hi[c] = hi[c].max(p[c]);
        }
    }
    let mut best = 0.0f64;
    let mut best_vals: Vec<f64> = vec![0.0; ns];
    let consider = |vals: Vec<f64>, best: &mut f64, best_vals: &mut Vec<f64>| {
        let s = score(&vals);
        if s.abs() > *best {
            *best = s.abs();
            *best_vals = if s >= 0.0 { vals } else { vals.iter().map(|v| -v).collect() };
        }
    };
    let mut used = 0usize;
    // distance to each support
    for set in [&nu.points, &mu.points] {
        if used >= probes {
            break;
        }
        let vals = support
            .iter()
            .map(|&z| set.iter().map(|&s| dist(z, s)).fold(f64::INFINITY, f64::min))
            .collect();
        consider(vals, &mut best, &mut best_vals);
        used += 1;
    }
    let structured = probes.saturating_sub(used) / 2;
    for _ in 0..structured {
        let kind = rng.gen_range(0..3);
        let vals: Vec<f64> = match kind {
            0 => {
                let a = if rng.gen_bool(0.5) {
                    support[rng.gen_range(0..ns)]
                } else {
                    [rng.gen_range(lo[0]..=hi[0]), rng.gen_range(lo[1]..=hi[1])]
                };
                support.iter().map(|&z| dist(z, a)).collect()
            }
            1 => {
                let k = rng.gen_range(2..=4);
                let mut lam: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
                let s: f64 = lam.iter().sum();
                lam.iter_mut().for_each(|l| *l /= s);
                let centres: Vec<(Point, f64)> = (0..k)
                    .map(|_| (support[rng.gen_range(0..ns)], if rng.gen_bool(0.5) { 1.0 } else { -1.0 }))
                    .collect();
                support
                    .iter()
                    .map(|&z| {
                        centres
                            .iter()
                            .zip(&lam)
                            .map(|((c, s), l)| l * s * dist(z, *c))
                            .sum()
                    })
                    .collect()
            }
            _ => {
                let th = rng.gen_range(0.0..2.0 * PI);
                support.iter().map(|z| z[0] * th.cos() + z[1] * th.sin()).collect()
            }
        };
        consider(vals, &mut best, &mut best_vals);
        used += 1;
    }
    // local search over envelopes
    let scale = (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(1e-12);
    let mut current = envelope(&best_vals);
    let mut current_score = score(&current);
    if current_score > best {
        best = current_score;
    }
    while used < probes {
        let mut g = current.clone();
        let k = rng.gen_range(0..ns);
        g[k] += rng.gen_range(-0.5..0.5) * scale * rng.gen::<f64>();
        let cand = envelope(&g);
        let s = score(&cand);
        if s > current_score {
            current = cand;
            current_score = s;
            best = best.max(s);
        }
        used += 1;
    }
    best
}

/// Anisotropic discrete total variation over interior cell pairs:
/// `Σ |u_{i+1,j} − u_{i,j}| dy + Σ |u_{i,j+1} − u_{i,j}| dx`.
pub fn total_variation(values: &[f64], grid: &Grid) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut tx = 0.0;
    let mut ty = 0.0;
    for j in 0..ny {
        let row = &values[j * nx..(j + 1) * nx];
        for i in 0..nx - 1 {
            tx += (row[i + 1] - row[i]).abs();
        }
        if j + 1 < ny {
            let up = &values[(j + 1) * nx..(j + 2) * nx];
            for i in 0..nx {
                ty += (up[i] - row[i]).abs();
            }
        }
    }
    tx * grid.dy + ty * grid.dx
}

/// `W_N = ∫₀^{π/2} cos^N θ dθ`, from `W_0 = π/2`, `W_1 = 1` and `W_N = (N−1)/N · W_{N−2}`.
pub fn wallis_integral(n: u32) -> f64 {
    match n {
        0 => PI / 2.0,
        1 => 1.0,
        2 => PI / 4.0,
        _ => (n as f64 - 1.0) / n as f64 * wallis_integral(n - 2),
    }
}

/// `∫₀^T e^{κ(T−τ)} s(τ) dτ` for a sampled nonnegative series `s` (piecewise linear between
/// samples, constant when a single sample is given).
pub fn weighted_time_integral(series: &[(f64, f64)], kappa: f64, t_end: f64) -> f64 {
    let w = |tau: f64| (kappa * (t_end - tau)).exp();
    match series {
        [] => 0.0,
        [(_, s)] => {
            if kappa.abs() < 1e-14 {
                s * t_end
            } else {
                s * ((kappa * t_end).exp() - 1.0) / kappa
            }
        }
        _ => {
            let mut total = 0.0;
            for pair in series.windows(2) {
                let ((t0, s0), (t1, s1)) = (pair[0], pair[1]);
                // Simpson on each interval of the linear interpolant times the exponential
                let tm = 0.5 * (t0 + t1);
                let sm = 0.5 * (s0 + s1);
                total += (t1 - t0) / 6.0 * (w(t0) * s0 + 4.0 * w(tm) * sm + w(t1) * s1);
            }
            total
        }
    }
}

/// Right-hand side of the total-variation estimate
/// `TV(u₀) e^{κ₀T} + N W_N ∫₀^T e^{κ₀(T−t)} ∫ |∇(F − div f)| dx dt`,
/// with `source` sampling the inner spatial integral in time.
pub fn tv_bound_rhs(tv0: f64, kappa0: f64, t_end: f64, source: &[(f64, f64)], n: u32) -> Result<f64> {
    if !(1..=2).contains(&n) {
        return Err(Error::InvalidModel(format!("dimension must be 1 or 2, got {n}")));
    }
    if tv0 < 0.0 || kappa0 < 0.0 || t_end < 0.0 {
        return Err(Error::InvalidModel("bound inputs must be nonnegative".into()));
    }
    Ok(tv0 * (kappa0 * t_end).exp()
        + n as f64 * wallis_integral(n) * weighted_time_integral(source, kappa0, t_end))
}

/// Right-hand side of the stability estimate between two balance laws,
/// `e^{κt} L1₀ + e^{κt} sup TV · ∫ ‖∂_u(f−g)‖_∞ + ∫ e^{κ(t−τ)} ∫ |(F−G) − div(f−g)|`.
pub fn stability_bound_rhs(
    l1_init: f64,
    kappa: f64,
    t_end: f64,
    tv_sup: f64,
    flux_dev: &[(f64, f64)],
    source_dev: &[(f64, f64)],
) -> Result<f64> {
    if [l1_init, kappa, t_end, tv_sup].iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidModel("bound inputs must be nonnegative".into()));
    }
    let e = (kappa * t_end).exp();
    Ok(e * l1_init
        + e * tv_sup * weighted_time_integral(flux_dev, 0.0, t_end)
        + weighted_time_integral(source_dev, kappa, t_end))
}

/// Outcome of checking `lhs ≤ rhs (1 + margin)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub constants: Vec<(String, f64)>,
    pub satisfied: bool,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, lhs: f64, rhs: f64, margin: f64, constants: Vec<(String, f64)>) -> Self {
        BoundReport {
            name: name.into(),
            lhs,
            rhs,
            margin,
            satisfied: lhs <= rhs * (1.0 + margin),
            constants,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measure(atoms: &[(Point, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms(atoms).unwrap()
    }

    fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> DiscreteMeasure {
        let pts: Vec<Point> = (0..n).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        DiscreteMeasure::new(pts, w).unwrap().normalized()
    }

    #[test]
    fn w1_elementary_cases() {
        let a = measure(&[([0.0, 0.0], 1.0)]);
        let b = measure(&[([3.0, 4.0], 1.0)]);
        assert!((w1_discrete(&a, &b).unwrap() - 5.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_measure(&mut rng, 20);
        assert!(w1_discrete(&m, &m).unwrap().abs() < 1e-14);
        let heavy = measure(&[([0.0, 0.0], 2.0)]);
        assert!(matches!(w1_discrete(&a, &heavy), Err(Error::MassMismatch { .. })));
        let big = DiscreteMeasure::new(vec![[0.0, 0.0]; MAX_ATOMS + 1], vec![1.0; MAX_ATOMS + 1]).unwrap();
        assert!(matches!(w1_discrete(&big, &big), Err(Error::SupportTooLarge { .. })));
        assert!(matches!(DiscreteMeasure::new(vec![], vec![]), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn w1_1d_elementary_cases() {
        assert!((w1_1d(&[(0.0, 1.0)], &[(1.0, 1.0)]).unwrap() - 1.0).abs() < 1e-15);
        let mu = [(0.3, 0.5), (0.9, 0.5)];
        assert_eq!(w1_1d(&mu, &mu).unwrap(), 0.0);
    }

    #[test]
    fn duality_bound_on_diracs() {
        let a = measure(&[([0.2, 0.1], 1.0)]);
        let b = measure(&[([1.0, 0.7], 1.0)]);
        let w = w1_discrete(&a, &b).unwrap();
        let bound = kr_duality_check(&a, &b, 16, 0);
        assert!((bound - w).abs() < 1e-12);
        assert_eq!(kr_duality_check(&a, &a, 16, 0), 0.0);
    }

    #[test]
    fn tv_examples() {
        let g = Grid::new(50, 50, 0.1, 0.1, [0.0, 0.0]).unwrap();
        assert_eq!(total_variation(&vec![2.5; g.len()], &g), 0.0);
        let ind: Vec<f64> = g.map_centers(|x| if (1.0..3.0).contains(&x[0]) && (1.5..3.5).contains(&x[1]) { 1.0 } else { 0.0 });
        assert!((total_variation(&ind, &g) - 8.0).abs() < 1e-12);
    }

    #[test]
    fn wallis_values() {
        assert_eq!(wallis_integral(1), 1.0);
        assert!((wallis_integral(2) - PI / 4.0).abs() < 1e-15);
        // ∫ cos³ = 2/3
        assert!((wallis_integral(3) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn bound_reductions() {
        assert_eq!(tv_bound_rhs(3.0, 0.0, 2.0, &[], 2).unwrap(), 3.0);
        // u-independent flux and source: tv0 + N W_N ∫∫|∇(F − div f)|
        let rhs = tv_bound_rhs(3.0, 0.0, 2.0, &[(0.0, 0.5), (2.0, 0.5)], 2).unwrap();
        assert!((rhs - (3.0 + 2.0 * PI / 4.0 * 1.0)).abs() < 1e-12);
        assert!(tv_bound_rhs(1.0, 0.0, 1.0, &[], 3).is_err());
        // identical laws: Kruzhkov contraction with rate κ
        let r = stability_bound_rhs(0.2, 0.5, 2.0, 4.0, &[], &[]).unwrap();
        assert!((r - 0.2 * 1f64.exp()).abs() < 1e-14);
        // u-independent laws: L1 + ∫∫ |(F−G) − div(f−g)|
        let r = stability_bound_rhs(0.2, 0.0, 2.0, 4.0, &[], &[(0.0, 0.1), (2.0, 0.1)]).unwrap();
        assert!((r - 0.4).abs() < 1e-14);
        // Lucier-type: l1 + t TV ‖∂u(f−g)‖
        let r = stability_bound_rhs(0.2, 0.0, 2.0, 4.0, &[(0.0, 0.3)], &[]).unwrap();
        assert!((r - (0.2 + 2.0 * 4.0 * 0.3)).abs() < 1e-14);
    }

    #[test]
    fn weighted_integral_matches_closed_form() {
        let series: Vec<(f64, f64)> = (0..=200).map(|k| (k as f64 * 0.01, 1.5)).collect();
        let exact = 1.5 * ((0.7f64 * 2.0).exp() - 1.0) / 0.7;
        assert!((weighted_time_integral(&series, 0.7, 2.0) - exact).abs() < 1e-9);
        assert!((weighted_time_integral(&[(0.0, 1.5)], 0.7, 2.0) - exact).abs() < 1e-12);
    }

    #[test]
    fn bound_report_flag() {
        assert!(BoundReport::new("x", 1.05, 1.0, 0.1, vec![]).satisfied);
        assert!(!BoundReport::new("x", 1.2, 1.0, 0.1, vec![]).satisfied);
    }
}
