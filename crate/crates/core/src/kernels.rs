//! Compactly supported mollifiers and their convolutions with grid densities and particle sets.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv_solver::DensityField;
use crate::geometry::{Grid, Point};
use crate::lagrangian::ParticleEnsemble;

/// Polynomial bump `(1 - |x|²/R²)^k` on the open disc of radius `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelProfile {
    /// Exponent 3 (C² bump).
    #[default]
    Triweight,
    /// Exponent 4 (C³ bump).
    Quadweight,
}

impl KernelProfile {
    fn exponent(self) -> i32 {
        match self {
            KernelProfile::Triweight => 3,
            KernelProfile::Quadweight => 4,
        }
    }
}

/// Radially symmetric mollifier with unit integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    radius: f64,
    profile: KernelProfile,
    norm: f64,
}

/// Nodes used by the radial quadrature that checks the normalisation at construction.
const NORMALISATION_NODES: usize = 20_000;

impl Kernel {
    pub fn new(radius: f64, profile: KernelProfile) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidKernel(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let k = profile.exponent() as f64;
        let kernel = Kernel {
            radius,
            profile,
            norm: (k + 1.0) / (PI * radius * radius),
        };
        let mass = kernel.radial_integral(NORMALISATION_NODES);
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidKernel(format!(
                "kernel integrates to {mass}, not 1"
            )));
        }
        Ok(kernel)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn profile(&self) -> KernelProfile {
        self.profile
    }

    /// Normalisation constant `c` in `c (1 - |x|²/R²)^k`.
    pub fn norm_constant(&self) -> f64 {
        self.norm
    }

    /// Midpoint rule for `∫₀^R η(r) 2πr dr`.
    pub fn radial_integral(&self, nodes: usize) -> f64 {
        let h = self.radius / nodes as f64;
        (0..nodes)
            .map(|n| {
                let r = (n as f64 + 0.5) * h;
                self.profile_at(r * r) * 2.0 * PI * r * h
            })
            .sum()
    }

    #[inline]
    fn profile_at(&self, r2: f64) -> f64 {
        let s = r2 / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            self.norm * (1.0 - s).powi(self.profile.exponent())
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        self.profile_at(x[0] * x[0] + x[1] * x[1])
    }

    #[inline]
    pub fn gradient(&self, x: Point) -> [f64; 2] {
        let r2 = self.radius * self.radius;
        let s = (x[0] * x[0] + x[1] * x[1]) / r2;
        if s >= 1.0 {
            return [0.0, 0.0];
        }
        let k = self.profile.exponent();
        let f = -2.0 * self.norm * k as f64 * (1.0 - s).powi(k - 1) / r2;
        [f * x[0], f * x[1]]
    }

    /// `‖η‖_∞ = η(0)`.
    pub fn sup_norm(&self) -> f64 {
        self.norm
    }

    /// Exact Lipschitz constant `max_r |η'(r)|`, attained at `r² = R²/(2k-1)`.
    pub fn lipschitz(&self) -> f64 {
        let k = self.profile.exponent() as f64;
        let s = 1.0 / (2.0 * k - 1.0);
        self.norm * 2.0 * k / self.radius * s.sqrt() * (1.0 - s).powf(k - 1.0)
    }
}

pub fn make_mollifier(radius: f64, profile: KernelProfile) -> Result<Kernel> {
    Kernel::new(radius, profile)
}

/// `ρ*η` and `∇(ρ*η)` sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvField {
    grid: Grid,
    pub values: Vec<f64>,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

impl ConvField {
    pub fn zeros(grid: Grid) -> Self {
        ConvField {
            grid,
            values: vec![0.0; grid.len()],
            grad_x: vec![0.0; grid.len()],
            grad_y: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn gradient(&self, k: usize) -> [f64; 2] {
        [self.grad_x[k], self.grad_y[k]]
    }

    /// Bilinear interpolation of `(value, gradient)` between cell centres; zero outside the grid's
    /// centre hull is never needed because agents stay inside, so the nearest centres are used there.
    pub fn sample(&self, x: Point) -> (f64, [f64; 2]) {
        let g = &self.grid;
        let fx = ((x[0] - g.origin[0]) / g.dx - 0.5).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((x[1] - g.origin[1]) / g.dy - 0.5).clamp(0.0, (g.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(g.nx - 2);
        let j0 = (fy.floor() as usize).min(g.ny - 2);
        let (sx, sy) = (fx - i0 as f64, fy - j0 as f64);
        let k00 = g.idx(i0, j0);
        let (k10, k01, k11) = (k00 + 1, k00 + g.nx, k00 + g.nx + 1);
        let mix = |c: &[f64]| {
            (1.0 - sy) * ((1.0 - sx) * c[k00] + sx * c[k10]) + sy * ((1.0 - sx) * c[k01] + sx * c[k11])
        };
        (mix(&self.values), [mix(&self.grad_x), mix(&self.grad_y)])
    }

    /// `self += a * other`.
    pub fn add_scaled(&mut self, a: f64, other: &ConvField) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        for (x, y) in self.grad_x.iter_mut().zip(&other.grad_x) {
            *x += a * y;
        }
        for (x, y) in self.grad_y.iter_mut().zip(&other.grad_y) {
            *x += a * y;
        }
    }
}

/// One row of the discrete kernel: offsets `dj` and `di ∈ [-half, half]`.
#[derive(Debug, Clone)]
struct StencilRow {
    dj: isize,
    half: isize,
    w: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

/// Kernel sampled on the offsets of a grid, rescaled so that the discrete weights sum to one.
#[derive(Debug, Clone)]
pub struct Stencil {
    grid: Grid,
    kernel: Kernel,
    rows: Vec<StencilRow>,
    reach: [usize; 2],
    scale: f64,
}

impl Stencil {
    pub fn new(grid: &Grid, kernel: &Kernel) -> Result<Self> {
        let spacing = grid.dx.max(grid.dy);
        if kernel.radius < spacing {
            return Err(Error::UnderResolvedKernel {
                radius: kernel.radius,
                spacing,
                required: kernel.radius,
            });
        }
        let ry = (kernel.radius / grid.dy).ceil() as isize;
        let area = grid.cell_area();
        let mut rows = Vec::new();
        let mut total = 0.0;
        let mut reach_x = 0usize;
        for dj in -ry..=ry {
            let y = dj as f64 * grid.dy;
            if y.abs() >= kernel.radius {
                continue;
            }
            let half_width = (kernel.radius * kernel.radius - y * y).sqrt();
            let half = (half_width / grid.dx).ceil() as isize;
            let mut row = StencilRow {
                dj,
                half,
                w: Vec::with_capacity(2 * half as usize + 1),
                gx: Vec::with_capacity(2 * half as usize + 1),
                gy: Vec::with_capacity(2 * half as usize + 1),
            };
            for di in -half..=half {
                let x = [di as f64 * grid.dx, y];
                let e = kernel.eval(x) * area;
                let g = kernel.gradient(x);
                total += e;
                row.w.push(e);
                row.gx.push(g[0] * area);
                row.gy.push(g[1] * area);
            }
            reach_x = reach_x.max(half as usize);
            rows.push(row);
        }
        let scale = 1.0 / total;
        for row in &mut rows {
            for v in row.w.iter_mut().chain(row.gx.iter_mut()).chain(row.gy.iter_mut()) {
                *v *= scale;
            }
        }
        Ok(Stencil {
            grid: *grid,
            kernel: *kernel,
            rows,
            reach: [reach_x, ry as usize],
            scale,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    /// Factor applied to the raw cell-centre samples so that they sum to one.
    pub fn normalisation(&self) -> f64 {
        self.scale
    }

    /// Number of cells covered by the kernel in each direction from the centre cell.
    pub fn reach(&self) -> [usize; 2] {
        self.reach
    }

    /// Convolves a signed cell-average field (zero outside the grid) with the kernel.
    /// The gradient is only computed when `with_gradient` is set; otherwise it stays zero.
    pub fn apply(&self, values: &[f64], with_gradient: bool) -> ConvField {
        let g = self.grid;
        assert_eq!(values.len(), g.len(), "field does not match stencil grid");
        let mut out = ConvField::zeros(g);
        let Some((lo, hi)) = support_box(&g, values) else {
            return out;
        };
        let (nx, ny) = (g.nx as isize, g.ny as isize);
        let oi0 = (lo.0 as isize - self.reach[0] as isize).max(0);
        let oi1 = (hi.0 as isize + self.reach[0] as isize).min(nx - 1);
        let oj0 = (lo.1 as isize - self.reach[1] as isize).max(0);
        let oj1 = (hi.1 as isize + self.reach[1] as isize).min(ny - 1);
        // Input columns that can be nonzero.
        let (ci0, ci1) = (lo.0 as isize, hi.0 as isize);
        for oj in oj0..=oj1 {
            for oi in oi0..=oi1 {
                let mut acc = 0.0;
                let mut ax = 0.0;
                let mut ay = 0.0;
                for row in &self.rows {
                    let sj = oj - row.dj;
                    if sj < lo.1 as isize || sj > hi.1 as isize {
                        continue;
                    }
                    // source column si = oi - di must lie in [ci0, ci1]
                    let di_lo = (oi - ci1).max(-row.half);
                    let di_hi = (oi - ci0).min(row.half);
                    if di_lo > di_hi {
                        continue;
                    }
                    let base = (sj * nx) as usize;
                    let start = (di_lo + row.half) as usize;
                    let end = (di_hi + row.half) as usize;
                    let src0 = oi - di_lo;
                    if with_gradient {
                        for (n, t) in (start..=end).enumerate() {
                            let r = values[base + (src0 - n as isize) as usize];
                            acc += r * row.w[t];
                            ax += r * row.gx[t];
                            ay += r * row.gy[t];
                        }
                    } else {
                        for (n, t) in (start..=end).enumerate() {
                            acc += values[base + (src0 - n as isize) as usize] * row.w[t];
                        }
                    }
                }
                let k = (oj * nx + oi) as usize;
                out.values[k] = acc;
                out.grad_x[k] = ax;
                out.grad_y[k] = ay;
            }
        }
        out
    }
}

/// Bounding box `((i_lo, j_lo), (i_hi, j_hi))` of the nonzero cells.
fn support_box(g: &Grid, values: &[f64]) -> Option<((usize, usize), (usize, usize))> {
    let mut lo = (usize::MAX, usize::MAX);
    let mut hi = (0usize, 0usize);
    for j in 0..g.ny {
        let row = &values[j * g.nx..(j + 1) * g.nx];
        let first = row.iter().position(|&x| x != 0.0);
        if let Some(f) = first {
            let last = row.iter().rposition(|&x| x != 0.0).unwrap_or(f);
            lo = (lo.0.min(f), lo.1.min(j));
            hi = (hi.0.max(last), hi.1.max(j));
        }
    }
    (lo.0 != usize::MAX).then_some((lo, hi))
}

/// Grid convolution `ρ*η` with its gradient.
pub fn convolve(rho: &DensityField, kernel: &Kernel) -> Result<ConvField> {
    let stencil = Stencil::new(rho.grid(), kernel)?;
    Ok(stencil.apply(rho.values(), true))
}

/// Exact convolution of the particle measure with `η` at `x`.
pub fn eval_convolution_at(p: &ParticleEnsemble, kernel: &Kernel, x: Point) -> f64 {
    p.positions()
        .iter()
        .zip(p.weights())
        .map(|(q, w)| w * kernel.eval([x[0] - q[0], x[1] - q[1]]))
        .sum()
}

/// Exact gradient of the particle convolution at `x`.
pub fn eval_convolution_gradient_at(p: &ParticleEnsemble, kernel: &Kernel, x: Point) -> [f64; 2] {
    let mut g = [0.0, 0.0];
    for (q, w) in p.positions().iter().zip(p.weights()) {
        let d = kernel.gradient([x[0] - q[0], x[1] - q[1]]);
        g[0] += w * d[0];
        g[1] += w * d[1];
    }
    g
}

/// Uniform bucket index over weighted points for repeated kernel queries.
/// Buckets have side `R`, so a query only visits the 3×3 block around its own bucket.
#[derive(Debug, Clone)]
pub struct ParticleIndex {
    kernel: Kernel,
    buckets: HashMap<(i64, i64), Vec<(Point, f64)>>,
}

impl ParticleIndex {
    pub fn new(positions: &[Point], weights: &[f64], kernel: &Kernel) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<(Point, f64)>> = HashMap::new();
        let h = kernel.radius;
        for (p, &w) in positions.iter().zip(weights) {
            let key = ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64);
            buckets.entry(key).or_default().push((*p, w));
        }
        ParticleIndex {
            kernel: *kernel,
            buckets,
        }
    }

    pub fn from_ensemble(p: &ParticleEnsemble, kernel: &Kernel) -> Self {
        Self::new(p.positions(), p.weights(), kernel)
    }

    /// `(value, gradient)` of the particle convolution at `x`.
    pub fn query(&self, x: Point) -> (f64, [f64; 2]) {
        let h = self.kernel.radius;
        let (bi, bj) = ((x[0] / h).floor() as i64, (x[1] / h).floor() as i64);
        let mut val = 0.0;
        let mut grad = [0.0, 0.0];
        for dj in -1..=1 {
            for di in -1..=1 {
                if let Some(list) = self.buckets.get(&(bi + di, bj + dj)) {
                    for (q, w) in list {
                        let d = [x[0] - q[0], x[1] - q[1]];
                        val += w * self.kernel.eval(d);
                        let gd = self.kernel.gradient(d);
                        grad[0] += w * gd[0];
                        grad[1] += w * gd[1];
                    }
                }
            }
        }
        (val, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, h: f64) -> Grid {
        Grid::new(n, n, h, h, [0.0, 0.0]).unwrap()
    }

    #[test]
    fn support_and_scaling() {
        let k1 = make_mollifier(1.0, KernelProfile::Triweight).unwrap();
        let k2 = make_mollifier(2.0, KernelProfile::Triweight).unwrap();
        for x in [[1.0, 0.0], [0.8, 0.7], [0.0, -1.5]] {
            assert_eq!(k1.eval(x), 0.0);
            assert_eq!(k1.gradient(x), [0.0, 0.0]);
        }
        assert!((k2.sup_norm() - k1.sup_norm() / 4.0).abs() < 1e-15);
        assert!((k1.sup_norm() - 4.0 / PI).abs() < 1e-15);
        assert!(make_mollifier(0.0, KernelProfile::Triweight).is_err());
        assert!(make_mollifier(-1.0, KernelProfile::Quadweight).is_err());
    }

    #[test]
    fn grid_midpoint_quadrature_of_unit_kernel() {
        let k = make_mollifier(1.0, KernelProfile::Triweight).unwrap();
        let h = 0.01;
        let n = (2.0 / h) as i64;
        let mut sum = 0.0;
        for j in 0..n {
            for i in 0..n {
                let x = [-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h];
                sum += k.eval(x) * h * h;
            }
        }
        assert!((sum - 1.0).abs() < 1e-4, "{sum}");
    }

    #[test]
    fn lipschitz_constant_matches_fine_sampling() {
        for profile in [KernelProfile::Triweight, KernelProfile::Quadweight] {
            let k = make_mollifier(0.7, profile).unwrap();
            let mut best = 0.0f64;
            for n in 0..=100_000 {
                let r = 0.7 * n as f64 / 100_000.0;
                let g = k.gradient([r, 0.0]);
                best = best.max(g[0].abs());
            }
            assert!(best <= k.lipschitz() * (1.0 + 1e-12));
            assert!(best >= k.lipschitz() * (1.0 - 1e-6));
        }
        // closed form for the triweight bump
        let k = make_mollifier(1.3, KernelProfile::Triweight).unwrap();
        let closed = 384.0 / (25.0 * 5f64.sqrt() * PI * 1.3f64.powi(3));
        assert!((k.lipschitz() - closed).abs() < 1e-12 * closed);
    }

    #[test]
    fn zero_density_gives_zero_convolution() {
        let g = grid(20, 0.1);
        let c = convolve(&DensityField::zeros(g), &make_mollifier(0.3, KernelProfile::Triweight).unwrap()).unwrap();
        assert!(c.values.iter().chain(&c.grad_x).chain(&c.grad_y).all(|&v| v == 0.0));
    }

    #[test]
    fn constant_density_is_reproduced_away_from_edges() {
        let g = grid(40, 0.05);
        let rho = DensityField::new(g, vec![0.7; g.len()]).unwrap();
        let k = make_mollifier(0.3, KernelProfile::Triweight).unwrap();
        let c = convolve(&rho, &k).unwrap();
        for j in 7..33 {
            for i in 7..33 {
                let idx = g.idx(i, j);
                assert!((c.values[idx] - 0.7).abs() < 1e-8);
                assert!(c.grad_x[idx].abs() < 1e-10 && c.grad_y[idx].abs() < 1e-10);
            }
        }
    }

    #[test]
    fn point_mass_reproduces_kernel() {
        let h = 0.05;
        let g = grid(41, h);
        let mut vals = vec![0.0; g.len()];
        let c0 = g.idx(20, 20);
        vals[c0] = 1.0 / (h * h);
        let rho = DensityField::new(g, vals).unwrap();
        let k = make_mollifier(0.4, KernelProfile::Triweight).unwrap();
        let c = convolve(&rho, &k).unwrap();
        let x0 = g.center(20, 20);
        for j in 0..41 {
            for i in 0..41 {
                let x = g.center(i, j);
                let exact = k.eval([x[0] - x0[0], x[1] - x0[1]]);
                let got = c.values[g.idx(i, j)];
                assert!((got - exact).abs() <= 2e-2 * exact + 1e-14, "{i},{j}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn under_resolved_kernel_is_rejected() {
        let g = grid(10, 0.5);
        let k = make_mollifier(0.3, KernelProfile::Triweight).unwrap();
        match Stencil::new(&g, &k) {
            Err(Error::UnderResolvedKernel { required, .. }) => assert!((required - 0.3).abs() < 1e-15),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stencil_matches_brute_force_sum() {
        let g = Grid::new(17, 13, 0.1, 0.12, [0.0, 0.0]).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|k| if k % 7 == 0 || k % 5 == 1 { (k as f64).sin().abs() } else { 0.0 }).collect();
        let k = make_mollifier(0.35, KernelProfile::Quadweight).unwrap();
        let st = Stencil::new(&g, &k).unwrap();
        let c = st.apply(&vals, true);
        for oj in 0..g.ny {
            for oi in 0..g.nx {
                let x = g.center(oi, oj);
                let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                for sj in 0..g.ny {
                    for si in 0..g.nx {
                        let y = g.center(si, sj);
                        let d = [x[0] - y[0], x[1] - y[1]];
                        let r = vals[g.idx(si, sj)] * g.cell_area() * st.normalisation();
                        v += r * k.eval(d);
                        let gd = k.gradient(d);
                        gx += r * gd[0];
                        gy += r * gd[1];
                    }
                }
                let o = g.idx(oi, oj);
                assert!((c.values[o] - v).abs() < 1e-12);
                assert!((c.grad_x[o] - gx).abs() < 1e-10);
                assert!((c.grad_y[o] - gy).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn particle_queries_agree_with_direct_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let pos: Vec<Point> = (0..100).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let w: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..0.02)).collect();
        let k = make_mollifier(0.4, KernelProfile::Triweight).unwrap();
        let ens = ParticleEnsemble::new(pos.clone(), w.clone()).unwrap();
        let idx = ParticleIndex::new(&pos, &w, &k);
        for _ in 0..50 {
            let x = [rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2)];
            let mut oracle = 0.0;
            for (p, wi) in pos.iter().zip(&w) {
                oracle += wi * k.eval([x[0] - p[0], x[1] - p[1]]);
            }
            assert!((eval_convolution_at(&ens, &k, x) - oracle).abs() < 1e-14);
            let (val, grad) = idx.query(x);
            assert!((val - oracle).abs() < 1e-14);
            let g = eval_convolution_gradient_at(&ens, &k, x);
            assert!((grad[0] - g[0]).abs() < 1e-12 && (grad[1] - g[1]).abs() < 1e-12);
        }
        let single = ParticleEnsemble::new(vec![[0.2, 0.3]], vec![1.0]).unwrap();
        assert_eq!(eval_convolution_at(&single, &k, [0.2, 0.3]), k.eval([0.0, 0.0]));
        assert_eq!(eval_convolution_at(&single, &k, [0.2, 0.75]), 0.0);
    }
}
