//! Uniform grids, walkable-region masks and preferred-direction fields.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fv_solver::DensityField;

pub type Point = [f64; 2];

/// Cell-centred uniform grid. Cell `(i, j)` has centre `origin + ((i+½)dx, (j+½)dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: Point,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, origin: Point) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3x3 cells, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell widths must be positive, got dx={dx}, dy={dy}"
            )));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid {
            nx,
            ny,
            dx,
            dy,
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.dx,
            self.origin[1] + (j as f64 + 0.5) * self.dy,
        ]
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.nx as f64 * self.dx, self.ny as f64 * self.dy]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Cell containing `x`, if any.
    pub fn locate(&self, x: Point) -> Option<(usize, usize)> {
        let fx = (x[0] - self.origin[0]) / self.dx;
        let fy = (x[1] - self.origin[1]) / self.dy;
        if fx < 0.0 || fy < 0.0 || !fx.is_finite() || !fy.is_finite() {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    /// Evaluates `f` at every cell centre, row by row from the bottom.
    pub fn map_centers<T>(&self, mut f: impl FnMut(Point) -> T) -> Vec<T> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.ny {
            for i in 0..self.nx {
                out.push(f(self.center(i, j)));
            }
        }
        out
    }

    /// Flat indices of cells whose centre satisfies `pred`.
    pub fn cells_where(&self, mut pred: impl FnMut(Point) -> bool) -> Vec<usize> {
        (0..self.len())
            .filter(|&k| {
                let (i, j) = self.ij(k);
                pred(self.center(i, j))
            })
            .collect()
    }

    /// True when the cell lies within `width` cells of the grid boundary.
    pub fn near_edge(&self, k: usize, width: usize) -> bool {
        let (i, j) = self.ij(k);
        i < width || j < width || i + width >= self.nx || j + width >= self.ny
    }

    pub(crate) fn check_same(&self, other: &Grid) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                found: other.shape(),
            });
        }
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
        if !(close(self.dx, other.dx)
            && close(self.dy, other.dy)
            && close(self.origin[0], other.origin[0])
            && close(self.origin[1], other.origin[1]))
        {
            return Err(Error::InvalidGrid(
                "grids have the same shape but different geometry".into(),
            ));
        }
        Ok(())
    }
}

/// Walkable region and exit cells on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMask {
    grid: Grid,
    walkable: Vec<bool>,
    exits: Vec<Vec<usize>>,
}

impl DomainMask {
    pub fn new(grid: Grid, walkable: Vec<bool>, exits: Vec<Vec<usize>>) -> Result<Self> {
        if walkable.len() != grid.len() {
            return Err(Error::InvalidMask(format!(
                "mask has {} cells, grid has {}",
                walkable.len(),
                grid.len()
            )));
        }
        if !walkable.iter().any(|&w| w) {
            return Err(Error::InvalidMask("no walkable cell".into()));
        }
        for set in &exits {
            for &k in set {
                if k >= grid.len() || !walkable[k] {
                    return Err(Error::InvalidMask(format!(
                        "exit cell {k} is not a walkable cell"
                    )));
                }
            }
        }
        Ok(DomainMask {
            grid,
            walkable,
            exits,
        })
    }

    /// Every cell walkable, no exits.
    pub fn open(grid: Grid) -> Self {
        DomainMask {
            grid,
            walkable: vec![true; grid.len()],
            exits: Vec::new(),
        }
    }

    /// Parses rows of `0`/`1` characters, top row first. Blank lines are ignored.
    pub fn from_bitmap(
        text: &str,
        dx: f64,
        dy: f64,
        origin: Point,
        exits: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        let ny = rows.len();
        let nx = rows.first().map_or(0, |r| r.chars().count());
        let grid = Grid::new(nx, ny, dx, dy, origin)?;
        let mut walkable = vec![false; grid.len()];
        for (r, row) in rows.iter().enumerate() {
            if row.chars().count() != nx {
                return Err(Error::InvalidMask(format!(
                    "bitmap row {r} has {} columns, expected {nx}",
                    row.chars().count()
                )));
            }
            let j = ny - 1 - r;
            for (i, c) in row.chars().enumerate() {
                walkable[grid.idx(i, j)] = match c {
                    '1' => true,
                    '0' => false,
                    other => {
                        return Err(Error::InvalidMask(format!(
                            "unexpected character {other:?} in bitmap"
                        )))
                    }
                };
            }
        }
        DomainMask::new(grid, walkable, exits)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn walkable(&self) -> &[bool] {
        &self.walkable
    }

    pub fn exits(&self) -> &[Vec<usize>] {
        &self.exits
    }

    pub fn is_walkable(&self, i: usize, j: usize) -> bool {
        self.walkable[self.grid.idx(i, j)]
    }

    /// Walkability with everything outside the grid treated as wall.
    fn walkable_at(&self, i: isize, j: isize) -> bool {
        i >= 0
            && j >= 0
            && (i as usize) < self.grid.nx
            && (j as usize) < self.grid.ny
            && self.walkable[self.grid.idx(i as usize, j as usize)]
    }
}

/// Per-cell vector field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::InvalidModel(format!(
                "vector field needs {} entries per component",
                grid.len()
            )));
        }
        if u.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidModel("vector field has non-finite entries".into()));
        }
        Ok(VectorField { grid, u, v })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            u: vec![0.0; grid.len()],
            v: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: [f64; 2]) -> Self {
        VectorField {
            grid,
            u: vec![value[0]; grid.len()],
            v: vec![value[1]; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut(Point) -> [f64; 2]) -> Self {
        let vals = grid.map_centers(&mut f);
        VectorField {
            grid,
            u: vals.iter().map(|w| w[0]).collect(),
            v: vals.iter().map(|w| w[1]).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.u[k], self.v[k]]
    }

    /// Bilinear interpolation between cell centres, constant beyond the outermost centres.
    pub fn sample(&self, x: Point) -> [f64; 2] {
        let g = &self.grid;
        let fx = ((x[0] - g.origin[0]) / g.dx - 0.5).clamp(0.0, (g.nx - 1) as f64);
        let fy = ((x[1] - g.origin[1]) / g.dy - 0.5).clamp(0.0, (g.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(g.nx - 2);
        let j0 = (fy.floor() as usize).min(g.ny - 2);
        let (sx, sy) = (fx - i0 as f64, fy - j0 as f64);
        let k00 = g.idx(i0, j0);
        let k10 = k00 + 1;
        let k01 = k00 + g.nx;
        let k11 = k01 + 1;
        let mix = |c: &[f64]| {
            (1.0 - sy) * ((1.0 - sx) * c[k00] + sx * c[k10]) + sy * ((1.0 - sx) * c[k01] + sx * c[k11])
        };
        [mix(&self.u), mix(&self.v)]
    }

    /// Largest Euclidean norm over cells.
    pub fn sup_norm(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.hypot(*b))
            .fold(0.0, f64::max)
    }

    /// Largest absolute value of each component: `[max |u|, max |v|]`.
    pub fn component_sup(&self) -> [f64; 2] {
        let m = |c: &[f64]| c.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        [m(&self.u), m(&self.v)]
    }

    /// Maximal neighbour difference quotients `[[|du/dx|, |du/dy|], [|dv/dx|, |dv/dy|]]`.
    pub fn max_difference_quotients(&self) -> [[f64; 2]; 2] {
        let g = &self.grid;
        let quot = |c: &[f64]| {
            let mut qx = 0.0f64;
            let mut qy = 0.0f64;
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let k = g.idx(i, j);
                    if i + 1 < g.nx {
                        qx = qx.max((c[k + 1] - c[k]).abs() / g.dx);
                    }
                    if j + 1 < g.ny {
                        qy = qy.max((c[k + g.nx] - c[k]).abs() / g.dy);
                    }
                }
            }
            [qx, qy]
        };
        [quot(&self.u), quot(&self.v)]
    }

    /// Upper bound on the Lipschitz constant of the bilinear interpolant (Frobenius norm of the
    /// componentwise maximal difference quotients).
    pub fn lipschitz_bound(&self) -> f64 {
        let q = self.max_difference_quotients();
        (q[0][0].powi(2) + q[0][1].powi(2) + q[1][0].powi(2) + q[1][1].powi(2)).sqrt()
    }
}

/// Parameters of the preferred-direction construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionOptions {
    /// Half-width (length units) of the box filter applied to the distance map; 0 disables it.
    pub smoothing: f64,
    /// Minimal component along the inward wall normal at wall-adjacent cells.
    pub entering_min: f64,
}

impl Default for DirectionOptions {
    fn default() -> Self {
        DirectionOptions {
            smoothing: 0.0,
            entering_min: 0.0,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapEntry(f64, usize);

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(self.1.cmp(&other.1))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBOURS_8: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Graph distance from every walkable cell to the nearest exit cell.
///
/// Moves go to the 8 neighbours with weights dx, dy and the diagonal; a diagonal move is allowed
/// only when both cells it cuts past are walkable. Non-walkable and unreachable cells get `inf`.
pub fn distance_to_exits(mask: &DomainMask) -> Vec<f64> {
    let g = mask.grid;
    let diag = g.dx.hypot(g.dy);
    let mut dist = vec![f64::INFINITY; g.len()];
    let mut heap = BinaryHeap::new();
    for &k in mask.exits.iter().flatten() {
        if dist[k] > 0.0 {
            dist[k] = 0.0;
            heap.push(HeapEntry(0.0, k));
        }
    }
    while let Some(HeapEntry(d, k)) = heap.pop() {
        if d > dist[k] {
            continue;
        }
        let (i, j) = g.ij(k);
        let (i, j) = (i as isize, j as isize);
        for (di, dj) in NEIGHBOURS_8 {
            let (ni, nj) = (i + di, j + dj);
            if !mask.walkable_at(ni, nj) {
                continue;
            }
            let w = match (di != 0, dj != 0) {
                (true, true) => {
                    if !(mask.walkable_at(i + di, j) && mask.walkable_at(i, j + dj)) {
                        continue;
                    }
                    diag
                }
                (true, false) => g.dx,
                _ => g.dy,
            };
            let nk = g.idx(ni as usize, nj as usize);
            let nd = d + w;
            if nd < dist[nk] {
                dist[nk] = nd;
                heap.push(HeapEntry(nd, nk));
            }
        }
    }
    dist
}

/// Averages `values` over a `(2h+1)`-cell window along one axis, using walkable cells only.
fn box_filter_axis(mask: &DomainMask, values: &[f64], h: usize, along_x: bool) -> Vec<f64> {
    let g = mask.grid;
    let mut out = values.to_vec();
    for k in 0..g.len() {
        if !mask.walkable[k] {
            continue;
        }
        let (i, j) = g.ij(k);
        let (pos, len) = if along_x { (i, g.nx) } else { (j, g.ny) };
        let lo = pos.saturating_sub(h);
        let hi = (pos + h).min(len - 1);
        let mut sum = 0.0;
        let mut count = 0usize;
        for p in lo..=hi {
            let q = if along_x { g.idx(p, j) } else { g.idx(i, p) };
            if mask.walkable[q] {
                sum += values[q];
                count += 1;
            }
        }
        out[k] = sum / count as f64;
    }
    out
}

/// Unit field of steepest descent of the (optionally smoothed) distance to the exits, projected
/// at wall-adjacent cells so that it never points into a wall. Zero on non-walkable cells.
pub fn preferred_direction_field(mask: &DomainMask, opts: &DirectionOptions) -> Result<VectorField> {
    if mask.exits.iter().all(|e| e.is_empty()) {
        return Err(Error::InvalidMask(
            "preferred direction needs at least one exit cell".into(),
        ));
    }
    if !(opts.smoothing >= 0.0) || !(0.0..=1.0).contains(&opts.entering_min) {
        return Err(Error::InvalidMask(format!(
            "smoothing must be >= 0 and entering_min in [0, 1], got {} and {}",
            opts.smoothing, opts.entering_min
        )));
    }
    let g = mask.grid;
    let mut dist = distance_to_exits(mask);
    let unreachable: Vec<usize> = (0..g.len())
        .filter(|&k| mask.walkable[k] && !dist[k].is_finite())
        .collect();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected { cells: unreachable });
    }
    let hx = (opts.smoothing / g.dx).round() as usize;
    let hy = (opts.smoothing / g.dy).round() as usize;
    if hx > 0 {
        dist = box_filter_axis(mask, &dist, hx, true);
    }
    if hy > 0 {
        dist = box_filter_axis(mask, &dist, hy, false);
    }

    let mut field = VectorField::zeros(g);
    for k in 0..g.len() {
        if !mask.walkable[k] {
            continue;
        }
        let (i, j) = g.ij(k);
        let (ii, jj) = (i as isize, j as isize);
        let d = |a: isize, b: isize| dist[g.idx(a as usize, b as usize)];
        let partial = |fwd: bool, bwd: bool, df: f64, db: f64, h: f64| match (fwd, bwd) {
            (true, true) => (df - db) / (2.0 * h),
            (true, false) => (df - dist[k]) / h,
            (false, true) => (dist[k] - db) / h,
            (false, false) => 0.0,
        };
        let (ex, wx) = (mask.walkable_at(ii + 1, jj), mask.walkable_at(ii - 1, jj));
        let (ny_, sy) = (mask.walkable_at(ii, jj + 1), mask.walkable_at(ii, jj - 1));
        let gx = partial(
            ex,
            wx,
            if ex { d(ii + 1, jj) } else { 0.0 },
            if wx { d(ii - 1, jj) } else { 0.0 },
            g.dx,
        );
        let gy = partial(
            ny_,
            sy,
            if ny_ { d(ii, jj + 1) } else { 0.0 },
            if sy { d(ii, jj - 1) } else { 0.0 },
            g.dy,
        );
        let mut dir = [-gx, -gy];
        let norm = dir[0].hypot(dir[1]);
        if norm > 1e-14 {
            dir = [dir[0] / norm, dir[1] / norm];
        } else {
            dir = fallback_direction(mask, &dist, i, j);
        }
        dir = project_entering(mask, i, j, dir, opts.entering_min);
        field.u[k] = dir[0];
        field.v[k] = dir[1];
    }
    Ok(field)
}

/// Direction used where the distance map is locally flat: towards the lowest walkable neighbour,
/// or away from the walls when the cell is itself a local minimum.
fn fallback_direction(mask: &DomainMask, dist: &[f64], i: usize, j: usize) -> [f64; 2] {
    let g = mask.grid;
    let here = dist[g.idx(i, j)];
    let (ii, jj) = (i as isize, j as isize);
    let mut best: Option<(f64, [f64; 2])> = None;
    let mut away = [0.0, 0.0];
    for (di, dj) in NEIGHBOURS_8 {
        if mask.walkable_at(ii + di, jj + dj) {
            let nd = dist[g.idx((ii + di) as usize, (jj + dj) as usize)];
            let off = [di as f64 * g.dx, dj as f64 * g.dy];
            let len = off[0].hypot(off[1]);
            if nd < here && best.is_none_or(|(b, _)| nd < b) {
                best = Some((nd, [off[0] / len, off[1] / len]));
            }
        } else {
            away[0] -= di as f64;
            away[1] -= dj as f64;
        }
    }
    if let Some((_, dir)) = best {
        return dir;
    }
    let n = away[0].hypot(away[1]);
    if n > 0.0 {
        [away[0] / n, away[1] / n]
    } else {
        [1.0, 0.0]
    }
}

/// At cells touching a wall through one of their four faces, turns the direction so that its
/// component along each blocked axis points away from the wall by at least `entering_min`.
/// Keeps unit norm.
fn project_entering(mask: &DomainMask, i: usize, j: usize, dir: [f64; 2], entering_min: f64) -> [f64; 2] {
    let (ii, jj) = (i as isize, j as isize);
    // inward sign per axis: +1 wall on the minus side, -1 wall on the plus side, 0 free,
    // None when walled on both sides
    let axis = |plus: bool, minus: bool| -> Option<f64> {
        match (plus, minus) {
            (true, true) => Some(0.0),
            (false, true) => Some(-1.0),
            (true, false) => Some(1.0),
            (false, false) => None,
        }
    };
    let sx = axis(mask.walkable_at(ii + 1, jj), mask.walkable_at(ii - 1, jj));
    let sy = axis(mask.walkable_at(ii, jj + 1), mask.walkable_at(ii, jj - 1));
    let m = entering_min;
    let violates = |c: f64, s: Option<f64>| match s {
        Some(s) if s != 0.0 => c * s < m,
        Some(_) => false,
        None => c != 0.0,
    };
    let (vx, vy) = (violates(dir[0], sx), violates(dir[1], sy));
    let fixed = |s: Option<f64>| s.map_or(0.0, |s| s * m);
    let other = |c: f64| if c == 0.0 { 0.0 } else { c.signum() * (1.0 - m * m).sqrt() };
    let out = match (vx, vy) {
        (false, false) => return dir,
        (true, false) => [fixed(sx), if sx.is_none() { dir[1].signum() } else { other(dir[1]) }],
        (false, true) => [if sy.is_none() { dir[0].signum() } else { other(dir[0]) }, fixed(sy)],
        (true, true) => [sx.unwrap_or(0.0), sy.unwrap_or(0.0)],
    };
    let len = out[0].hypot(out[1]);
    if len > 1e-14 {
        [out[0] / len, out[1] / len]
    } else {
        // pointed straight into the wall: use the inward normal
        let n = [sx.unwrap_or(0.0), sy.unwrap_or(0.0)];
        let l = n[0].hypot(n[1]);
        if l > 0.0 { [n[0] / l, n[1] / l] } else { dir }
    }
}

/// True iff every non-walkable cell carries density at most `tol`.
pub fn is_support_contained(rho: &DensityField, mask: &DomainMask, tol: f64) -> Result<bool> {
    mask.grid.check_same(rho.grid())?;
    Ok(rho
        .values()
        .iter()
        .zip(&mask.walkable)
        .all(|(&r, &w)| w || r <= tol))
}
