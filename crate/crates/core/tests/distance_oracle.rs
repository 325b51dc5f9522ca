//! Exit distances against Bellman-Ford relaxation and the closed-form octile distance.

use crowdlab::geometry::distance_to_exits;
use crowdlab::{DomainMask, Grid};
use proptest::prelude::*;

fn relaxed(mask: &DomainMask) -> Vec<f64> {
    let g = *mask.grid();
    let w = mask.walkable();
    let ok = |i: isize, j: isize| i >= 0 && j >= 0 && (i as usize) < g.nx && (j as usize) < g.ny && w[g.idx(i as usize, j as usize)];
    let mut d = vec![f64::INFINITY; g.len()];
    for &k in mask.exits().iter().flatten() {
        d[k] = 0.0;
    }
    loop {
        let mut changed = false;
        for k in 0..g.len() {
            if !w[k] {
                continue;
            }
            let (i, j) = g.ij(k);
            let (i, j) = (i as isize, j as isize);
            for di in -1isize..=1 {
                for dj in -1isize..=1 {
                    if (di, dj) == (0, 0) || !ok(i + di, j + dj) {
                        continue;
                    }
                    if di != 0 && dj != 0 && !(ok(i + di, j) && ok(i, j + dj)) {
                        continue;
                    }
                    let step = (di as f64 * g.dx).hypot(dj as f64 * g.dy);
                    let nk = g.idx((i + di) as usize, (j + dj) as usize);
                    if d[nk] + step < d[k] - 1e-15 {
                        d[k] = d[nk] + step;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return d;
        }
    }
}

#[test]
fn open_grid_matches_octile_distance() {
    let g = Grid::new(9, 7, 0.5, 0.3, [0.0, 0.0]).unwrap();
    let exit = g.idx(2, 5);
    let mask = DomainMask::new(g, vec![true; g.len()], vec![vec![exit]]).unwrap();
    let d = distance_to_exits(&mask);
    let diag = 0.5f64.hypot(0.3);
    for k in 0..g.len() {
        let (i, j) = g.ij(k);
        let (a, b) = (i.abs_diff(2) as f64, j.abs_diff(5) as f64);
        let m = a.min(b);
        let expect = m * diag + (a - m) * 0.5 + (b - m) * 0.3;
        assert!((d[k] - expect).abs() < 1e-12, "cell ({i},{j}): {} vs {expect}", d[k]);
    }
}

proptest! {
    #[test]
    fn random_masks_match_relaxation(
        bits in proptest::collection::vec(prop::bool::weighted(0.75), 48),
        exit_pick in 0usize..48,
        dy in 0.2f64..1.5,
    ) {
        let g = Grid::new(8, 6, 1.0, dy, [0.0, 0.0]).unwrap();
        let mut walk = bits;
        walk[exit_pick] = true;
        let mask = DomainMask::new(g, walk.clone(), vec![vec![exit_pick]]).unwrap();
        let fast = distance_to_exits(&mask);
        let slow = relaxed(&mask);
        for k in 0..g.len() {
            if slow[k].is_infinite() {
                prop_assert!(fast[k].is_infinite());
            } else {
                prop_assert!((fast[k] - slow[k]).abs() < 1e-12);
            }
        }
    }
}
