//! Exact W1 against brute-force matching of unit atoms, and metric properties.

use crowdlab::transport_metrics::{w1_1d, w1_discrete, DiscreteMeasure};
use crowdlab::Point;
use proptest::prelude::*;

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Integer weights are split into unit atoms; an optimal plan between integer marginals can be
/// taken integral, so the best matching of unit atoms is the transport cost.
fn matching_cost(a: &[(Point, u32)], b: &[(Point, u32)]) -> f64 {
    let xs: Vec<Point> = a.iter().flat_map(|&(p, n)| std::iter::repeat(p).take(n as usize)).collect();
    let ys: Vec<Point> = b.iter().flat_map(|&(p, n)| std::iter::repeat(p).take(n as usize)).collect();
    let mut idx: Vec<usize> = (0..ys.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut idx, 0, &mut |perm| {
        let c: f64 = perm.iter().enumerate().map(|(i, &j)| dist(xs[i], ys[j])).sum();
        best = best.min(c);
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn measure(atoms: &[(Point, u32)]) -> DiscreteMeasure {
    DiscreteMeasure::new(atoms.iter().map(|a| a.0).collect(), atoms.iter().map(|a| a.1 as f64).collect()).unwrap()
}

/// Splits `total` units into `n` positive parts, driven by `cuts`.
fn parts(total: u32, cuts: &[u32]) -> Vec<u32> {
    let mut c: Vec<u32> = cuts.iter().map(|x| 1 + x % (total - 1)).collect();
    c.sort_unstable();
    c.dedup();
    let mut out = Vec::new();
    let mut prev = 0;
    for x in c.into_iter().chain([total]) {
        out.push(x - prev);
        prev = x;
    }
    out
}

fn point() -> impl Strategy<Value = Point> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(x, y)| [x, y])
}

fn cloud() -> impl Strategy<Value = Vec<(Point, f64)>> {
    proptest::collection::vec((point(), 0.1f64..2.0), 1..7)
}

fn normalized(atoms: &[(Point, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(atoms).unwrap().normalized()
}

#[test]
fn hand_computed_cases() {
    let a = measure(&[([0.0, 0.0], 1), ([2.0, 0.0], 1)]);
    let b = measure(&[([0.0, 1.0], 1), ([2.0, 1.0], 1)]);
    assert!((w1_discrete(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    let c = measure(&[([1.0, 0.0], 2)]);
    assert!((w1_discrete(&a, &c).unwrap() - 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matches_unit_matching(
        pa in proptest::collection::vec(point(), 1..4),
        pb in proptest::collection::vec(point(), 1..4),
        ca in proptest::collection::vec(0u32..100, 3),
        cb in proptest::collection::vec(0u32..100, 3),
    ) {
        let total = 6;
        let wa = parts(total, &ca[..pa.len() - 1]);
        let wb = parts(total, &cb[..pb.len() - 1]);
        let a: Vec<(Point, u32)> = pa.iter().copied().zip(wa).collect();
        let b: Vec<(Point, u32)> = pb.iter().copied().zip(wb).collect();
        let exact = matching_cost(&a, &b);
        let got = w1_discrete(&measure(&a), &measure(&b)).unwrap();
        prop_assert!((got - exact).abs() <= 1e-9 * (1.0 + exact), "{got} vs {exact}");
    }

    #[test]
    fn metric_axioms(a in cloud(), b in cloud(), c in cloud()) {
        let (a, b, c) = (normalized(&a), normalized(&b), normalized(&c));
        let ab = w1_discrete(&a, &b).unwrap();
        let ba = w1_discrete(&b, &a).unwrap();
        let bc = w1_discrete(&b, &c).unwrap();
        let ac = w1_discrete(&a, &c).unwrap();
        prop_assert!(ab >= -1e-12);
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert!(w1_discrete(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn translation_costs_its_length(a in cloud(), v in point()) {
        let mu = normalized(&a);
        let moved = DiscreteMeasure::new(
            mu.points().iter().map(|p| [p[0] + v[0], p[1] + v[1]]).collect(),
            mu.weights().to_vec(),
        ).unwrap();
        let w = w1_discrete(&mu, &moved).unwrap();
        prop_assert!((w - v[0].hypot(v[1])).abs() < 1e-9);
    }

    #[test]
    fn lipschitz_functions_give_lower_bounds(a in cloud(), b in cloud(), c in point(), e in 0.0f64..6.3) {
        let (mu, nu) = (normalized(&a), normalized(&b));
        let w = w1_discrete(&mu, &nu).unwrap();
        let dir = [e.cos(), e.sin()];
        let f_lin = |p: Point| dir[0] * p[0] + dir[1] * p[1];
        let f_cone = |p: Point| dist(p, c);
        for f in [&f_lin as &dyn Fn(Point) -> f64, &f_cone] {
            prop_assert!((mu.integrate(f) - nu.integrate(f)).abs() <= w + 1e-9);
        }
    }

    #[test]
    fn collinear_atoms_agree_with_the_line_formula(
        xa in proptest::collection::vec((-5.0f64..5.0, 0.1f64..1.0), 1..8),
        xb in proptest::collection::vec((-5.0f64..5.0, 0.1f64..1.0), 1..8),
    ) {
        let plane = |v: &[(f64, f64)]| normalized(&v.iter().map(|&(x, m)| ([x, 0.0], m)).collect::<Vec<_>>());
        let line = |v: &[(f64, f64)]| {
            let s: f64 = v.iter().map(|a| a.1).sum();
            v.iter().map(|&(x, m)| (x, m / s)).collect::<Vec<_>>()
        };
        let w2d = w1_discrete(&plane(&xa), &plane(&xb)).unwrap();
        let w1d = w1_1d(&line(&xa), &line(&xb)).unwrap();
        prop_assert!((w2d - w1d).abs() < 1e-9);
    }
}
