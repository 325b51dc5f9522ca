//! Scalar summaries of runs: lanes in a density profile and evacuation times.

use serde::{Deserialize, Serialize};

use crate::fv_solver::{DensityField, MetricRow};

/// Direction along which lanes run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    X,
    Y,
}

/// Average of `ρ` along `axis` over the cells whose along-axis index lies in `range`, as a
/// function of the transverse index.
pub fn transverse_profile(rho: &DensityField, axis: Axis, range: Option<(usize, usize)>) -> Vec<f64> {
    let g = rho.grid();
    let v = rho.values();
    match axis {
        Axis::X => {
            let (a, b) = range.unwrap_or((0, g.nx));
            (0..g.ny)
                .map(|j| (a..b).map(|i| v[g.idx(i, j)]).sum::<f64>() / (b - a).max(1) as f64)
                .collect()
        }
        Axis::Y => {
            let (a, b) = range.unwrap_or((0, g.ny));
            (0..g.nx)
                .map(|i| (a..b).map(|j| v[g.idx(i, j)]).sum::<f64>() / (b - a).max(1) as f64)
                .collect()
        }
    }
}

/// Indices of the strict local maxima of `profile` above `threshold·max`. A plateau counts once
/// (at its middle) when both neighbours of the plateau are lower; profile ends count as lower.
pub fn profile_maxima(profile: &[f64], threshold: f64) -> Vec<usize> {
    let top = profile.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Vec::new();
    }
    let cut = threshold * top;
    let mut out = Vec::new();
    let n = profile.len();
    let mut k = 0;
    while k < n {
        let mut e = k;
        while e + 1 < n && profile[e + 1] == profile[k] {
            e += 1;
        }
        let left_lower = k == 0 || profile[k - 1] < profile[k];
        let right_lower = e + 1 == n || profile[e + 1] < profile[k];
        if left_lower && right_lower && profile[k] > cut {
            out.push((k + e) / 2);
        }
        k = e + 1;
    }
    out
}

/// Number of lanes: maxima of the transverse profile above `threshold` times its maximum.
pub fn lane_count(rho: &DensityField, axis: Axis, threshold: f64) -> usize {
    profile_maxima(&transverse_profile(rho, axis, None), threshold).len()
}

/// First time a remaining-mass series drops to `fraction` of its initial value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvacuationTime {
    /// `+∞` when the level is never reached.
    pub time: f64,
    pub reached: bool,
}

/// Linear interpolation between the samples that bracket the crossing.
pub fn evacuation_time(remaining: &[(f64, f64)], fraction: f64) -> EvacuationTime {
    let never = EvacuationTime {
        time: f64::INFINITY,
        reached: false,
    };
    let Some(&(_, m0)) = remaining.first() else {
        return never;
    };
    let level = fraction * m0;
    for w in remaining.windows(2) {
        let ((t0, a), (t1, b)) = (w[0], w[1]);
        if a <= level {
            return EvacuationTime { time: t0, reached: true };
        }
        if b <= level {
            let s = if a > b { (a - level) / (a - b) } else { 1.0 };
            return EvacuationTime {
                time: t0 + s * (t1 - t0),
                reached: true,
            };
        }
    }
    if remaining.len() == 1 && m0 <= level && m0 > 0.0 {
        return EvacuationTime { time: remaining[0].0, reached: true };
    }
    never
}

/// Remaining in-room fraction `1 − evac_frac` of one population over time.
pub fn remaining_series(metrics: &[MetricRow], pop: usize) -> Vec<(f64, f64)> {
    metrics
        .iter()
        .filter(|r| r.pop == pop)
        .map(|r| (r.t, 1.0 - r.evac_frac))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Grid;

    #[test]
    fn lanes_of_constructed_profiles() {
        let g = Grid::new(40, 30, 0.1, 0.1, [0.0, 0.0]).unwrap();
        let strip = DensityField::from_fn(g, |x| if x[1] > 0.5 && x[1] < 2.5 { 0.7 } else { 0.0 });
        assert_eq!(lane_count(&strip, Axis::X, 0.2), 1);
        let bumps = DensityField::from_fn(g, |x| {
            [0.5, 1.5, 2.5].iter().map(|c| (-((x[1] - c) / 0.15).powi(2)).exp()).sum()
        });
        assert_eq!(lane_count(&bumps, Axis::X, 0.2), 3);
        assert_eq!(lane_count(&DensityField::zeros(g), Axis::X, 0.2), 0);
        // lanes along y: bumps in x
        let cols = DensityField::from_fn(g, |x| [1.0, 3.0].iter().map(|c| (-((x[0] - c) / 0.2).powi(2)).exp()).sum());
        assert_eq!(lane_count(&cols, Axis::Y, 0.2), 2);
    }

    #[test]
    fn threshold_drops_small_maxima() {
        assert_eq!(profile_maxima(&[0.0, 1.0, 0.0, 0.1, 0.0], 0.2), vec![1]);
        assert_eq!(profile_maxima(&[0.0, 1.0, 0.0, 0.1, 0.0], 0.05), vec![1, 3]);
        assert_eq!(profile_maxima(&[0.0, 1.0, 1.0, 1.0, 0.0], 0.1), vec![2]);
        // a shoulder is not a maximum
        assert_eq!(profile_maxima(&[0.0, 1.0, 1.0, 2.0, 0.0], 0.1), vec![3]);
    }

    #[test]
    fn evacuation_times() {
        let flat: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 1.0)).collect();
        let e = evacuation_time(&flat, 0.5);
        assert!(!e.reached && e.time.is_infinite());
        let lin: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64 * 0.7, 1.0 - k as f64 * 0.07)).collect();
        let e = evacuation_time(&lin, 0.5);
        assert!(e.reached && (e.time - 5.0).abs() < 1e-12, "{e:?}");
        assert!(!evacuation_time(&[], 0.5).reached);
    }
}
