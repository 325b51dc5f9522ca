//! Constants and a posteriori checks for the sup-norm growth estimate of panic-type runs.

use crate::fv_solver::Trajectory;
use crate::models::ModelSpec;
use crate::transport_metrics::BoundReport;

/// Growth rate `C` with `‖ρ(t)‖_∞ ≤ ‖ρ₀‖_∞ e^{Ct}`, together with the constants it is built from.
///
/// `C = 2 Lip(v) Lip(η) M ‖ν‖_∞ + ‖v‖_∞ (‖∂ₓνₓ‖_∞ + ‖∂ᵧν_y‖_∞)`, where `M` is the total
/// initial mass and the derivatives of `ν` are its largest neighbour difference quotients.
pub fn linf_growth_constant(model: &ModelSpec, mass: f64) -> (f64, Vec<(String, f64)>) {
    let mut c = 0.0f64;
    let mut consts = vec![("mass".to_string(), mass)];
    for (i, p) in model.populations.iter().enumerate() {
        let lip_v = p.law.lipschitz();
        let sup_v = p.law.sup_norm();
        let lip_eta = p.kernel.lipschitz();
        let sup_nu = p.nu.sup_norm();
        let q = p.nu.max_difference_quotients();
        let div_nu = q[0][0] + q[1][1];
        let ci = 2.0 * lip_v * lip_eta * mass * sup_nu + sup_v * div_nu;
        consts.extend([
            (format!("lip_v_{i}"), lip_v),
            (format!("sup_v_{i}"), sup_v),
            (format!("lip_eta_{i}"), lip_eta),
            (format!("sup_nu_{i}"), sup_nu),
            (format!("div_nu_{i}"), div_nu),
        ]);
        c = c.max(ci);
    }
    consts.push(("linf_growth".into(), c));
    (c, consts)
}

/// Checks `‖ρ(t)‖_∞ ≤ ‖ρ₀‖_∞ e^{Ct}` on every metric row after the first; `lhs`/`rhs` are taken
/// at the row with the largest ratio.
pub fn linf_growth_report(traj: &Trajectory, model: &ModelSpec, margin: f64) -> BoundReport {
    let mass: f64 = traj.initial_mass.iter().sum();
    let (c, consts) = linf_growth_constant(model, mass);
    let linf0: Vec<f64> = (0..model.populations.len())
        .map(|p| traj.metrics_for(p).next().map_or(0.0, |r| r.linf))
        .collect();
    let mut worst = (0.0, 0.0, f64::NEG_INFINITY);
    for r in traj.metrics.iter().filter(|r| r.t > 0.0) {
        let rhs = linf0[r.pop] * (c * r.t).exp();
        let ratio = if rhs > 0.0 { r.linf / rhs } else if r.linf > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > worst.2 {
            worst = (r.linf, rhs, ratio);
        }
    }
    BoundReport::new("linf_growth", worst.0, worst.1, margin, consts)
}
