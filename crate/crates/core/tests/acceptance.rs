//! Acceptance gate: every criterion at its stated tolerance, one report line each.

use std::io::Write;

use crowdlab::harness::verify::criterion;

fn check(id: u8) {
    let r = criterion(id);
    // written past the test harness capture so the line shows up in every run
    let _ = writeln!(std::io::stderr(), "{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn criterion_01_mass_and_runtime() {
    check(1);
}

#[test]
fn criterion_02_density_extremes() {
    check(2);
}

#[test]
fn criterion_03_sup_norm_growth() {
    check(3);
}

#[test]
fn criterion_04_total_variation() {
    check(4);
}

#[test]
fn criterion_05_kernel_stability() {
    check(5);
}

#[test]
fn criterion_06_l1_contraction() {
    check(6);
}

#[test]
fn criterion_07_exact_w1() {
    check(7);
}

#[test]
fn criterion_08_w1_stability() {
    check(8);
}

#[test]
fn criterion_09_particle_consistency() {
    check(9);
}

#[test]
fn criterion_10_gateaux_rate() {
    check(10);
}

#[test]
fn criterion_11_optimality_residual() {
    check(11);
}

#[test]
fn criterion_12_qualitative_patterns() {
    check(12);
}
