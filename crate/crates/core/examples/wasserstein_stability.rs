//! Particles transported by a velocity that reads a prescribed driving measure. Two runs that
//! start from different clouds and are driven by different measures stay within the a priori
//! Wasserstein bound; below the horizon `T*` the driver-to-solution map halves distances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdlab::harness::verify::{contraction_horizon, driven_constants, driven_velocity};
use crowdlab::lagrangian::{transport_driven, MeasurePath};
use crowdlab::transport_metrics::{w1_discrete, DiscreteMeasure};
use crowdlab::ParticleEnsemble;

fn cloud(rng: &mut ChaCha8Rng, n: usize, c: [f64; 2]) -> crowdlab::Result<ParticleEnsemble> {
    let pts = (0..n).map(|_| [c[0] + rng.gen_range(-1.0..1.0), c[1] + rng.gen_range(-1.0..1.0)]).collect();
    ParticleEnsemble::new(pts, vec![1.0 / n as f64; n])
}

fn w1(a: &ParticleEnsemble, b: &ParticleEnsemble) -> crowdlab::Result<f64> {
    w1_discrete(&DiscreteMeasure::from_ensemble(a)?, &DiscreteMeasure::from_ensemble(b)?)
}

fn main() -> crowdlab::Result<()> {
    let vel = driven_velocity()?;
    let (c, c_prime) = driven_constants(&vel);
    let t_star = contraction_horizon(c, c_prime);
    println!("C = {c:.4}, C' = {c_prime:.4}, T* = {t_star:.4}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (t_end, dt) = (1.0, 0.02);
    for trial in 0..5 {
        let rho = cloud(&mut rng, 150, [5.0, 5.0])?;
        let sigma = cloud(&mut rng, 150, [5.3, 5.1])?;
        let r = MeasurePath::Translating { base: cloud(&mut rng, 40, [4.5, 5.0])?, velocity: [0.5, 0.0] };
        let s = MeasurePath::Translating { base: cloud(&mut rng, 40, [4.8, 5.2])?, velocity: [0.2, 0.2] };
        let a = transport_driven(&rho, &r, &vel, t_end, dt)?.at(t_end);
        let b = transport_driven(&sigma, &s, &vel, t_end, dt)?.at(t_end);
        let mut sup = 0.0f64;
        for k in 0..=50 {
            let t = k as f64 * dt;
            sup = sup.max(w1(&r.at(t), &s.at(t))?);
        }
        let e = (c * t_end).exp();
        let rhs = e * w1(&rho, &sigma)? + t_end * e * c_prime * sup;
        println!("trial {trial}: W1 at T = {:.4}, bound {rhs:.4}", w1(&a, &b)?);
    }
    Ok(())
}
