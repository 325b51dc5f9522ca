//! Exact Wasserstein-1 distances between small point clouds, checked against the sorted-CDF
//! formula on a line and bracketed from below by random 1-Lipschitz test functions.

use crowdlab::transport_metrics::{kr_duality_check, w1_1d, w1_discrete, DiscreteMeasure};

fn main() -> crowdlab::Result<()> {
    let mu = DiscreteMeasure::from_atoms(&[([0.0, 0.0], 0.5), ([1.0, 0.0], 0.3), ([2.0, 1.0], 0.2)])?;
    let nu = DiscreteMeasure::from_atoms(&[([0.5, 0.5], 0.4), ([2.0, 0.0], 0.6)])?;
    let w = w1_discrete(&mu, &nu)?;
    let lower = kr_duality_check(&mu, &nu, 500, 1);
    println!("plane: W1 = {w:.6}, best dual lower bound {lower:.6}");

    let a = [(0.0, 0.25), (1.0, 0.25), (3.0, 0.5)];
    let b = [(0.5, 0.5), (2.0, 0.5)];
    let line = |p: &[(f64, f64)]| DiscreteMeasure::new(p.iter().map(|q| [q.0, 0.0]).collect(), p.iter().map(|q| q.1).collect());
    println!(
        "line:  W1 = {:.6}, CDF formula {:.6}",
        w1_discrete(&line(&a)?, &line(&b)?)?,
        w1_1d(&a, &b)?
    );
    Ok(())
}
