//! The panic crowd solved twice: by the finite-volume scheme and by transporting particles
//! (point masses) along the same nonlocal velocity. Prints the Wasserstein distance between the
//! two solutions at increasing resolution.

use crowdlab::harness::verify::solver_gap;

fn main() -> crowdlab::Result<()> {
    let t_end = 0.5;
    let mut prev: Option<(f64, f64)> = None;
    for n in [32usize, 64, 128] {
        let h = 4.0 / n as f64;
        let w = solver_gap(n, t_end)?;
        match prev {
            Some((h0, w0)) => println!("n = {n:4}  W1 = {w:.4e}  observed order {:.2}", (w0 / w).ln() / (h0 / h).ln()),
            None => println!("n = {n:4}  W1 = {w:.4e}"),
        }
        prev = Some((h, w));
    }
    Ok(())
}
