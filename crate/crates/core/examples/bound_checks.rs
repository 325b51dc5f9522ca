//! Runs the a priori estimates (sup-norm growth, total variation, stability, L1 contraction)
//! against the finite-volume solutions and prints each comparison.

use crowdlab::harness::verify::criterion;

fn main() {
    for id in [3, 4, 5, 6] {
        println!("{}", criterion(id));
    }
}
