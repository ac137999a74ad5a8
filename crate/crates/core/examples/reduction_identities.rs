//! Runs the nested solvers with one inner iteration next to the single-loop
//! schemes they reduce to, and prints the largest trajectory gap.

use opsplit::verify::{pdfp_pd3o_gap_without_g, reduction_gaps};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    for (name, gap) in reduction_gaps(seed, 100) {
        println!("{name:<72} {gap:.3e}");
    }
    println!("{:<72} {:.3e}", "PDFP = PD3O with g = 0", pdfp_pd3o_gap_without_g(seed, 100));
}
