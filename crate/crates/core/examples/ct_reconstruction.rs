//! Nonnegativity-constrained TV reconstruction of a Shepp-Logan phantom from
//! sparse-view fan-beam projections.
//!
//! `cargo run --release --example ct_reconstruction -- [J] [eps]`

use std::time::Instant;

use opsplit::problems::{build_ct_problem, TvKind};
use opsplit::solvers::{solve, ParamPreset, SolverConfig, SolverId};

fn main() -> opsplit::Result<()> {
    let mut args = std::env::args().skip(1);
    let inner = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let eps = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let p = build_ct_problem(64, 20, 96, 0.5, 0.01, TvKind::Iso, 7)?;
    println!("A: {} x {}, L = {:.3}", p.f.dim().map_or(0, |_| p.dim()), p.dim(), p.f.lipschitz());
    for id in [SolverId::Alg1, SolverId::Alg2, SolverId::Alg3, SolverId::Alg4] {
        let c = SolverConfig::from_preset(&p, ParamPreset::Imaging)
            .with_inner_iters(inner)
            .with_eps(eps);
        let clock = Instant::now();
        let t = solve(id, &p, &c)?;
        let m = p.metrics(&t.final_x).expect("phantom is known");
        println!(
            "{id:<5} obj={:.10} snr={:.4} dB nmsd={:.5} ssim={:.4} iters={}{} ({:.1?})",
            t.final_objective(),
            m.snr_db,
            m.nmsd,
            m.ssim.unwrap_or(f64::NAN),
            t.total_outer,
            if t.converged { "" } else { " MAXITER" },
            clock.elapsed()
        );
    }
    Ok(())
}
