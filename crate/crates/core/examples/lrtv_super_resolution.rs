//! Low-rank plus TV super-resolution of a synthetic block image observed
//! through a Gaussian blur and 2x2 average downsampling.
//!
//! `cargo run --release --example lrtv_super_resolution -- [J] [eps]`

use std::time::Instant;

use opsplit::metrics::MetricReport;
use opsplit::problems::LrtvSpec;
use opsplit::problems::ExperimentSpec;
use opsplit::solvers::{solve, ParamPreset, SolverConfig, SolverId};

fn main() -> opsplit::Result<()> {
    let mut args = std::env::args().skip(1);
    let inner = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let eps = args.next().and_then(|s| s.parse().ok()).unwrap_or(1e-6);
    let p = ExperimentSpec::LrtvSr(LrtvSpec::default()).build()?;
    let truth = p.ground_truth.as_ref().expect("synthetic image is known");
    let start = MetricReport::new(truth, p.initial.as_ref().expect("upsampled start"), p.dynamic_range)?;
    println!("nearest-neighbour upsampling: snr={:.3} dB ssim={:.4}", start.snr_db, start.ssim.unwrap_or(f64::NAN));
    for id in [SolverId::Alg1, SolverId::Alg2, SolverId::Alg3, SolverId::Alg4] {
        let c = SolverConfig::from_preset(&p, ParamPreset::Imaging)
            .with_inner_iters(inner)
            .with_eps(eps);
        let clock = Instant::now();
        let t = solve(id, &p, &c)?;
        let m = p.metrics(&t.final_x).expect("synthetic image is known");
        println!(
            "{id:<5} obj={:.10} snr={:.4} dB nmsd={:.6} ssim={:.4} iters={}{} ({:.1?})",
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
