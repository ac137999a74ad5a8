//! Assembling a problem by hand: box-constrained TV denoising of a noisy
//! step signal,
//!
//!   min 1/2 |x - b|^2 + i_[0,1](x) + 0.5 |D x|_1,
//!
//! solved by the three-operator scheme with a few inner iterations. The
//! instance is then dumped in Matrix Market format.

use opsplit::operators::{make_difference_1d, make_identity, Vector};
use opsplit::problems::export_instance;
use opsplit::random::{self, streams};
use opsplit::solvers::{solve, ParamPreset, SolverConfig, SolverId};
use opsplit::{ProxFunction, SmoothFunction, SplitProblem};

fn main() -> opsplit::Result<()> {
    let n = 120;
    let clean = Vector::from_fn(n, |i, _| if (40..80).contains(&i) { 0.9 } else { 0.1 });
    let noisy = &clean + random::gaussian_vector(&mut random::stream(3, streams::NOISE), n, 0.15);

    let p = SplitProblem::new(
        SmoothFunction::least_squares_with_lipschitz(make_identity(n)?, noisy.clone(), 1.0)?,
        ProxFunction::IndicatorBox { lower: 0.0, upper: 1.0 },
        ProxFunction::L1 { weight: 0.5 },
        make_difference_1d(n)?,
    )?
    .with_name("tv-denoising")
    .with_ground_truth(clean.clone())?;

    let c = SolverConfig::from_preset(&p, ParamPreset::TypeII).with_inner_iters(5).with_eps(1e-10);
    let trace = solve(SolverId::Alg3, &p, &c)?;
    let before = p.metrics(&noisy).expect("ground truth set");
    let after = p.metrics(&trace.final_x).expect("ground truth set");
    println!("outer iterations: {} (converged: {})", trace.total_outer, trace.converged);
    println!("SNR noisy {:.2} dB -> denoised {:.2} dB", before.snr_db, after.snr_db);

    let dir = std::env::temp_dir().join("opsplit-tv-denoising");
    export_instance(&p, &dir)?;
    println!("instance written to {}", dir.display());
    Ok(())
}
