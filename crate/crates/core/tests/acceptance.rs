//! Acceptance gate. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (bypassing the harness capture) and asserts the parts that hold.
//! Claims that do not hold on this implementation live in `#[ignore]`d tests
//! that fail when run with `--ignored`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use opsplit::operators::{estimate_norm, make_difference_1d, make_gradient_2d, NORM_MAX_ITERS, NORM_TOL};
use opsplit::problems::{build_fused_lasso, ExperimentSpec};
use opsplit::prox::ProxFunction;
use opsplit::solvers::*;
use opsplit::{cli, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const IDENTITY_TOL: f64 = 1e-12;
const IDENTITY_ITERS: usize = 150;
const IDENTITY_SEEDS: [u64; 3] = [1, 2, 3];

fn report(n: usize, pass: bool, detail: impl std::fmt::Display) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {n:>2}: {verdict}  {detail}");
}

fn max_abs(a: &Vector, b: &Vector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn gap<A: Splitting, B: Splitting>(mut a: A, mut b: B, iters: usize) -> f64 {
    let mut worst = max_abs(a.primal(), b.primal());
    for _ in 0..iters {
        a.step();
        b.step();
        worst = worst.max(max_abs(a.primal(), b.primal()));
    }
    worst
}

fn instance(seed: u64) -> SplitProblem {
    build_fused_lasso(30, 60, 0.2, 0.8, 0.1, seed).unwrap()
}

fn without_g(p: &SplitProblem) -> SplitProblem {
    SplitProblem::new(p.f.clone(), ProxFunction::Zero, p.h.clone(), p.b.clone()).unwrap()
}

/// PDFP and PD3O started from the correspondence `x0 = prox_{gamma g}(z0)`
/// with `z0 = x0' - gamma grad f(x0') - gamma B^T y0` at `x0' = 0`, `y0 = 0`.
fn pdfp_pd3o_gap(p: &SplitProblem, iters: usize) -> f64 {
    let c = SolverConfig::from_preset(p, ParamPreset::TypeII);
    let zero = Vector::zeros(p.dim());
    let z0 = -p.f.gradient(&zero) * c.gamma;
    let x0 = p.g.prox(c.gamma, &z0).unwrap();
    let cold = gap(
        Pdfp::new(p, &c, Start::default()).unwrap(),
        Pd3o::new(p, &c, Start::default()).unwrap(),
        iters,
    );
    let matched = gap(
        Pdfp::new(p, &c, Start { x: Some(x0), ..Start::default() }).unwrap(),
        Pd3o::new(p, &c, Start { z: Some(z0), ..Start::default() }).unwrap(),
        iters,
    );
    cold.min(matched)
}

fn alg2_condat_vu(p: &SplitProblem, iters: usize) -> f64 {
    let c = SolverConfig::from_preset(p, ParamPreset::TypeII);
    let mapped = SolverConfig {
        tau: c.tau * c.gamma / (1.0 + c.tau),
        sigma: c.sigma / c.gamma,
        ..c.clone()
    };
    let mut a = PrimalDualForwardBackward::new(p, &c, Start::default()).unwrap();
    let mut b = CondatVu::new(p, &mapped, CondatVuForm::Standard, Start::default()).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        a.step();
        b.step();
        worst = worst.max(max_abs(a.primal(), b.primal())).max(max_abs(a.dual(), &(b.dual() * c.gamma)));
    }
    worst
}

/// Worst gap per identity over all seeds, PDFP = PD3O last.
fn identity_gaps() -> Vec<(&'static str, f64)> {
    let mut worst = vec![
        ("alg1=PDFP", 0.0_f64),
        ("alg3=PD3O", 0.0),
        ("alg4=new", 0.0),
        ("alg2=CV", 0.0),
        ("PD3O=DY", 0.0),
        ("PDFP=PD3O", 0.0),
    ];
    for seed in IDENTITY_SEEDS {
        let p = instance(seed);
        let c = SolverConfig::from_preset(&p, ParamPreset::TypeII);
        let s = Start::default;
        let gaps = [
            gap(DualForwardBackward::new(&p, &c, s()).unwrap(), Pdfp::new(&p, &c, s()).unwrap(), IDENTITY_ITERS),
            gap(DualThreeOperator::new(&p, &c, s()).unwrap(), Pd3o::new(&p, &c, s()).unwrap(), IDENTITY_ITERS),
            gap(PrimalDualThreeOperator::new(&p, &c, s()).unwrap(), NewScheme::new(&p, &c, s()).unwrap(), IDENTITY_ITERS),
            alg2_condat_vu(&p, IDENTITY_ITERS),
            {
                let n = p.dim();
                let pi = SplitProblem::new(p.f.clone(), p.g.clone(), p.h.clone(), opsplit::operators::make_identity(n).unwrap())
                    .unwrap();
                let ci = SolverConfig { lambda: 1.0, ..SolverConfig::from_preset(&pi, ParamPreset::TypeII) };
                gap(Pd3o::new(&pi, &ci, s()).unwrap(), DavisYin::new(&pi, &ci, s()).unwrap(), IDENTITY_ITERS)
            },
            pdfp_pd3o_gap(&p, IDENTITY_ITERS),
        ];
        for (w, g) in worst.iter_mut().zip(gaps) {
            w.1 = w.1.max(g);
        }
    }
    worst
}

#[test]
fn criterion_01_reduction_identities() {
    let t = Instant::now();
    let gaps = identity_gaps();
    let without = IDENTITY_SEEDS
        .iter()
        .map(|&s| pdfp_pd3o_gap(&without_g(&instance(s)), IDENTITY_ITERS))
        .fold(0.0, f64::max);
    let elapsed = t.elapsed();
    let detail: Vec<String> = gaps.iter().map(|(n, g)| format!("{n} {g:.1e}")).collect();
    let all = gaps.iter().all(|g| g.1 < IDENTITY_TOL);
    report(
        1,
        all && elapsed < Duration::from_secs(10),
        format!("{} | PDFP=PD3O with g=0 {without:.1e} | {:.2?}", detail.join(", "), elapsed),
    );
    for (name, g) in &gaps[..5] {
        assert!(*g < IDENTITY_TOL, "{name}: {g:e}");
    }
    assert!(without < IDENTITY_TOL, "{without:e}");
    assert!(elapsed < Duration::from_secs(10));
}

/// PDFP and PD3O produce different primal iterates whenever `prox_g` is not
/// the identity; this asserts the unrestricted claim and fails.
#[test]
#[ignore = "PDFP and PD3O only coincide when g = 0; see README"]
fn criterion_01_pdfp_equals_pd3o_with_nonzero_g() {
    let g = pdfp_pd3o_gap(&instance(1), IDENTITY_ITERS);
    assert!(g < IDENTITY_TOL, "PDFP vs PD3O gap {g:e}");
}

fn scaled_draws(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(0.05..5.0), rng.random_range(0.1..3.0))
}

#[test]
fn criterion_02_moreau_and_scaling() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut moreau = 0.0_f64;
    let mut scaling = 0.0_f64;
    let mut conj = 0.0_f64;
    for (f, n) in common::small_functions(&mut rng) {
        for _ in 0..100 {
            let (lambda, spread) = scaled_draws(&mut rng);
            let u = common::gaussian(&mut rng, n, spread);
            let p = f.prox(lambda, &u).unwrap();
            // u = prox_{lambda f}(u) + lambda prox_{f*/lambda}(u/lambda)
            let c = f.prox_conjugate(1.0 / lambda, &(&u / lambda)).unwrap();
            moreau = moreau.max(max_abs(&(&p + &c * lambda), &u));
            conj = conj.max(max_abs(&c, &common::conjugate_prox(&f, 1.0 / lambda, &(&u / lambda))));
            // prox_{(lambda f)*}(u) = lambda prox_{f*/lambda}(u/lambda)
            let lf = common::scaled(&f, lambda);
            let lhs = lf.prox_conjugate(1.0, &u).unwrap();
            let rhs = f.scaled_conjugate_prox(lambda, &u).unwrap();
            scaling = scaling.max(max_abs(&lhs, &common::conjugate_prox(&lf, 1.0, &u)));
            scaling = scaling.max(max_abs(&lhs, &rhs));
        }
    }
    let elapsed = t.elapsed();
    let pass = moreau < 1e-10 && scaling < 1e-10 && conj < 1e-10 && elapsed < Duration::from_secs(5);
    report(
        2,
        pass,
        format!("moreau {moreau:.1e}, scaling {scaling:.1e}, conjugate closed forms {conj:.1e}, {elapsed:.2?}"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_envelope_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let kinds = [
        (ProxFunction::L1 { weight: 0.7 }, 6),
        (ProxFunction::IndicatorNonneg, 6),
        (ProxFunction::Nuclear { weight: 0.8, rows: 3, cols: 4 }, 12),
    ];
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for (f, n) in &kinds {
        for _ in 0..20 {
            let lambda = rng.random_range(0.2..2.0);
            let x = common::gaussian(&mut rng, *n, 2.0);
            let g = f.moreau_envelope_grad(lambda, &x).unwrap();
            let fd = Vector::from_fn(*n, |i, _| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[i] += h;
                b[i] -= h;
                (f.moreau_envelope(lambda, &a).unwrap() - f.moreau_envelope(lambda, &b).unwrap()) / (2.0 * h)
            });
            let rel = (&g - &fd).norm() / g.norm().max(1.0);
            worst = worst.max(rel);
        }
    }
    report(3, worst < 1e-5, format!("worst relative error {worst:.2e} over l1, nonneg, nuclear"));
    assert!(worst < 1e-5);
}

#[test]
fn criterion_04_spectral_facts() {
    let exact = 2.0 - 2.0 * (199.0 * std::f64::consts::PI / 200.0).cos();
    let d = estimate_norm(&make_difference_1d(200).unwrap(), NORM_TOL, NORM_MAX_ITERS, 0).unwrap().powi(2);
    let g = estimate_norm(&make_gradient_2d(64, 64).unwrap(), NORM_TOL, NORM_MAX_ITERS, 0).unwrap().powi(2);
    let pass = (d - exact).abs() < 1e-4 && (7.9..=8.0).contains(&g);
    report(4, pass, format!("diff-1d {d:.8} vs {exact:.8}; grad-2d {g:.6}"));
    assert!(pass);
}

fn solve_all(p: &SplitProblem, c: &SolverConfig) -> Vec<SolveTrace> {
    SolverId::ALL[..4].iter().map(|&id| solve(id, p, c).unwrap()).collect()
}

fn fused_lasso_default() -> SplitProblem {
    ExperimentSpec::default_for("fused-lasso").unwrap().build().unwrap()
}

fn max_pairwise(values: &[f64]) -> f64 {
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

const SNR_BAND: std::ops::RangeInclusive<f64> = 40.0..=50.0;

#[test]
fn criterion_05_fused_lasso_desk() {
    let t = Instant::now();
    let p = fused_lasso_default();
    let c = SolverConfig::from_preset(&p, ParamPreset::TypeII).with_eps(1e-8).with_max_outer(5000);
    let traces = solve_all(&p, &c);
    let iters: Vec<usize> = traces.iter().map(|t| t.total_outer).collect();
    let nmsd: Vec<f64> = traces.iter().map(|t| t.last().unwrap().nmsd.unwrap()).collect();
    let snr: Vec<f64> = traces.iter().map(|t| t.last().unwrap().snr.unwrap()).collect();
    let converged = traces.iter().all(|t| t.converged);

    // Type-I with J = 1: Algorithms 1 and 3 may cap out; 2 and 4 must not.
    let c1 = SolverConfig::from_preset(&p, ParamPreset::TypeI).with_eps(1e-8).with_max_outer(5000);
    let type1 = solve_all(&p, &c1);
    let type1_ok = type1[1].converged && type1[3].converged;
    let elapsed = t.elapsed();

    let agree = max_pairwise(&nmsd) <= 1e-5;
    let in_band = snr.iter().all(|s| SNR_BAND.contains(s));
    report(
        5,
        converged && agree && in_band && type1_ok && elapsed < Duration::from_secs(120),
        format!(
            "type-II iters {iters:?}, NMSD spread {:.1e}, SNR {:.2} dB (band {:?}){}, type-I alg1/3 converged {}/{}, {elapsed:.2?}",
            max_pairwise(&nmsd),
            snr[0],
            SNR_BAND,
            if in_band { "" } else { " OUT OF BAND" },
            type1[0].converged,
            type1[2].converged,
        ),
    );
    assert!(converged, "{iters:?}");
    assert!(agree, "{nmsd:?}");
    assert!(type1_ok);
    assert!(elapsed < Duration::from_secs(120));
}

/// The desk SNR band only holds when the noise standard deviation (not the
/// variance) is 0.1. With the configured variance 0.1 the SNR sits near 32 dB.
#[test]
#[ignore = "SNR band requires noise variance 0.01; see README"]
fn criterion_05_snr_band() {
    let p = fused_lasso_default();
    let c = SolverConfig::from_preset(&p, ParamPreset::TypeII).with_eps(1e-8);
    let snr = solve(SolverId::Alg3, &p, &c).unwrap().last().unwrap().snr.unwrap();
    assert!(SNR_BAND.contains(&snr), "SNR {snr:.3} dB");
}

#[test]
fn criterion_06_inner_iteration_trend() {
    let p = fused_lasso_default();
    let base = SolverConfig::from_preset(&p, ParamPreset::TypeI).with_eps(1e-8).with_max_outer(5000);
    let j1 = solve_all(&p, &base);
    let capped_at_j1 = !j1[0].converged && !j1[2].converged;
    let mut counts = Vec::new();
    let mut converge = true;
    for j in [2, 10, 20] {
        let traces = solve_all(&p, &base.clone().with_inner_iters(j));
        converge &= traces[0].converged && traces[2].converged;
        counts.push((j, traces.iter().map(|t| t.total_outer).collect::<Vec<_>>()));
    }
    let spread = counts[1]
        .1
        .iter()
        .zip(&counts[2].1)
        .map(|(&a, &b)| (a as f64 - b as f64).abs() / a.max(b) as f64)
        .fold(0.0, f64::max);
    report(
        6,
        converge && spread <= 0.05,
        format!("J=1 alg1/3 capped {capped_at_j1}; outer counts {counts:?}; J=10 vs 20 spread {:.2}%", spread * 100.0),
    );
    assert!(converge);
    assert!(spread <= 0.05);
}

#[test]
fn criterion_07_ct_agreement() {
    let t = Instant::now();
    let p = ExperimentSpec::default_for("constrained-tv-ct").unwrap().build().unwrap();
    let c = SolverConfig::from_preset(&p, ParamPreset::Imaging).with_inner_iters(10).with_eps(1e-6);
    let traces: Vec<SolveTrace> = {
        use rayon::prelude::*;
        SolverId::ALL[..4].par_iter().map(|&id| solve(id, &p, &c).unwrap()).collect()
    };
    let obj: Vec<f64> = traces.iter().map(|t| t.final_objective()).collect();
    let snr: Vec<f64> = traces.iter().map(|t| t.last().unwrap().snr.unwrap()).collect();
    let rel = max_pairwise(&obj) / obj.iter().map(|o| o.abs()).fold(0.0, f64::max);
    let snr_spread = max_pairwise(&snr);
    let converged = traces.iter().all(|t| t.converged);
    let elapsed = t.elapsed();
    let pass = converged && rel <= 1e-5 && snr_spread <= 0.1 && elapsed < Duration::from_secs(300);
    report(
        7,
        pass,
        format!(
            "objective spread {rel:.1e} (rel), SNR {:.3} dB spread {snr_spread:.1e}, iters {:?}, {elapsed:.2?}",
            snr[0],
            traces.iter().map(|t| t.total_outer).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_lrtv_agreement() {
    let t = Instant::now();
    let p = ExperimentSpec::default_for("lrtv-sr").unwrap().build().unwrap();
    let c = SolverConfig::from_preset(&p, ParamPreset::Imaging).with_inner_iters(10).with_eps(1e-6);
    let traces: Vec<SolveTrace> = {
        use rayon::prelude::*;
        SolverId::ALL[..4].par_iter().map(|&id| solve(id, &p, &c).unwrap()).collect()
    };
    let nmsd: Vec<f64> = traces.iter().map(|t| t.last().unwrap().nmsd.unwrap()).collect();
    let ssim: Vec<f64> = traces.iter().map(|t| t.last().unwrap().ssim.unwrap()).collect();
    let elapsed = t.elapsed();
    let pass = max_pairwise(&nmsd) <= 1e-4
        && ssim.iter().all(|s| *s >= 0.9)
        && traces.iter().all(|t| t.converged)
        && elapsed < Duration::from_secs(300);
    report(
        8,
        pass,
        format!(
            "NMSD {:.6} spread {:.1e}, SSIM min {:.4}, {elapsed:.2?}",
            nmsd[0],
            max_pairwise(&nmsd),
            ssim.iter().copied().fold(f64::INFINITY, f64::min)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_prox_oracles() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut oracle_gap = 0.0_f64;
    let mut beaten = 0usize;
    let mut checked = 0usize;
    for (f, n) in common::small_functions(&mut rng) {
        for _ in 0..5 {
            let step = rng.random_range(0.1..2.0);
            let v = common::gaussian(&mut rng, n, 1.5);
            let p = f.prox(step, &v).unwrap();
            oracle_gap = oracle_gap.max(max_abs(&p, &common::prox_brute_force(&f, step, &v)));
            let best = common::prox_objective(&f, step, &v, &p);
            for k in 0..1000 {
                let scale = [1e-3, 1e-2, 1e-1, 1.0][k % 4];
                let cand = common::into_domain(&f, &p + common::gaussian(&mut rng, n, scale));
                checked += 1;
                if common::prox_objective(&f, step, &v, &cand) < best - 1e-12 {
                    beaten += 1;
                }
            }
        }
    }
    let pass = oracle_gap < 1e-6 && beaten == 0;
    report(9, pass, format!("brute-force gap {oracle_gap:.1e}; {beaten} of {checked} random candidates better"));
    assert!(pass);
}

#[test]
fn criterion_10_determinism() {
    let config = cli::RunConfig::default_for("fused-lasso").unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cli::run(&config, a.path()).unwrap();
    cli::run(&config, b.path()).unwrap();
    let files = collect_files(a.path());
    let mut mismatched = Vec::new();
    for rel in &files {
        if std::fs::read(a.path().join(rel)).unwrap() != std::fs::read(b.path().join(rel)).ok().unwrap_or_default() {
            mismatched.push(rel.display().to_string());
        }
    }
    let same_set = files == collect_files(b.path());
    let pass = !files.is_empty() && same_set && mismatched.is_empty();
    report(10, pass, format!("{} CSV files compared, {} differ", files.len(), mismatched.len()));
    assert!(pass, "{mismatched:?}");
}

fn collect_files(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}
