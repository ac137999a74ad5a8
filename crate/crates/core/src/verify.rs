//! Self-checks behind `opsplit verify`: proximal identities, operator
//! adjoints and spectra, and the single-loop reductions of the nested solvers.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::operators::{
    difference_1d_lambda_max, estimate_norm, make_blur_downsample, make_composite, make_dense, make_difference_1d,
    make_downsample_average, make_gaussian_blur, make_gradient_2d, make_identity, LinearMap, Vector,
    NORM_MAX_ITERS, NORM_TOL,
};
use crate::problems::{build_fused_lasso, ct, random_view_angles};
use crate::prox::ProxFunction;
use crate::random::{self, streams};
use crate::solvers::{
    CondatVu, CondatVuForm, DavisYin, DualForwardBackward, DualThreeOperator, NewScheme, ParamPreset, Pd3o, Pdfp,
    PrimalDualForwardBackward, PrimalDualThreeOperator, SolverConfig, SplitProblem, Splitting, Start,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Prox,
    Operators,
    Equivalence,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "prox" => Ok(Self::Prox),
            "operators" => Ok(Self::Operators),
            "equivalence" => Ok(Self::Equivalence),
            "all" => Ok(Self::All),
            _ => Err(Error::Config(format!(
                "unknown suite '{s}' (expected prox, operators, equivalence or all)"
            ))),
        }
    }
}

/// Outcome of one property check.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    fn below(name: impl Into<String>, worst: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: worst < tolerance,
            worst,
            tolerance,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {} (worst {:.3e}, tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Prox => prox_checks(seed),
        Suite::Operators => operator_checks(seed),
        Suite::Equivalence => equivalence_checks(seed, 100),
        Suite::All => {
            let mut all = prox_checks(seed);
            all.extend(operator_checks(seed));
            all.extend(equivalence_checks(seed, 100));
            all
        }
    }
}

fn max_abs_diff(a: &Vector, b: &Vector) -> f64 {
    (a - b).amax()
}

// ---------------------------------------------------------------------------
// prox

/// One instance of every function kind, with its vector length.
pub fn sample_functions(seed: u64) -> Vec<(ProxFunction, usize)> {
    let mut rng = random::stream(seed, streams::PROBE);
    vec![
        (ProxFunction::Zero, 5),
        (ProxFunction::L1 { weight: 0.7 }, 6),
        (ProxFunction::GroupL21 { weight: 0.9, stride: 3 }, 6),
        (ProxFunction::IndicatorNonneg, 6),
        (ProxFunction::IndicatorBox { lower: -0.5, upper: 1.2 }, 5),
        (ProxFunction::Nuclear { weight: 0.6, rows: 3, cols: 4 }, 12),
        (
            ProxFunction::QuadraticDistance {
                weight: 1.3,
                center: random::gaussian_vector(&mut rng, 4, 1.0),
            },
            4,
        ),
    ]
}

/// `prox_{s f*}(v)` from the closed form of each conjugate.
pub fn conjugate_prox_closed_form(f: &ProxFunction, s: f64, v: &Vector) -> Vector {
    match f {
        ProxFunction::Zero => Vector::zeros(v.len()),
        ProxFunction::L1 { weight } => v.map(|t| t.clamp(-weight, *weight)),
        ProxFunction::GroupL21 { weight, stride } => {
            let mut out = v.clone();
            for i in 0..*stride {
                let norm = v.iter().skip(i).step_by(*stride).map(|t| t * t).sum::<f64>().sqrt();
                if norm > *weight {
                    for t in out.iter_mut().skip(i).step_by(*stride) {
                        *t *= weight / norm;
                    }
                }
            }
            out
        }
        ProxFunction::IndicatorNonneg => v.map(|t| t.min(0.0)),
        ProxFunction::IndicatorBox { lower, upper } => v.map(|t| t - s * (t / s).clamp(*lower, *upper)),
        ProxFunction::Nuclear { weight, rows, cols } => {
            let m = DMatrix::from_row_slice(*rows, *cols, v.as_slice());
            let mut svd = m.svd(true, true);
            svd.singular_values.apply(|sv| *sv = sv.clamp(0.0, *weight));
            let r = svd.recompose().expect("both factors computed");
            Vector::from_iterator(rows * cols, r.transpose().iter().copied())
        }
        ProxFunction::QuadraticDistance { weight, center } => (v - center * s) / (1.0 + s / weight),
    }
}

fn prox_checks(seed: u64) -> Vec<Check> {
    let mut rng = random::stream(seed, streams::PROBE);
    let mut checks = Vec::new();
    for (f, n) in sample_functions(seed) {
        let kind = format!("{:?}", f.kind());
        let (mut moreau, mut closed, mut scaling, mut envelope, mut search) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for _ in 0..100 {
            let lambda = rng.random_range(0.1..3.0);
            let u = random::gaussian_vector(&mut rng, n, 2.0);
            let p = f.prox(lambda, &u).expect("valid step");
            let q = f.prox_conjugate(1.0 / lambda, &(&u / lambda)).expect("valid step");
            moreau = moreau.max(max_abs_diff(&u, &(&p + q * lambda)));

            let direct = f.prox_conjugate(lambda, &u).expect("valid step");
            closed = closed.max(max_abs_diff(&direct, &conjugate_prox_closed_form(&f, lambda, &u)));

            // (lambda f)* = lambda f*(. / lambda), whose prox with step 1 follows from Moreau.
            let scaled = f.scaled_conjugate_prox(lambda, &u).expect("valid step");
            scaling = scaling.max(max_abs_diff(&scaled, &(&u - &p)));

            let grad = f.moreau_envelope_grad(lambda, &u).expect("valid step");
            let fd = Vector::from_fn(n, |i, _| {
                let h = 1e-6;
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += h;
                dn[i] -= h;
                (f.moreau_envelope(lambda, &up).unwrap() - f.moreau_envelope(lambda, &dn).unwrap()) / (2.0 * h)
            });
            envelope = envelope.max((&grad - fd).norm() / grad.norm().max(1.0));

            let obj = |x: &Vector| 0.5 * (x - &u).norm_squared() + lambda * f.value(x);
            let best = obj(&p);
            for _ in 0..10 {
                let candidate = &p + random::gaussian_vector(&mut rng, n, 0.1);
                search = search.max(best - obj(&candidate));
            }
        }
        checks.push(Check::below(format!("prox {kind}: Moreau decomposition"), moreau, 1e-10));
        checks.push(Check::below(format!("prox {kind}: conjugate prox closed form"), closed, 1e-10));
        checks.push(Check::below(format!("prox {kind}: conjugate scaling"), scaling, 1e-10));
        checks.push(Check::below(format!("prox {kind}: envelope gradient vs finite differences"), envelope, 1e-5));
        checks.push(Check::below(format!("prox {kind}: beats random candidates"), search, 1e-12));
    }
    checks
}

// ---------------------------------------------------------------------------
// operators

/// Operators exercised by the adjoint and norm checks.
pub fn sample_operators(seed: u64) -> Vec<(&'static str, LinearMap)> {
    let mut rng = random::stream(seed, streams::MATRIX);
    let geometry = ct::FanBeamGeometry::new(16, random_view_angles(5, seed), 24).expect("valid geometry");
    vec![
        ("identity", make_identity(7).unwrap()),
        ("dense", make_dense(random::gaussian_matrix(&mut rng, 5, 7)).unwrap()),
        ("difference-1d", make_difference_1d(9).unwrap()),
        ("gradient-2d", make_gradient_2d(5, 6).unwrap()),
        ("gaussian-blur", make_gaussian_blur(8, 10, 1.0).unwrap()),
        ("downsample-average", make_downsample_average(8, 6, 2).unwrap()),
        ("blur-downsample", make_blur_downsample(12, 8, 1.0, 4).unwrap()),
        (
            "composite",
            make_composite(vec![make_gradient_2d(4, 4).unwrap(), make_gaussian_blur(4, 4, 0.7).unwrap()]).unwrap(),
        ),
        ("scaled", make_difference_1d(6).unwrap().scaled(-2.5)),
        ("fan-beam projector", LinearMap::Sparse(geometry.system_matrix().unwrap())),
    ]
}

fn operator_checks(seed: u64) -> Vec<Check> {
    let mut rng = random::stream(seed, streams::PROBE);
    let mut checks = Vec::new();
    for (name, op) in sample_operators(seed) {
        let mut worst = 0.0_f64;
        for _ in 0..20 {
            let x = random::gaussian_vector(&mut rng, op.in_dim(), 1.0);
            let y = random::gaussian_vector(&mut rng, op.out_dim(), 1.0);
            let lhs = op.apply(&x).unwrap().dot(&y);
            let rhs = x.dot(&op.adjoint_apply(&y).unwrap());
            worst = worst.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
        checks.push(Check::below(format!("adjoint {name}"), worst, 1e-10));

        let dense = op.to_dense();
        let exact = dense.singular_values().max();
        let est = estimate_norm(&op, NORM_TOL, NORM_MAX_ITERS, seed).unwrap();
        checks.push(Check::below(format!("norm estimate {name}"), (est - exact).abs() / exact.max(1e-300), 1e-5));
    }

    let n = 200;
    let est = estimate_norm(&make_difference_1d(n).unwrap(), NORM_TOL, NORM_MAX_ITERS, seed).unwrap();
    checks.push(Check::below(
        "lambda_max(DD^T), difference-1d n=200",
        (est * est - difference_1d_lambda_max(n)).abs(),
        1e-4,
    ));
    let est = estimate_norm(&make_gradient_2d(64, 64).unwrap(), NORM_TOL, NORM_MAX_ITERS, seed).unwrap();
    let lmax = est * est;
    checks.push(Check {
        name: "lambda_max(DD^T), gradient-2d 64x64 in [7.9, 8.0]".into(),
        passed: (7.9..=8.0).contains(&lmax),
        worst: lmax,
        tolerance: 8.0,
    });
    checks
}

// ---------------------------------------------------------------------------
// equivalence

/// Largest per-coordinate gap between the primal trajectories of `a` and `b`.
pub fn trajectory_gap<A: Splitting, B: Splitting>(a: &mut A, b: &mut B, iters: usize) -> f64 {
    let mut worst = max_abs_diff(a.primal(), b.primal());
    for _ in 0..iters {
        a.step();
        b.step();
        worst = worst.max(max_abs_diff(a.primal(), b.primal()));
    }
    worst
}

/// Fused-Lasso instance used for the reduction identities.
pub fn identity_instance(seed: u64) -> SplitProblem {
    build_fused_lasso(30, 60, 0.2, 0.8, 0.1, seed).expect("valid instance")
}

/// Same data term and penalties as [`identity_instance`] but `g = 0`.
pub fn identity_instance_without_g(seed: u64) -> SplitProblem {
    let p = identity_instance(seed);
    SplitProblem::new(p.f, ProxFunction::Zero, p.h, p.b).expect("valid instance")
}

/// Fused-Lasso data term with `h = mu2 |x|_1` applied to `B = I`.
pub fn identity_instance_b_identity(seed: u64) -> SplitProblem {
    let p = identity_instance(seed);
    let n = p.dim();
    SplitProblem::new(p.f, p.g, p.h, make_identity(n).unwrap()).expect("valid instance")
}

/// Named reduction gaps, each the largest per-coordinate difference over
/// `iters` iterations.
pub fn reduction_gaps(seed: u64, iters: usize) -> Vec<(&'static str, f64)> {
    let p = identity_instance(seed);
    let dual = SolverConfig::from_preset(&p, ParamPreset::TypeII);
    let pd = dual.clone();
    let mut out = Vec::new();

    let gap = trajectory_gap(
        &mut DualForwardBackward::new(&p, &dual, Start::default()).unwrap(),
        &mut Pdfp::new(&p, &dual, Start::default()).unwrap(),
        iters,
    );
    out.push(("alg1(J=1) = PDFP", gap));

    let gap = trajectory_gap(
        &mut DualThreeOperator::new(&p, &dual, Start::default()).unwrap(),
        &mut Pd3o::new(&p, &dual, Start::default()).unwrap(),
        iters,
    );
    out.push(("alg3(J=1) = PD3O", gap));

    let gap = trajectory_gap(
        &mut PrimalDualThreeOperator::new(&p, &pd, Start::default()).unwrap(),
        &mut NewScheme::new(&p, &pd, Start::default()).unwrap(),
        iters,
    );
    out.push(("alg4(J=1) = new scheme", gap));

    out.push(("alg2(J=1) = Condat-Vu, tau' = tau gamma/(1+tau), sigma' = sigma/gamma", alg2_condat_vu_gap(&p, &pd, iters)));

    let pi = identity_instance_b_identity(seed);
    let c = SolverConfig {
        lambda: 1.0,
        ..SolverConfig::from_preset(&pi, ParamPreset::TypeII)
    };
    let gap = trajectory_gap(
        &mut Pd3o::new(&pi, &c, Start::default()).unwrap(),
        &mut DavisYin::new(&pi, &c, Start::default()).unwrap(),
        iters,
    );
    out.push(("PD3O(lambda=1, B=I) = Davis-Yin", gap));

    let gap = trajectory_gap(
        &mut Pdfp::new(&p, &dual, Start::default()).unwrap(),
        &mut Pd3o::new(&p, &dual, Start::default()).unwrap(),
        iters,
    );
    out.push(("PDFP = PD3O", gap));
    out
}

/// Gap between Algorithm 2 and Condat-Vu run with the mapped steps. The dual
/// iterates are compared too, as `y = gamma * y_cv`.
pub fn alg2_condat_vu_gap(p: &SplitProblem, c: &SolverConfig, iters: usize) -> f64 {
    let mapped = SolverConfig {
        tau: c.tau * c.gamma / (1.0 + c.tau),
        sigma: c.sigma / c.gamma,
        ..c.clone()
    };
    let mut a = PrimalDualForwardBackward::new(p, c, Start::default()).unwrap();
    let mut b = CondatVu::new(p, &mapped, CondatVuForm::Standard, Start::default()).unwrap();
    let mut worst = 0.0_f64;
    for _ in 0..iters {
        a.step();
        b.step();
        worst = worst
            .max(max_abs_diff(a.primal(), b.primal()))
            .max(max_abs_diff(a.dual(), &(b.dual() * c.gamma)));
    }
    worst
}

/// Gap between PDFP and PD3O when `g = 0`, where the two coincide.
pub fn pdfp_pd3o_gap_without_g(seed: u64, iters: usize) -> f64 {
    let p = identity_instance_without_g(seed);
    let c = SolverConfig::from_preset(&p, ParamPreset::TypeII);
    trajectory_gap(
        &mut Pdfp::new(&p, &c, Start::default()).unwrap(),
        &mut Pd3o::new(&p, &c, Start::default()).unwrap(),
        iters,
    )
}

/// Tolerance for trajectory identities.
pub const IDENTITY_TOL: f64 = 1e-12;

fn equivalence_checks(seed: u64, iters: usize) -> Vec<Check> {
    let mut checks: Vec<Check> = reduction_gaps(seed, iters)
        .into_iter()
        .map(|(name, gap)| Check::below(name, gap, IDENTITY_TOL))
        .collect();
    checks.push(Check::below(
        "PDFP = PD3O with g = 0",
        pdfp_pd3o_gap_without_g(seed, iters),
        IDENTITY_TOL,
    ));
    checks
}
