//! Splitting solvers for
//!
//! ```text
//! min_x  f(x) + g(x) + h(B x)
//! ```
//!
//! with `f` smooth (`L`-Lipschitz gradient), `g` and `h` prox-friendly and `B`
//! linear.
//!
//! The four two-level schemes wrap an outer forward-backward or three-operator
//! iteration around an inner solver for `prox_{gamma (g + h o B)}` or
//! `prox_{gamma (h o B)}`. The inner solver is either a dual forward-backward
//! iteration (step `lambda`) or a primal-dual iteration (steps `sigma`, `tau`)
//! run for a fixed `J` steps. With `J = 1` and warm-started duals they collapse
//! to single-loop schemes, which are also provided:
//!
//! | two-level                | `J = 1` equivalent          |
//! |--------------------------|-----------------------------|
//! | [`DualForwardBackward`]  | [`Pdfp`]                    |
//! | [`PrimalDualForwardBackward`] | [`CondatVu`] (reparameterized) |
//! | [`DualThreeOperator`]    | [`Pd3o`] (and [`DavisYin`] when `B = I`, `lambda = 1`) |
//! | [`PrimalDualThreeOperator`] | [`NewScheme`]            |

mod schemes;

pub use schemes::*;

use std::fmt;
use std::str::FromStr;

use crate::error::{check_len, Error, Result};
use crate::metrics;
use crate::operators::{estimate_norm, LinearMap, Vector, NORM_MAX_ITERS, NORM_TOL};
use crate::prox::ProxFunction;

/// Margin applied to power-iteration estimates when they are used as upper
/// bounds (Lipschitz constants, step-size presets).
pub const ESTIMATE_SAFETY: f64 = 1.0 + 1e-6;

/// Default cap on outer iterations.
pub const DEFAULT_MAX_OUTER: usize = 5000;

/// Objective growth beyond this multiple of the starting value is treated as
/// divergence.
pub const DIVERGENCE_GROWTH: f64 = 1e12;

/// Smooth term `f`.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothFunction {
    Zero,
    /// `1/2 |A x - b|^2` with gradient `A^T (A x - b)`.
    LeastSquares {
        op: LinearMap,
        target: Vector,
        lipschitz: f64,
    },
}

impl SmoothFunction {
    /// Least squares with `L` taken from a power-iteration estimate of `|A|^2`.
    pub fn least_squares(op: LinearMap, target: Vector) -> Result<Self> {
        let norm = estimate_norm(&op, NORM_TOL, NORM_MAX_ITERS, 0)?;
        Self::least_squares_with_lipschitz(op, target, norm * norm * ESTIMATE_SAFETY)
    }

    pub fn least_squares_with_lipschitz(op: LinearMap, target: Vector, lipschitz: f64) -> Result<Self> {
        check_len("least squares target", op.out_dim(), target.len())?;
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid Lipschitz constant {lipschitz}")));
        }
        Ok(Self::LeastSquares { op, target, lipschitz })
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::LeastSquares { lipschitz, .. } => *lipschitz,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::Zero => None,
            Self::LeastSquares { op, .. } => Some(op.in_dim()),
        }
    }

    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::LeastSquares { op, target, .. } => 0.5 * (op.apply_unchecked(x) - target).norm_squared(),
        }
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        match self {
            Self::Zero => Vector::zeros(x.len()),
            Self::LeastSquares { op, target, .. } => op.adjoint_unchecked(&(op.apply_unchecked(x) - target)),
        }
    }
}

/// Spectral data of `B` used by step-size presets and parameter checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralBounds {
    /// `lambda_max(B B^T)` used to build presets. Either a known constant
    /// (4 for the 1D difference, 8 for the 2D gradient) or a padded estimate.
    pub nominal: f64,
    /// Power-iteration estimate of `lambda_max(B B^T)` used to validate steps.
    pub estimate: f64,
}

/// Problem instance `f + g + h o B` with optional reference data.
#[derive(Clone, Debug)]
pub struct SplitProblem {
    pub name: String,
    pub f: SmoothFunction,
    pub g: ProxFunction,
    pub h: ProxFunction,
    pub b: LinearMap,
    pub spectral: SpectralBounds,
    pub ground_truth: Option<Vector>,
    /// `(rows, cols)` when the unknown is an image; enables SSIM.
    pub image_shape: Option<(usize, usize)>,
    pub dynamic_range: Option<f64>,
    /// Starting point; zero when absent.
    pub initial: Option<Vector>,
    /// Preferred `gamma`; `1.9 / L` when absent.
    pub gamma_hint: Option<f64>,
    /// Preferred outer iteration cap; `DEFAULT_MAX_OUTER` when absent.
    pub max_outer_hint: Option<usize>,
}

impl SplitProblem {
    pub fn new(f: SmoothFunction, g: ProxFunction, h: ProxFunction, b: LinearMap) -> Result<Self> {
        let n = b.in_dim();
        if let Some(fd) = f.dim() {
            check_len("SplitProblem: f domain vs B domain", n, fd)?;
        }
        g.validate(n)?;
        h.validate(b.out_dim())?;
        let est = estimate_norm(&b, NORM_TOL, NORM_MAX_ITERS, 0)?;
        let estimate = est * est;
        Ok(Self {
            name: "custom".into(),
            f,
            g,
            h,
            b,
            spectral: SpectralBounds {
                nominal: estimate * ESTIMATE_SAFETY,
                estimate,
            },
            ground_truth: None,
            image_shape: None,
            dynamic_range: None,
            initial: None,
            gamma_hint: None,
            max_outer_hint: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.b.in_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.b.out_dim()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Replaces the preset value of `lambda_max(B B^T)`.
    pub fn with_nominal_lambda_max(mut self, value: f64) -> Self {
        self.spectral.nominal = value;
        self
    }

    pub fn with_ground_truth(mut self, x: Vector) -> Result<Self> {
        check_len("ground truth", self.dim(), x.len())?;
        self.ground_truth = Some(x);
        Ok(self)
    }

    pub fn with_image(mut self, rows: usize, cols: usize, dynamic_range: f64) -> Result<Self> {
        check_len("image shape", self.dim(), rows * cols)?;
        self.image_shape = Some((rows, cols));
        self.dynamic_range = Some(dynamic_range);
        Ok(self)
    }

    pub fn with_initial(mut self, x: Vector) -> Result<Self> {
        check_len("initial point", self.dim(), x.len())?;
        self.initial = Some(x);
        Ok(self)
    }

    pub fn with_gamma_hint(mut self, gamma: f64) -> Self {
        self.gamma_hint = Some(gamma);
        self
    }

    pub fn with_max_outer_hint(mut self, max_outer: usize) -> Self {
        self.max_outer_hint = Some(max_outer);
        self
    }

    /// `f(x) + g(x) + h(B x)`; infinite when an indicator is violated.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        check_len("objective", self.dim(), x.len())?;
        Ok(self.objective_unchecked(x))
    }

    pub(crate) fn objective_unchecked(&self, x: &Vector) -> f64 {
        let hb = if self.h.is_zero() {
            0.0
        } else {
            self.h.value(&self.b.apply_unchecked(x))
        };
        self.f.value(x) + self.g.value(x) + hb
    }

    pub fn default_gamma(&self) -> f64 {
        self.gamma_hint.unwrap_or_else(|| {
            let l = self.f.lipschitz();
            if l > 0.0 {
                1.9 / l
            } else {
                1.0
            }
        })
    }

    pub fn metrics(&self, x: &Vector) -> Option<metrics::MetricReport> {
        let truth = self.ground_truth.as_ref()?;
        metrics::MetricReport::new(truth, x, self.dynamic_range).ok()
    }
}

/// Step-size presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamPreset {
    /// `lambda = 1.9 / lambda_max`, `sigma = 1 / |B|^2`, `tau = 1`.
    TypeI,
    /// `lambda = 1 / lambda_max`, `sigma = tau = 1 / |B|`.
    TypeII,
    /// Imaging experiments: `lambda = 1 / lambda_max`, `sigma = 1 / lambda_max`, `tau = 1`.
    Imaging,
}

impl ParamPreset {
    pub fn name(self) -> &'static str {
        match self {
            Self::TypeI => "type-I",
            Self::TypeII => "type-II",
            Self::Imaging => "imaging",
        }
    }

    /// `(lambda, sigma, tau)` for a given `lambda_max(B B^T)`.
    pub fn steps(self, lambda_max: f64) -> (f64, f64, f64) {
        match self {
            Self::TypeI => (1.9 / lambda_max, 1.0 / lambda_max, 1.0),
            Self::TypeII => (1.0 / lambda_max, 1.0 / lambda_max.sqrt(), 1.0 / lambda_max.sqrt()),
            Self::Imaging => (1.0 / lambda_max, 1.0 / lambda_max, 1.0),
        }
    }
}

impl fmt::Display for ParamPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type-i" | "typei" | "i" => Ok(Self::TypeI),
            "type-ii" | "typeii" | "ii" => Ok(Self::TypeII),
            "imaging" => Ok(Self::Imaging),
            _ => Err(Error::Config(format!("unknown parameter preset '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    /// Dual inner step (Algorithms 1 and 3, PDFP, PD3O).
    pub lambda: f64,
    pub sigma: f64,
    pub tau: f64,
    /// Fixed number of inner iterations `J`.
    pub inner_iters: usize,
    pub outer_eps: f64,
    pub max_outer: usize,
    /// Re-enter each inner loop from the previous dual iterate instead of 0.
    pub warm_start_dual: bool,
    pub param_preset: Option<ParamPreset>,
}

impl SolverConfig {
    /// `gamma` from the problem, steps from `preset`, `J = 1`, `eps = 1e-8`.
    pub fn from_preset(p: &SplitProblem, preset: ParamPreset) -> Self {
        let (lambda, sigma, tau) = preset.steps(p.spectral.nominal);
        Self {
            gamma: p.default_gamma(),
            lambda,
            sigma,
            tau,
            inner_iters: 1,
            outer_eps: 1e-8,
            max_outer: p.max_outer_hint.unwrap_or(DEFAULT_MAX_OUTER),
            warm_start_dual: true,
            param_preset: Some(preset),
        }
    }

    pub fn with_inner_iters(mut self, j: usize) -> Self {
        self.inner_iters = j;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.outer_eps = eps;
        self
    }

    pub fn with_max_outer(mut self, max_outer: usize) -> Self {
        self.max_outer = max_outer;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_warm_start(mut self, warm: bool) -> Self {
        self.warm_start_dual = warm;
        self
    }

    fn check_common(&self, p: &SplitProblem) -> Result<()> {
        let l = p.f.lipschitz();
        let upper = if l > 0.0 { 2.0 / l } else { f64::INFINITY };
        if !(self.gamma > 0.0 && self.gamma < upper) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} outside (0, 2/L) = (0, {upper})",
                self.gamma
            )));
        }
        if self.inner_iters == 0 {
            return Err(Error::InvalidParameter("inner_iters must be >= 1".into()));
        }
        if !(self.outer_eps > 0.0) {
            return Err(Error::InvalidParameter(format!("outer_eps must be > 0, got {}", self.outer_eps)));
        }
        Ok(())
    }

    /// `gamma in (0, 2/L)` and `lambda in (0, 2 / lambda_max(B B^T))`.
    pub fn validate_dual(&self, p: &SplitProblem) -> Result<()> {
        self.check_common(p)?;
        let upper = 2.0 / p.spectral.estimate;
        if !(self.lambda > 0.0 && self.lambda < upper) {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} outside (0, 2/lambda_max(BB^T)) = (0, {upper})",
                self.lambda
            )));
        }
        Ok(())
    }

    /// `gamma in (0, 2/L)`, `sigma, tau > 0` and `sigma tau |B|^2 < 1`.
    pub fn validate_primal_dual(&self, p: &SplitProblem) -> Result<()> {
        self.check_common(p)?;
        if !(self.sigma > 0.0 && self.tau > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} and tau = {} must be positive",
                self.sigma, self.tau
            )));
        }
        let product = self.sigma * self.tau * p.spectral.estimate;
        if !(product < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma tau |B|^2 = {product} must be < 1"
            )));
        }
        Ok(())
    }
}

/// One outer iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub objective: f64,
    pub rel_change: f64,
    pub inner_count: usize,
    pub snr: Option<f64>,
    pub nmsd: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<IterationRecord>,
    pub final_x: Vector,
    pub converged: bool,
    pub total_outer: usize,
}

impl SolveTrace {
    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn final_objective(&self) -> f64 {
        self.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Initial iterates; anything left `None` is derived from the problem's
/// starting point (or zero).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Start {
    pub x: Option<Vector>,
    pub y: Option<Vector>,
    pub z: Option<Vector>,
    pub v: Option<Vector>,
}

/// A single-step view of an iterative scheme.
pub trait Splitting {
    /// Runs one outer iteration and returns the number of inner iterations used.
    fn step(&mut self) -> usize;
    /// Current primal iterate.
    fn primal(&self) -> &Vector;
    /// Current dual iterate in the scheme's own scaling.
    fn dual(&self) -> &Vector;
}

/// `|x_new - x_old| / max(|x_old|, 1e-30)`.
pub fn relative_change(x_new: &Vector, x_old: &Vector) -> f64 {
    (x_new - x_old).norm() / x_old.norm().max(1e-30)
}

/// Runs `scheme` until the relative change drops to `outer_eps` or
/// `max_outer` iterations elapse, recording one [`IterationRecord`] per step.
pub fn drive<S: Splitting>(scheme: &mut S, p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    let start_obj = p.objective_unchecked(scheme.primal());
    let growth_cap = DIVERGENCE_GROWTH * start_obj.abs().max(1.0);
    let mut records = Vec::new();
    let mut converged = false;
    for k in 1..=c.max_outer {
        let prev = scheme.primal().clone();
        let inner_count = scheme.step();
        let x = scheme.primal();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: k,
                reason: "non-finite iterate".into(),
            });
        }
        let objective = p.objective_unchecked(x);
        if objective.is_nan() || (start_obj.is_finite() && objective.is_finite() && objective > growth_cap) {
            return Err(Error::Divergence {
                iteration: k,
                reason: format!("objective {objective} exceeds growth cap {growth_cap}"),
            });
        }
        let rel_change = relative_change(x, &prev);
        let report = p.metrics(x);
        records.push(IterationRecord {
            k,
            objective,
            rel_change,
            inner_count,
            snr: report.map(|r| r.snr_db),
            nmsd: report.map(|r| r.nmsd),
            ssim: report.and_then(|r| r.ssim),
        });
        if rel_change <= c.outer_eps {
            converged = true;
            break;
        }
    }
    Ok(SolveTrace {
        total_outer: records.len(),
        records,
        final_x: scheme.primal().clone(),
        converged,
    })
}

/// Condat-Vu parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CondatVuForm {
    /// Uses `tau' = config.tau`, `sigma' = config.sigma` directly; requires
    /// `1/tau' - sigma' |B|^2 > L/2`.
    Standard,
    /// `tau' = gamma / 2`, `sigma' = sigma / gamma`; requires
    /// `gamma in (0, 2/L)` and `sigma |B|^2 < 1`.
    Tau1,
}

/// Solver identifiers used by the experiment harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SolverId {
    Alg1,
    Alg2,
    Alg3,
    Alg4,
    Pdfp,
    CondatVu(CondatVuForm),
    Pd3o,
    DavisYin,
    NewScheme,
}

/// Which step sizes a solver consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFamily {
    /// `lambda`.
    Dual,
    /// `sigma`, `tau`.
    PrimalDual,
    /// `gamma` only.
    GammaOnly,
}

impl SolverId {
    pub const ALL: [SolverId; 10] = [
        Self::Alg1,
        Self::Alg2,
        Self::Alg3,
        Self::Alg4,
        Self::Pdfp,
        Self::CondatVu(CondatVuForm::Standard),
        Self::CondatVu(CondatVuForm::Tau1),
        Self::Pd3o,
        Self::DavisYin,
        Self::NewScheme,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Alg1 => "alg1",
            Self::Alg2 => "alg2",
            Self::Alg3 => "alg3",
            Self::Alg4 => "alg4",
            Self::Pdfp => "pdfp",
            Self::CondatVu(CondatVuForm::Standard) => "condat-vu",
            Self::CondatVu(CondatVuForm::Tau1) => "condat-vu-tau1",
            Self::Pd3o => "pd3o",
            Self::DavisYin => "davis-yin",
            Self::NewScheme => "new-scheme",
        }
    }

    pub fn family(self) -> StepFamily {
        match self {
            Self::Alg1 | Self::Alg3 | Self::Pdfp | Self::Pd3o => StepFamily::Dual,
            Self::Alg2 | Self::Alg4 | Self::CondatVu(_) | Self::NewScheme => StepFamily::PrimalDual,
            Self::DavisYin => StepFamily::GammaOnly,
        }
    }
}

impl fmt::Display for SolverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown solver id '{s}'")))
    }
}

pub fn solve_alg1_dual_fbs(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut DualForwardBackward::new(p, c, Start::default())?, p, c)
}

pub fn solve_alg2_pd_fbs(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut PrimalDualForwardBackward::new(p, c, Start::default())?, p, c)
}

pub fn solve_alg3_dual_three_op(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut DualThreeOperator::new(p, c, Start::default())?, p, c)
}

pub fn solve_alg4_pd_three_op(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut PrimalDualThreeOperator::new(p, c, Start::default())?, p, c)
}

pub fn solve_pdfp(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut Pdfp::new(p, c, Start::default())?, p, c)
}

pub fn solve_condat_vu(p: &SplitProblem, c: &SolverConfig, form: CondatVuForm) -> Result<SolveTrace> {
    drive(&mut CondatVu::new(p, c, form, Start::default())?, p, c)
}

pub fn solve_pd3o(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut Pd3o::new(p, c, Start::default())?, p, c)
}

pub fn solve_davis_yin(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut DavisYin::new(p, c, Start::default())?, p, c)
}

pub fn solve_new_scheme(p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    drive(&mut NewScheme::new(p, c, Start::default())?, p, c)
}

pub fn solve(id: SolverId, p: &SplitProblem, c: &SolverConfig) -> Result<SolveTrace> {
    match id {
        SolverId::Alg1 => solve_alg1_dual_fbs(p, c),
        SolverId::Alg2 => solve_alg2_pd_fbs(p, c),
        SolverId::Alg3 => solve_alg3_dual_three_op(p, c),
        SolverId::Alg4 => solve_alg4_pd_three_op(p, c),
        SolverId::Pdfp => solve_pdfp(p, c),
        SolverId::CondatVu(form) => solve_condat_vu(p, c, form),
        SolverId::Pd3o => solve_pd3o(p, c),
        SolverId::DavisYin => solve_davis_yin(p, c),
        SolverId::NewScheme => solve_new_scheme(p, c),
    }
}

pub fn objective(p: &SplitProblem, x: &Vector) -> Result<f64> {
    p.objective(x)
}
