//! Seeded constructors for the three benchmark problems.
//!
//! * fused Lasso: `1/2 |A x - b|^2 + mu1 |x|_1 + mu2 |D x|_1`
//! * constrained TV CT: `1/2 |A x - b|^2 + i_{x >= 0}(x) + mu TV(x)`
//! * low-rank TV super-resolution: `1/2 |DS X - T|^2 + l1 |X|_* + l2 TV(X)`
//!
//! Noise levels are variances: `noise_variance = 0.1` draws noise with standard
//! deviation `sqrt(0.1)`.

pub mod ct;
mod export;

pub use export::{export_instance, write_matrix_market, write_vector_market};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    make_blur_downsample, make_dense, make_difference_1d, make_gradient_2d, upsample_nearest, LinearMap,
    Vector,
};
use crate::prox::ProxFunction;
use crate::random::{self, streams};
use crate::solvers::{SmoothFunction, SplitProblem};
use rand::Rng;

/// `lambda_max(D D^T)` used for step presets with the 1D difference. The true
/// value `2 - 2 cos((n-1) pi / n)` is slightly smaller.
pub const DIFFERENCE_1D_LAMBDA_MAX: f64 = 4.0;
/// `lambda_max(D D^T)` used for step presets with the 2D gradient.
pub const GRADIENT_2D_LAMBDA_MAX: f64 = 8.0;
/// Step `gamma` used for super-resolution, where `|DS|` is not known exactly.
pub const LRTV_GAMMA: f64 = 0.1;
pub const LRTV_MAX_OUTER: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TvKind {
    #[default]
    Iso,
    Aniso,
}

impl TvKind {
    /// `weight * TV` as a function of the stacked gradient of an `n`-pixel image.
    pub fn penalty(self, weight: f64, n: usize) -> ProxFunction {
        match self {
            Self::Iso => ProxFunction::GroupL21 { weight, stride: n },
            Self::Aniso => ProxFunction::L1 { weight },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusedLassoSpec {
    pub m: usize,
    pub n: usize,
    pub mu1: f64,
    pub mu2: f64,
    pub noise_variance: f64,
    pub seed: u64,
    /// Use `lambda_max(DD^T) = 4` for presets instead of the power-iteration estimate.
    pub rounded_spectral_constant: bool,
}

impl Default for FusedLassoSpec {
    fn default() -> Self {
        Self {
            m: 100,
            n: 200,
            mu1: 0.2,
            mu2: 0.8,
            noise_variance: 0.1,
            seed: 7,
            rounded_spectral_constant: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtSpec {
    pub img_side: usize,
    pub views: usize,
    pub rays: usize,
    pub mu: f64,
    pub noise_variance: f64,
    pub tv: TvKind,
    pub seed: u64,
}

impl Default for CtSpec {
    fn default() -> Self {
        Self {
            img_side: 64,
            views: 20,
            rays: 96,
            mu: 0.5,
            noise_variance: 0.01,
            tv: TvKind::Iso,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrtvSpec {
    pub rows: usize,
    pub cols: usize,
    pub blur_sigma: f64,
    pub factor: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
}

impl Default for LrtvSpec {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            blur_sigma: 1.0,
            factor: 2,
            lambda1: 0.01,
            lambda2: 0.01,
            seed: 7,
        }
    }
}

/// One benchmark instance description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ExperimentSpec {
    FusedLasso(FusedLassoSpec),
    ConstrainedTvCt(CtSpec),
    LrtvSr(LrtvSpec),
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FusedLasso(_) => "fused-lasso",
            Self::ConstrainedTvCt(_) => "constrained-tv-ct",
            Self::LrtvSr(_) => "lrtv-sr",
        }
    }

    pub fn default_for(name: &str) -> Result<Self> {
        match name {
            "fused-lasso" => Ok(Self::FusedLasso(FusedLassoSpec::default())),
            "constrained-tv-ct" => Ok(Self::ConstrainedTvCt(CtSpec::default())),
            "lrtv-sr" => Ok(Self::LrtvSr(LrtvSpec::default())),
            _ => Err(Error::Config(format!(
                "unknown experiment '{name}' (expected fused-lasso, constrained-tv-ct or lrtv-sr)"
            ))),
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Self::FusedLasso(s) => s.seed,
            Self::ConstrainedTvCt(s) => s.seed,
            Self::LrtvSr(s) => s.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            Self::FusedLasso(s) => s.seed = seed,
            Self::ConstrainedTvCt(s) => s.seed = seed,
            Self::LrtvSr(s) => s.seed = seed,
        }
    }

    pub fn build(&self) -> Result<SplitProblem> {
        match self {
            Self::FusedLasso(s) => {
                let p = build_fused_lasso(s.m, s.n, s.mu1, s.mu2, s.noise_variance, s.seed)?;
                Ok(if s.rounded_spectral_constant {
                    p
                } else {
                    let est = p.spectral.estimate;
                    p.with_nominal_lambda_max(est)
                })
            }
            Self::ConstrainedTvCt(s) => {
                build_ct_problem(s.img_side, s.views, s.rays, s.mu, s.noise_variance, s.tv, s.seed)
            }
            Self::LrtvSr(s) => {
                build_lrtv_problem(s.rows, s.cols, s.blur_sigma, s.factor, s.lambda1, s.lambda2, s.seed)
            }
        }
    }
}

fn check_weights(weights: &[f64]) -> Result<()> {
    match weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
        Some(w) => Err(Error::InvalidArgument(format!("weights must be finite and >= 0, got {w}"))),
        None => Ok(()),
    }
}

/// Piecewise-constant coefficient vector: 2 on `1..=20` and `121..=125`, 3 at
/// `41`, 1 on `71..=85` (1-based), 0 elsewhere. For `n < 126` the blocks are
/// rescaled by `n / 200`.
pub fn fused_lasso_ground_truth(n: usize) -> Vector {
    // (first, last, value), 1-based inclusive
    const BLOCKS: [(usize, usize, f64); 4] = [(1, 20, 2.0), (41, 41, 3.0), (71, 85, 1.0), (121, 125, 2.0)];
    let mut x = Vector::zeros(n);
    for (first, last, value) in BLOCKS {
        let (lo, hi) = if n >= 126 {
            (first - 1, last)
        } else {
            let scale = n as f64 / 200.0;
            let lo = ((first - 1) as f64 * scale).floor() as usize;
            let hi = ((last as f64 * scale).round() as usize).max(lo + 1).min(n);
            (lo, hi)
        };
        for xi in x.rows_mut(lo, hi.saturating_sub(lo)).iter_mut() {
            *xi = value;
        }
    }
    x
}

pub fn build_fused_lasso(m: usize, n: usize, mu1: f64, mu2: f64, noise_var: f64, seed: u64) -> Result<SplitProblem> {
    if m == 0 || n < 10 {
        return Err(Error::InvalidArgument(format!("fused Lasso needs m >= 1 and n >= 10, got m={m}, n={n}")));
    }
    check_weights(&[mu1, mu2, noise_var])?;
    let truth = fused_lasso_ground_truth(n);
    let a = random::gaussian_matrix(&mut random::stream(seed, streams::MATRIX), m, n);
    let noise = random::gaussian_vector(&mut random::stream(seed, streams::NOISE), m, noise_var.sqrt());
    let b = &a * &truth + noise;
    let f = SmoothFunction::least_squares(make_dense(a)?, b)?;
    SplitProblem::new(
        f,
        ProxFunction::L1 { weight: mu1 },
        ProxFunction::L1 { weight: mu2 },
        make_difference_1d(n)?,
    )?
    .with_name("fused-lasso")
    .with_nominal_lambda_max(DIFFERENCE_1D_LAMBDA_MAX)
    .with_ground_truth(truth)
}

/// View angles drawn uniformly from `[0, 2 pi)` and sorted.
pub fn random_view_angles(views: usize, seed: u64) -> Vec<f64> {
    let mut rng = random::stream(seed, streams::GEOMETRY);
    let mut angles: Vec<f64> = (0..views)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn build_ct_problem(
    img_side: usize,
    views: usize,
    rays: usize,
    mu: f64,
    noise_var: f64,
    tv_kind: TvKind,
    seed: u64,
) -> Result<SplitProblem> {
    if img_side < 16 || views == 0 || rays == 0 {
        return Err(Error::InvalidArgument(format!(
            "CT needs img_side >= 16 and at least one view and ray, got {img_side}, {views}, {rays}"
        )));
    }
    check_weights(&[mu, noise_var])?;
    let geometry = ct::FanBeamGeometry::new(img_side, random_view_angles(views, seed), rays)?;
    let a = LinearMap::Sparse(geometry.system_matrix()?);
    let truth = ct::shepp_logan(img_side);
    let noise = random::gaussian_vector(&mut random::stream(seed, streams::NOISE), a.out_dim(), noise_var.sqrt());
    let b = a.apply(&truth)? + noise;
    let n = img_side * img_side;
    SplitProblem::new(
        SmoothFunction::least_squares(a, b)?,
        ProxFunction::IndicatorNonneg,
        tv_kind.penalty(mu, n),
        make_gradient_2d(img_side, img_side)?,
    )?
    .with_name("constrained-tv-ct")
    .with_nominal_lambda_max(GRADIENT_2D_LAMBDA_MAX)
    .with_ground_truth(truth)?
    .with_image(img_side, img_side, 1.0)
}

/// Piecewise-constant image of rank at most 4: a constant background plus
/// three axis-aligned rectangles with seeded placement. Values lie in `[0, 1]`.
pub fn low_rank_phantom(rows: usize, cols: usize, seed: u64) -> Vector {
    let mut rng = random::stream(seed, streams::PHANTOM);
    let mut img = Vector::from_element(rows * cols, 0.1);
    for _ in 0..3 {
        let h = rng.random_range(rows / 4..=rows / 2).max(1);
        let w = rng.random_range(cols / 4..=cols / 2).max(1);
        let r0 = rng.random_range(0..=rows - h);
        let c0 = rng.random_range(0..=cols - w);
        let level = rng.random_range(0.2..0.3);
        for r in r0..r0 + h {
            for c in c0..c0 + w {
                img[r * cols + c] += level;
            }
        }
    }
    img
}

pub fn build_lrtv_problem(
    rows: usize,
    cols: usize,
    blur_sigma: f64,
    factor: usize,
    lambda1: f64,
    lambda2: f64,
    seed: u64,
) -> Result<SplitProblem> {
    check_weights(&[lambda1, lambda2])?;
    let ds = make_blur_downsample(rows, cols, blur_sigma, factor)?;
    let truth = low_rank_phantom(rows, cols, seed);
    let target = ds.apply(&truth)?;
    let initial = upsample_nearest(&target, rows / factor, cols / factor, factor)?;
    let n = rows * cols;
    SplitProblem::new(
        SmoothFunction::least_squares(ds, target)?,
        ProxFunction::Nuclear { weight: lambda1, rows, cols },
        TvKind::Iso.penalty(lambda2, n),
        make_gradient_2d(rows, cols)?,
    )?
    .with_name("lrtv-sr")
    .with_nominal_lambda_max(GRADIENT_2D_LAMBDA_MAX)
    .with_gamma_hint(LRTV_GAMMA)
    .with_max_outer_hint(LRTV_MAX_OUTER)
    .with_ground_truth(truth)?
    .with_image(rows, cols, 1.0)?
    .with_initial(initial)
}
