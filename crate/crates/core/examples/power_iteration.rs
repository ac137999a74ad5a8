//! Power-iteration estimates of `lambda_max(B^T B)` against closed forms and
//! dense singular values.

use opsplit::operators::{
    difference_1d_lambda_max, estimate_norm, gradient_2d_lambda_max, make_blur_downsample, make_difference_1d,
    make_gradient_2d, LinearMap, NORM_MAX_ITERS, NORM_TOL,
};
use opsplit::problems::{ct::FanBeamGeometry, random_view_angles};

fn report(name: &str, op: &LinearMap, exact: Option<f64>) -> opsplit::Result<()> {
    let est = estimate_norm(op, NORM_TOL, NORM_MAX_ITERS, 0)?;
    let reference = exact.unwrap_or_else(|| op.to_dense().singular_values().max().powi(2));
    println!("{name:<28} estimate {:<12.8} reference {reference:<12.8} gap {:.1e}", est * est, (est * est - reference).abs());
    Ok(())
}

fn main() -> opsplit::Result<()> {
    report("difference-1d, n=200", &make_difference_1d(200)?, Some(difference_1d_lambda_max(200)))?;
    report("gradient-2d, 64x64", &make_gradient_2d(64, 64)?, Some(gradient_2d_lambda_max(64, 64)))?;
    report("blur + 2x2 average, 32x32", &make_blur_downsample(32, 32, 1.0, 2)?, None)?;
    let geometry = FanBeamGeometry::new(32, random_view_angles(20, 7), 48)?;
    report("fan-beam projector, 32x32", &LinearMap::Sparse(geometry.system_matrix()?), None)?;
    Ok(())
}
