//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's proximal code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use opsplit::prox::ProxFunction;
use rand::Rng;

pub type Vector = DVector<f64>;

/// `lambda * f`, which stays in the same family.
pub fn scaled(f: &ProxFunction, lambda: f64) -> ProxFunction {
    match f.clone() {
        ProxFunction::L1 { weight } => ProxFunction::L1 { weight: weight * lambda },
        ProxFunction::GroupL21 { weight, stride } => ProxFunction::GroupL21 { weight: weight * lambda, stride },
        ProxFunction::Nuclear { weight, rows, cols } => ProxFunction::Nuclear { weight: weight * lambda, rows, cols },
        ProxFunction::QuadraticDistance { weight, center } => ProxFunction::QuadraticDistance { weight: weight * lambda, center },
        other => other,
    }
}

fn svd_map(v: &Vector, rows: usize, cols: usize, map: impl Fn(f64) -> f64) -> Vector {
    let m = DMatrix::from_row_slice(rows, cols, v.as_slice());
    let mut svd = m.svd(true, true);
    svd.singular_values.apply(|s| *s = map(*s));
    let r = svd.recompose().unwrap();
    Vector::from_iterator(rows * cols, r.transpose().iter().copied())
}

/// `prox_{s f*}(v)` from the conjugate of each family in closed form:
/// norm balls for the norms, the polar cone for the orthant, the support
/// function for the box and a shifted quadratic for the distance.
pub fn conjugate_prox(f: &ProxFunction, s: f64, v: &Vector) -> Vector {
    match f {
        ProxFunction::Zero => Vector::zeros(v.len()),
        ProxFunction::L1 { weight } => v.map(|t| t.max(-weight).min(*weight)),
        ProxFunction::GroupL21 { weight, stride } => {
            let mut out = v.clone();
            for g in 0..*stride {
                let idx: Vec<usize> = (g..v.len()).step_by(*stride).collect();
                let norm = idx.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
                if norm > *weight {
                    for &i in &idx {
                        out[i] = v[i] * weight / norm;
                    }
                }
            }
            out
        }
        ProxFunction::IndicatorNonneg => v.map(|t| if t < 0.0 { t } else { 0.0 }),
        // f*(u) = sum max(lo u, hi u); prox_{s f*}(v) = v - s P_[lo,hi](v / s)
        ProxFunction::IndicatorBox { lower, upper } => v.map(|t| t - s * (t / s).max(*lower).min(*upper)),
        ProxFunction::Nuclear { weight, rows, cols } => svd_map(v, *rows, *cols, |x| x.min(*weight)),
        // f*(u) = <u, c> + |u|^2 / (2w)
        ProxFunction::QuadraticDistance { weight, center } => (v - center * s) / (1.0 + s / weight),
    }
}

/// Golden-section search for the minimizer of a convex `phi` on `[lo, hi]`.
pub fn golden_min(phi: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (phi(a), phi(b));
    for _ in 0..200 {
        if hi - lo < 1e-13 {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = phi(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = phi(b);
        }
    }
    0.5 * (lo + hi)
}

/// `prox_{s f}(v)` by one-dimensional searches: per coordinate for separable
/// functions, along the ray through each group for the group norm, and per
/// singular value for the nuclear norm.
pub fn prox_brute_force(f: &ProxFunction, s: f64, v: &Vector) -> Vector {
    let span = |t: f64| t.abs() + 10.0;
    match f {
        ProxFunction::Zero => v.clone(),
        ProxFunction::L1 { weight } => {
            v.map(|t| golden_min(|x| 0.5 * (x - t).powi(2) + s * weight * x.abs(), -span(t), span(t)))
        }
        ProxFunction::IndicatorNonneg => v.map(|t| golden_min(|x| 0.5 * (x - t).powi(2), 0.0, span(t))),
        ProxFunction::IndicatorBox { lower, upper } => v.map(|t| golden_min(|x| 0.5 * (x - t).powi(2), *lower, *upper)),
        ProxFunction::QuadraticDistance { weight, center } => Vector::from_fn(v.len(), |i, _| {
            let (t, c) = (v[i], center[i]);
            golden_min(|x| 0.5 * (x - t).powi(2) + s * weight / 2.0 * (x - c).powi(2), -span(t) - c.abs(), span(t) + c.abs())
        }),
        ProxFunction::GroupL21 { weight, stride } => {
            let mut out = v.clone();
            for g in 0..*stride {
                let idx: Vec<usize> = (g..v.len()).step_by(*stride).collect();
                let norm = idx.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
                let t = golden_min(|t| 0.5 * (1.0 - t).powi(2) * norm * norm + s * weight * t * norm, 0.0, 1.0);
                for &i in &idx {
                    out[i] = t * v[i];
                }
            }
            out
        }
        ProxFunction::Nuclear { weight, rows, cols } => {
            svd_map(v, *rows, *cols, |sv| golden_min(|x| 0.5 * (x - sv).powi(2) + s * weight * x, 0.0, sv + 1.0))
        }
    }
}

/// Value of `f`, evaluated independently of the library.
pub fn value(f: &ProxFunction, x: &Vector) -> f64 {
    match f {
        ProxFunction::Zero => 0.0,
        ProxFunction::L1 { weight } => weight * x.abs().sum(),
        ProxFunction::GroupL21 { weight, stride } => {
            weight
                * (0..*stride)
                    .map(|g| (g..x.len()).step_by(*stride).map(|i| x[i] * x[i]).sum::<f64>().sqrt())
                    .sum::<f64>()
        }
        ProxFunction::IndicatorNonneg => {
            if x.iter().all(|t| *t >= 0.0) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        ProxFunction::IndicatorBox { lower, upper } => {
            if x.iter().all(|t| (*lower..=*upper).contains(t)) {
                0.0
            } else {
                f64::INFINITY
            }
        }
        ProxFunction::Nuclear { weight, rows, cols } => {
            weight * DMatrix::from_row_slice(*rows, *cols, x.as_slice()).singular_values().sum()
        }
        ProxFunction::QuadraticDistance { weight, center } => weight / 2.0 * (x - center).norm_squared(),
    }
}

/// Moves a candidate into the domain of an indicator.
pub fn into_domain(f: &ProxFunction, x: Vector) -> Vector {
    match f {
        ProxFunction::IndicatorNonneg => x.map(|t| t.max(0.0)),
        ProxFunction::IndicatorBox { lower, upper } => x.map(|t| t.clamp(*lower, *upper)),
        _ => x,
    }
}

pub fn gaussian(rng: &mut impl Rng, n: usize, scale: f64) -> Vector {
    use rand_distr::{Distribution, StandardNormal};
    Vector::from_fn(n, |_, _| scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
}

/// One function of every family with its vector length, sizes at most 4
/// (matrices at most 4 x 4).
pub fn small_functions(rng: &mut impl Rng) -> Vec<(ProxFunction, usize)> {
    vec![
        (ProxFunction::Zero, 3),
        (ProxFunction::L1 { weight: 0.8 }, 4),
        (ProxFunction::GroupL21 { weight: 1.1, stride: 2 }, 4),
        (ProxFunction::IndicatorNonneg, 4),
        (ProxFunction::IndicatorBox { lower: -0.3, upper: 0.7 }, 3),
        (ProxFunction::Nuclear { weight: 0.5, rows: 3, cols: 3 }, 9),
        (ProxFunction::Nuclear { weight: 0.9, rows: 2, cols: 4 }, 8),
        (ProxFunction::QuadraticDistance { weight: 1.7, center: gaussian(rng, 4, 1.0) }, 4),
    ]
}

/// `prox_{s f}(v) = argmin 1/2 |x - v|^2 + s f(x)` objective.
pub fn prox_objective(f: &ProxFunction, s: f64, v: &Vector, x: &Vector) -> f64 {
    0.5 * (x - v).norm_squared() + s * value(f, x)
}
