//! Proximal maps, conjugate proximal maps via the Moreau decomposition, and
//! the Moreau envelope.
//!
//! For a closed proper convex `f` and `t > 0`,
//!
//! ```text
//! prox_{t f}(v)   = argmin_x  1/2 |x - v|^2 + t f(x)
//! prox_{t f*}(v)  = v - t prox_{f/t}(v / t)
//! grad env_t f(x) = (x - prox_{t f}(x)) / t
//! ```
//!
//! Values of indicator functions outside their set are `f64::INFINITY`. IEEE
//! infinity absorbs finite summands and compares above every finite value, so
//! objective sums stay well ordered.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::operators::Vector;

/// Singular values at or below this are treated as zero by the nuclear prox.
pub const SINGULAR_VALUE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProxKind {
    Zero,
    L1,
    GroupL21,
    IndicatorNonneg,
    IndicatorBox,
    Nuclear,
    QuadraticDistance,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ProxFunction {
    Zero,
    /// `weight * |x|_1`.
    L1 { weight: f64 },
    /// `weight * sum_i |(x_i, x_{i+stride}, x_{i+2 stride}, ...)|_2` for
    /// `i < stride`. With `stride = n` on a stacked gradient of length `2n`
    /// this is the isotropic TV norm.
    GroupL21 { weight: f64, stride: usize },
    IndicatorNonneg,
    /// Indicator of `[lower, upper]^n`.
    IndicatorBox { lower: f64, upper: f64 },
    /// `weight * |X|_*` of the row-major `rows x cols` matrix `X`.
    Nuclear { weight: f64, rows: usize, cols: usize },
    /// `weight / 2 * |x - center|^2`.
    QuadraticDistance { weight: f64, center: Vector },
}

fn check_step(step: f64) -> Result<()> {
    if step > 0.0 && step.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "prox step must be positive and finite, got {step}"
        )))
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

impl ProxFunction {
    pub fn kind(&self) -> ProxKind {
        match self {
            Self::Zero => ProxKind::Zero,
            Self::L1 { .. } => ProxKind::L1,
            Self::GroupL21 { .. } => ProxKind::GroupL21,
            Self::IndicatorNonneg => ProxKind::IndicatorNonneg,
            Self::IndicatorBox { .. } => ProxKind::IndicatorBox,
            Self::Nuclear { .. } => ProxKind::Nuclear,
            Self::QuadraticDistance { .. } => ProxKind::QuadraticDistance,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// Checks the function parameters and that it accepts vectors of length `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let weight_ok = |w: f64| {
            if w >= 0.0 && w.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("weight must be finite and >= 0, got {w}")))
            }
        };
        match self {
            Self::Zero | Self::IndicatorNonneg => Ok(()),
            Self::L1 { weight } => weight_ok(*weight),
            Self::GroupL21 { weight, stride } => {
                weight_ok(*weight)?;
                if *stride == 0 || n % stride != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "group stride {stride} does not divide length {n}"
                    )));
                }
                Ok(())
            }
            Self::IndicatorBox { lower, upper } => {
                if lower <= upper {
                    Ok(())
                } else {
                    Err(Error::InvalidArgument(format!("empty box [{lower}, {upper}]")))
                }
            }
            Self::Nuclear { weight, rows, cols } => {
                weight_ok(*weight)?;
                if rows * cols != n || *rows == 0 {
                    return Err(Error::InvalidArgument(format!(
                        "nuclear norm expects a {rows}x{cols} matrix, got a vector of length {n}"
                    )));
                }
                Ok(())
            }
            Self::QuadraticDistance { weight, center } => {
                weight_ok(*weight)?;
                check_len("quadratic distance center", center.len(), n)
            }
        }
    }

    /// `f(x)`; `f64::INFINITY` outside the domain of an indicator.
    pub fn value(&self, x: &Vector) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::L1 { weight } => weight * x.iter().map(|v| v.abs()).sum::<f64>(),
            Self::GroupL21 { weight, stride } => {
                let stride = *stride;
                let groups = x.len() / stride;
                let total: f64 = (0..stride)
                    .map(|i| (0..groups).map(|g| x[i + g * stride].powi(2)).sum::<f64>().sqrt())
                    .sum();
                weight * total
            }
            Self::IndicatorNonneg => {
                if x.iter().all(|&v| v >= 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::IndicatorBox { lower, upper } => {
                if x.iter().all(|v| (lower..=upper).contains(&v)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Self::Nuclear { weight, rows, cols } => {
                let m = DMatrix::from_row_slice(*rows, *cols, x.as_slice());
                weight * m.svd(false, false).singular_values.sum()
            }
            Self::QuadraticDistance { weight, center } => 0.5 * weight * (x - center).norm_squared(),
        }
    }

    /// `prox_{step f}(v)`.
    pub fn prox(&self, step: f64, v: &Vector) -> Result<Vector> {
        check_step(step)?;
        self.validate(v.len())?;
        Ok(self.prox_unchecked(step, v))
    }

    pub(crate) fn prox_unchecked(&self, step: f64, v: &Vector) -> Vector {
        match self {
            Self::Zero => v.clone(),
            Self::L1 { weight } => {
                let t = step * weight;
                v.map(|x| soft_threshold(x, t))
            }
            Self::GroupL21 { weight, stride } => {
                let (t, stride) = (step * weight, *stride);
                let groups = v.len() / stride;
                let mut out = v.clone();
                for i in 0..stride {
                    let norm = (0..groups).map(|g| v[i + g * stride].powi(2)).sum::<f64>().sqrt();
                    let scale = if norm > t { 1.0 - t / norm } else { 0.0 };
                    for g in 0..groups {
                        out[i + g * stride] *= scale;
                    }
                }
                out
            }
            Self::IndicatorNonneg => v.map(|x| x.max(0.0)),
            Self::IndicatorBox { lower, upper } => v.map(|x| x.clamp(*lower, *upper)),
            Self::Nuclear { weight, rows, cols } => {
                singular_value_shrink(v, *rows, *cols, |s| (s - step * weight).max(0.0))
            }
            Self::QuadraticDistance { weight, center } => {
                let tw = step * weight;
                (v + center * tw) / (1.0 + tw)
            }
        }
    }

    /// `prox_{step f*}(v) = v - step * prox_{f/step}(v / step)`.
    pub fn prox_conjugate(&self, step: f64, v: &Vector) -> Result<Vector> {
        check_step(step)?;
        self.validate(v.len())?;
        Ok(self.prox_conjugate_unchecked(step, v))
    }

    pub(crate) fn prox_conjugate_unchecked(&self, step: f64, v: &Vector) -> Vector {
        match self {
            // f* is the indicator of {0}.
            Self::Zero => Vector::zeros(v.len()),
            _ => v - self.prox_unchecked(1.0 / step, &(v / step)) * step,
        }
    }

    /// `prox_{(lambda f)*}(v) = lambda * prox_{f*/lambda}(v / lambda)`.
    pub fn scaled_conjugate_prox(&self, lambda: f64, v: &Vector) -> Result<Vector> {
        check_step(lambda)?;
        Ok(self.prox_conjugate(1.0 / lambda, &(v / lambda))? * lambda)
    }

    /// Gradient of the Moreau envelope, `(x - prox_{lambda f}(x)) / lambda`.
    /// It is `1/lambda`-Lipschitz.
    pub fn moreau_envelope_grad(&self, lambda: f64, x: &Vector) -> Result<Vector> {
        Ok((x - self.prox(lambda, x)?) / lambda)
    }

    /// `min_y f(y) + |x - y|^2 / (2 lambda)`, attained at the prox.
    pub fn moreau_envelope(&self, lambda: f64, x: &Vector) -> Result<f64> {
        let p = self.prox(lambda, x)?;
        Ok(self.value(&p) + (x - &p).norm_squared() / (2.0 * lambda))
    }
}

/// Applies `shrink` to the singular values of the row-major `rows x cols`
/// matrix stored in `v`.
fn singular_value_shrink(v: &Vector, rows: usize, cols: usize, shrink: impl Fn(f64) -> f64) -> Vector {
    let m = DMatrix::from_row_slice(rows, cols, v.as_slice());
    let svd = m.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let shrunk = svd
        .singular_values
        .map(|s| if s <= SINGULAR_VALUE_FLOOR { 0.0 } else { shrink(s) });
    let rebuilt = u * DMatrix::from_diagonal(&shrunk) * vt;
    Vector::from_iterator(rows * cols, rebuilt.transpose().iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn l1_soft_threshold() {
        let f = ProxFunction::L1 { weight: 1.0 };
        assert_eq!(f.prox(1.0, &dvector![3.0, -1.0, 0.5]).unwrap(), dvector![2.0, 0.0, 0.0]);
        let f = ProxFunction::L1 { weight: 0.2 };
        assert_relative_eq!(f.value(&dvector![1.0, -2.0]), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn nonneg_projection_and_value() {
        let f = ProxFunction::IndicatorNonneg;
        assert_eq!(f.prox(3.7, &dvector![-2.0, 3.0]).unwrap(), dvector![0.0, 3.0]);
        assert_eq!(f.value(&dvector![-1.0, 0.0]), f64::INFINITY);
        assert_eq!(f.value(&dvector![1.0, 0.0]), 0.0);
    }

    #[test]
    fn nuclear_shrinks_singular_values() {
        let f = ProxFunction::Nuclear { weight: 1.0, rows: 2, cols: 2 };
        let p = f.prox(1.0, &dvector![3.0, 0.0, 0.0, 1.0]).unwrap();
        for (a, b) in p.iter().zip([2.0, 0.0, 0.0, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_relative_eq!(f.value(&dvector![3.0, 0.0, 0.0, 1.0]), 4.0, epsilon = 1e-12);
        assert!(f.prox(1.0, &dvector![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn group_l21_shrinks_pairs() {
        let f = ProxFunction::GroupL21 { weight: 1.0, stride: 1 };
        let p = f.prox(1.0, &dvector![3.0, 4.0]).unwrap();
        assert_relative_eq!(p[0], 2.4, epsilon = 1e-14);
        assert_relative_eq!(p[1], 3.2, epsilon = 1e-14);
        // Pairs (y_i, y_{n+i}) with n = 2.
        let f = ProxFunction::GroupL21 { weight: 0.5, stride: 2 };
        assert_relative_eq!(f.value(&dvector![3.0, 0.0, 4.0, 1.0]), 0.5 * (5.0 + 1.0), epsilon = 1e-15);
        let p = f.prox(2.0, &dvector![3.0, 0.0, 4.0, 1.0]).unwrap();
        assert_eq!(p[1], 0.0);
        assert_eq!(p[3], 0.0);
        assert!(f.prox(1.0, &dvector![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn quadratic_distance_closed_form() {
        let u = dvector![1.0, -2.0];
        let f = ProxFunction::QuadraticDistance { weight: 1.0, center: u.clone() };
        let v = dvector![0.5, 4.0];
        let tau = 0.3;
        assert_eq!(f.prox(tau, &v).unwrap(), (&v + &u * tau) / (1.0 + tau));
    }

    #[test]
    fn conjugate_of_l1_is_box_projection() {
        let f = ProxFunction::L1 { weight: 1.0 };
        assert_eq!(f.prox_conjugate(1.0, &dvector![0.5, -2.0]).unwrap(), dvector![0.5, -1.0]);
        let scaled = f.scaled_conjugate_prox(2.0, &dvector![3.0, -0.5]).unwrap();
        assert_eq!(scaled, dvector![2.0, -0.5]);
        assert_eq!(
            f.scaled_conjugate_prox(1.0, &dvector![0.5, -2.0]).unwrap(),
            f.prox_conjugate(1.0, &dvector![0.5, -2.0]).unwrap()
        );
    }

    #[test]
    fn conjugate_of_zero_maps_to_origin() {
        let f = ProxFunction::Zero;
        assert_eq!(f.prox_conjugate(0.7, &dvector![1.0, -5.0]).unwrap(), dvector![0.0, 0.0]);
    }

    #[test]
    fn invalid_steps_rejected() {
        let f = ProxFunction::L1 { weight: 1.0 };
        assert!(f.prox(0.0, &dvector![1.0]).is_err());
        assert!(f.prox(-1.0, &dvector![1.0]).is_err());
        assert!(f.prox_conjugate(f64::NAN, &dvector![1.0]).is_err());
        assert!(ProxFunction::IndicatorBox { lower: 1.0, upper: 0.0 }.validate(3).is_err());
    }

    #[test]
    fn envelope_gradient_saturates_for_l1() {
        let f = ProxFunction::L1 { weight: 1.0 };
        assert_eq!(f.moreau_envelope_grad(1.0, &dvector![3.0]).unwrap(), dvector![1.0]);
        // Central finite difference of the Huber envelope.
        let h = 1e-6;
        let fd = (f.moreau_envelope(1.0, &dvector![3.0 + h]).unwrap()
            - f.moreau_envelope(1.0, &dvector![3.0 - h]).unwrap())
            / (2.0 * h);
        assert_relative_eq!(fd, 1.0, epsilon = 1e-8);
        // A minimizer is a fixed point of the prox.
        assert_eq!(f.moreau_envelope_grad(0.4, &dvector![0.0]).unwrap(), dvector![0.0]);
    }
}
