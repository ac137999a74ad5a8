//! Shepp-Logan phantom and a fan-beam ray-driven projector.
//!
//! Geometry, in pixel units with the image centred at the origin and
//! covering `[-N/2, N/2]^2`:
//!
//! * the source sits on a circle of radius `2N`;
//! * each view fans `rays` rays symmetrically about the line through the
//!   origin, with the fan half-angle chosen so the fan just covers the
//!   image's circumscribed circle (`asin(N / sqrt(2) / 2N)`);
//! * ray `k` is centred in its angular bin, `beta_k = -alpha + (k + 1/2) 2 alpha / rays`.
//!
//! Matrix entries are exact ray/pixel intersection lengths (Siddon's method).

use crate::error::{Error, Result};
use crate::operators::{SparseMatrix, Vector};

/// Ellipse `(intensity, semi-axis a, semi-axis b, x0, y0, rotation in degrees)`
/// in normalized `[-1, 1]^2` coordinates. The modified (high-contrast)
/// Shepp-Logan table, whose intensities lie in `[0, 1]`.
pub const SHEPP_LOGAN_ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Row-major `side x side` phantom sampled at pixel centres.
pub fn shepp_logan(side: usize) -> Vector {
    let n = side as f64;
    Vector::from_fn(side * side, |i, _| {
        let (r, c) = (i / side, i % side);
        let x = 2.0 * (c as f64 + 0.5) / n - 1.0;
        let y = 1.0 - 2.0 * (r as f64 + 0.5) / n;
        let value: f64 = SHEPP_LOGAN_ELLIPSES
            .iter()
            .filter(|&&(_, a, b, x0, y0, phi)| {
                let (s, co) = phi.to_radians().sin_cos();
                let (dx, dy) = (x - x0, y - y0);
                let u = (dx * co + dy * s) / a;
                let v = (-dx * s + dy * co) / b;
                u * u + v * v <= 1.0
            })
            .map(|e| e.0)
            .sum();
        value.clamp(0.0, 1.0)
    })
}

/// Line segment from `start` to `end` in pixel units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub start: [f64; 2],
    pub end: [f64; 2],
}

impl Ray {
    fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FanBeamGeometry {
    pub side: usize,
    /// Source angles in radians.
    pub view_angles: Vec<f64>,
    pub rays_per_view: usize,
    pub source_radius: f64,
}

impl FanBeamGeometry {
    pub fn new(side: usize, view_angles: Vec<f64>, rays_per_view: usize) -> Result<Self> {
        if side == 0 || view_angles.is_empty() || rays_per_view == 0 {
            return Err(Error::InvalidArgument(format!(
                "degenerate fan-beam geometry: side {side}, {} views, {rays_per_view} rays",
                view_angles.len()
            )));
        }
        Ok(Self {
            side,
            view_angles,
            rays_per_view,
            source_radius: 2.0 * side as f64,
        })
    }

    pub fn fan_half_angle(&self) -> f64 {
        let half_diag = self.side as f64 / std::f64::consts::SQRT_2;
        (half_diag / self.source_radius).asin()
    }

    /// Rays ordered view-major, matching the rows of [`system_matrix`](Self::system_matrix).
    pub fn rays(&self) -> Vec<Ray> {
        let alpha = self.fan_half_angle();
        let radius = self.source_radius;
        let bin = 2.0 * alpha / self.rays_per_view as f64;
        let mut rays = Vec::with_capacity(self.view_angles.len() * self.rays_per_view);
        for &theta in &self.view_angles {
            let src = [radius * theta.cos(), radius * theta.sin()];
            for k in 0..self.rays_per_view {
                let beta = -alpha + (k as f64 + 0.5) * bin;
                // Direction towards the origin rotated by beta.
                let phi = theta + std::f64::consts::PI + beta;
                let reach = 2.0 * radius;
                rays.push(Ray {
                    start: src,
                    end: [src[0] + reach * phi.cos(), src[1] + reach * phi.sin()],
                });
            }
        }
        rays
    }

    pub fn system_matrix(&self) -> Result<SparseMatrix> {
        let rows = self.rays().iter().map(|r| siddon(r, self.side)).collect();
        SparseMatrix::from_rows(self.side * self.side, rows)
    }
}

/// Intersection lengths of `ray` with the pixels of a `side x side` grid
/// covering `[-side/2, side/2]^2`, as `(row-major pixel index, length)`.
pub fn siddon(ray: &Ray, side: usize) -> Vec<(usize, f64)> {
    let half = side as f64 / 2.0;
    let d = [ray.end[0] - ray.start[0], ray.end[1] - ray.start[1]];

    // Parametric window inside the image box.
    let (mut t_lo, mut t_hi) = (0.0_f64, 1.0_f64);
    for axis in 0..2 {
        if d[axis] == 0.0 {
            if ray.start[axis] <= -half || ray.start[axis] >= half {
                return Vec::new();
            }
        } else {
            let a = (-half - ray.start[axis]) / d[axis];
            let b = (half - ray.start[axis]) / d[axis];
            t_lo = t_lo.max(a.min(b));
            t_hi = t_hi.min(a.max(b));
        }
    }
    if t_hi <= t_lo {
        return Vec::new();
    }

    let mut ts = vec![t_lo, t_hi];
    for axis in 0..2 {
        if d[axis] != 0.0 {
            for i in 0..=side {
                let t = (-half + i as f64 - ray.start[axis]) / d[axis];
                if t > t_lo && t < t_hi {
                    ts.push(t);
                }
            }
        }
    }
    ts.sort_by(f64::total_cmp);

    let length = ray.length();
    let mut out = Vec::with_capacity(ts.len());
    for w in ts.windows(2) {
        let seg = (w[1] - w[0]) * length;
        if seg <= 0.0 {
            continue;
        }
        let tm = 0.5 * (w[0] + w[1]);
        let xm = ray.start[0] + tm * d[0];
        let ym = ray.start[1] + tm * d[1];
        let col = ((xm + half).floor() as isize).clamp(0, side as isize - 1) as usize;
        let row = ((half - ym).floor() as isize).clamp(0, side as isize - 1) as usize;
        out.push((row * side + col, seg));
    }
    out
}
