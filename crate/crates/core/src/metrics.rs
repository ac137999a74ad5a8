//! Reconstruction quality: SNR, NMSD and a global (unwindowed) SSIM.

use crate::error::{check_len, Result};
use crate::operators::Vector;

pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub snr_db: f64,
    pub nmsd: f64,
    pub ssim: Option<f64>,
}

impl MetricReport {
    pub fn new(x_true: &Vector, x_rec: &Vector, dynamic_range: Option<f64>) -> Result<Self> {
        let nmsd = nmsd(x_true, x_rec)?;
        let ssim = match dynamic_range {
            Some(range) => Some(ssim_global(x_true, x_rec, range)?),
            None => None,
        };
        Ok(Self {
            snr_db: snr_from_nmsd(nmsd),
            nmsd,
            ssim,
        })
    }
}

/// `|x - x_rec| / |x - mean(x)|`.
pub fn nmsd(x_true: &Vector, x_rec: &Vector) -> Result<f64> {
    check_len("nmsd", x_true.len(), x_rec.len())?;
    let mean = x_true.mean();
    let spread = x_true.map(|v| v - mean).norm();
    Ok((x_true - x_rec).norm() / spread)
}

/// `20 log10(|x - mean(x)| / |x - x_rec|)` in dB; `+inf` on exact recovery.
pub fn snr(x_true: &Vector, x_rec: &Vector) -> Result<f64> {
    Ok(snr_from_nmsd(nmsd(x_true, x_rec)?))
}

pub fn snr_from_nmsd(nmsd: f64) -> f64 {
    -20.0 * nmsd.log10()
}

/// Single-window SSIM over the whole image with `c1 = (k1 L)^2`,
/// `c2 = (k2 L)^2` and population (1/N) moments:
///
/// ```text
/// (2 mu_f mu_g + c1)(2 s_fg + c2) / ((mu_f^2 + mu_g^2 + c1)(s_f^2 + s_g^2 + c2))
/// ```
pub fn ssim_global(f: &Vector, g: &Vector, dynamic_range: f64) -> Result<f64> {
    check_len("ssim_global", f.len(), g.len())?;
    let n = f.len() as f64;
    let c1 = (SSIM_K1 * dynamic_range).powi(2);
    let c2 = (SSIM_K2 * dynamic_range).powi(2);
    let (mu_f, mu_g) = (f.mean(), g.mean());
    let var_f = f.iter().map(|v| (v - mu_f).powi(2)).sum::<f64>() / n;
    let var_g = g.iter().map(|v| (v - mu_g).powi(2)).sum::<f64>() / n;
    let cov = f.iter().zip(g.iter()).map(|(a, b)| (a - mu_f) * (b - mu_g)).sum::<f64>() / n;
    Ok((2.0 * mu_f * mu_g + c1) * (2.0 * cov + c2) / ((mu_f * mu_f + mu_g * mu_g + c1) * (var_f + var_g + c2)))
}
