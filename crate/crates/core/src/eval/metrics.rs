//! Image quality metrics on magnitude images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::ComplexGrid;

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 999.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub psnr: f64,
    pub ssim: f64,
}

/// `20·log10(max|ref| / RMSE)` between magnitude images, capped at
/// [`PSNR_CAP`].
pub fn psnr(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    test.check_shape(reference.shape())?;
    let peak = reference.max_abs();
    if peak == 0.0 {
        return Err(Error::invalid("reference image is identically zero"));
    }
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a.norm() - b.norm()).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((20.0 * (peak / mse.sqrt()).log10()).min(PSNR_CAP))
}

/// Single-scale SSIM with an 11×11 Gaussian window (σ = 1.5), `K₁ = 0.01`,
/// `K₂ = 0.03` and dynamic range `max|ref|`, averaged over windows that lie
/// entirely inside the image.
pub fn ssim(reference: &ComplexGrid, test: &ComplexGrid) -> Result<f64> {
    let range = reference.max_abs();
    if range == 0.0 {
        return Err(Error::invalid("reference image is identically zero"));
    }
    ssim_with_range(reference, test, range)
}

/// SSIM with an explicit dynamic range; symmetric in its image arguments.
pub fn ssim_with_range(a: &ComplexGrid, b: &ComplexGrid, range: f64) -> Result<f64> {
    b.check_shape(a.shape())?;
    let (h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::invalid(format!(
            "SSIM dynamic range must be positive, got {range}"
        )));
    }
    let x = a.magnitude();
    let y = b.magnitude();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let kernel = gaussian_kernel();
    let filt = |img: &[f64]| valid_filter(img, h, w, &kernel);
    let (mx, my, sxx, syy, sxy) = (filt(&x), filt(&y), filt(&xx), filt(&yy), filt(&xy));

    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let n = mx.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / n as f64)
}

pub fn metrics(reference: &ComplexGrid, test: &ComplexGrid) -> Result<MetricPair> {
    Ok(MetricPair {
        psnr: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
    })
}

fn gaussian_kernel() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - half).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable correlation keeping only fully-contained windows.
fn valid_filter(img: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..n).map(|j| k[j] * img[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..n).map(|j| k[j] * rows[(r + j) * ow + c]).sum();
        }
    }
    out
}
