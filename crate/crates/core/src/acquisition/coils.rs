//! Coil sensitivity maps: synthetic generation and ACS-based estimation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::{ifft2c, ComplexGrid, C64};

use super::mask::{central_range, SamplingMask};
use super::operator::MultiCoilKspace;

/// Object support threshold, as a fraction of the maximum low-resolution
/// root-sum-of-squares.
pub const SUPPORT_THRESHOLD: f64 = 0.05;

/// Per-coil complex sensitivity maps sharing one grid shape.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    maps: Vec<ComplexGrid>,
}

impl SensitivityMaps {
    pub fn new(maps: Vec<ComplexGrid>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::invalid("at least one coil map is required"))?;
        let shape = first.shape();
        for m in &maps {
            m.check_shape(shape)?;
            if !m.is_finite() {
                return Err(Error::invalid("coil maps contain non-finite values"));
            }
        }
        Ok(Self { maps })
    }

    pub fn num_coils(&self) -> usize {
        self.maps.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }

    pub fn coil(&self, i: usize) -> &ComplexGrid {
        &self.maps[i]
    }

    pub fn coils(&self) -> &[ComplexGrid] {
        &self.maps
    }

    /// Root-sum-of-squares over coils at every pixel.
    pub fn rss(&self) -> Vec<f64> {
        rss(&self.maps)
    }
}

fn rss(grids: &[ComplexGrid]) -> Vec<f64> {
    let n = grids[0].len();
    (0..n)
        .map(|p| {
            grids
                .iter()
                .map(|g| g.data()[p].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Divides every coil by the RSS and removes the phase of coil 0, so that
/// `Σ|Cᵢ|² = 1` and coil 0 is real and non-negative. Pixels whose RSS does
/// not exceed `floor` are set to zero in every coil.
fn normalize(mut grids: Vec<ComplexGrid>, floor: f64) -> Vec<ComplexGrid> {
    let total = rss(&grids);
    let n = total.len();
    for p in 0..n {
        let norm = total[p];
        if norm <= floor || norm == 0.0 {
            for g in grids.iter_mut() {
                g.data_mut()[p] = C64::new(0.0, 0.0);
            }
            continue;
        }
        let reference = grids[0].data()[p];
        let phase = if reference.norm() > 0.0 {
            reference.conj() / reference.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        let factor = phase / norm;
        for g in grids.iter_mut() {
            g.data_mut()[p] *= factor;
        }
    }
    grids
}

/// Smooth synthetic coil maps for simulation.
///
/// Coil `i` has a Gaussian magnitude centered at angle `2π(i + ½)/n` on a
/// circle just outside the field of view and a linear phase ramp along that
/// direction. Maps are RSS-normalized everywhere, relative to coil 0 phase.
pub fn synth_sensitivities(
    num_coils: usize,
    height: usize,
    width: usize,
) -> Result<SensitivityMaps> {
    if num_coils == 0 {
        return Err(Error::invalid("num_coils must be at least 1"));
    }
    if height == 0 || width == 0 {
        return Err(Error::invalid("map dimensions must be positive"));
    }
    let extent = height.max(width) as f64;
    let (cy, cx) = ((height / 2) as f64, (width / 2) as f64);
    let ring = 0.6 * extent;
    let sigma = 0.45 * extent;
    let maps: Vec<ComplexGrid> = (0..num_coils)
        .map(|i| {
            let angle = 2.0 * PI * (i as f64 + 0.5) / num_coils as f64;
            let (s, c) = angle.sin_cos();
            let (py, px) = (cy + ring * s, cx + ring * c);
            ComplexGrid::from_fn(height, width, |r, col| {
                let (dy, dx) = (r as f64 - py, col as f64 - px);
                let magnitude = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                let along = ((col as f64 - cx) * c + (r as f64 - cy) * s) / extent;
                C64::from_polar(magnitude, PI * along)
            })
        })
        .collect();
    SensitivityMaps::new(normalize(maps, 0.0))
}

/// Symmetric raised-cosine (Hann) weights of length `n`.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| 0.5 - 0.5 * (2.0 * PI * (j as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Estimates coil maps from the calibration region of `ksp`.
///
/// The ACS block is tapered with a raised-cosine window, transformed to
/// low-resolution coil images, and normalized by their RSS inside the object
/// support (`RSS > 5%` of its maximum). Outside the support maps are zero.
pub fn estimate_sensitivities(
    ksp: &MultiCoilKspace,
    mask: &SamplingMask,
) -> Result<SensitivityMaps> {
    if mask.acs() == 0 {
        return Err(Error::invalid(
            "mask has no calibration region; cannot estimate sensitivities",
        ));
    }
    let shape = mask.shape();
    ksp.check_shape(shape)?;
    let (height, width) = shape;
    let (rows, cols) = mask.acs_region();
    let col_window = hann(cols.len());
    let row_window = if mask.pattern().is_lines() {
        vec![1.0; height]
    } else {
        hann(rows.len())
    };
    let row_range = if mask.pattern().is_lines() {
        0..height
    } else {
        central_range(height, mask.acs())
    };

    let low_res: Vec<ComplexGrid> = ksp
        .coils()
        .iter()
        .map(|coil| {
            let mut windowed = ComplexGrid::zeros(height, width);
            for (ri, r) in row_range.clone().enumerate() {
                for (ci, c) in cols.clone().enumerate() {
                    if mask.is_sampled(r, c) {
                        windowed.set(r, c, coil.get(r, c) * row_window[ri] * col_window[ci]);
                    }
                }
            }
            ifft2c(&windowed)
        })
        .collect();

    let total = rss(&low_res);
    let peak = total.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::invalid("calibration region contains no signal"));
    }
    SensitivityMaps::new(normalize(low_res, SUPPORT_THRESHOLD * peak))
}
