//! The multi-coil encoding operator `E = [M F Cᵢ]ᵢ` and its adjoint.

use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::numeric::fft::{ifftshift_index, Fft2Engine};
use crate::numeric::{fft2c, ifft2c, ComplexGrid, Rng, C64};

use super::coils::SensitivityMaps;
use super::mask::SamplingMask;

/// Per-coil k-space planes.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiCoilKspace {
    coils: Vec<ComplexGrid>,
}

impl MultiCoilKspace {
    pub fn new(coils: Vec<ComplexGrid>) -> Result<Self> {
        let first = coils
            .first()
            .ok_or_else(|| Error::invalid("k-space needs at least one coil"))?;
        let shape = first.shape();
        for c in &coils {
            c.check_shape(shape)?;
        }
        Ok(Self { coils })
    }

    pub fn zeros(num_coils: usize, height: usize, width: usize) -> Self {
        Self {
            coils: (0..num_coils)
                .map(|_| ComplexGrid::zeros(height, width))
                .collect(),
        }
    }

    pub fn num_coils(&self) -> usize {
        self.coils.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.coils[0].shape()
    }

    pub fn check_shape(&self, shape: (usize, usize)) -> Result<()> {
        self.coils.iter().try_for_each(|c| c.check_shape(shape))
    }

    pub fn coil(&self, i: usize) -> &ComplexGrid {
        &self.coils[i]
    }

    pub fn coils(&self) -> &[ComplexGrid] {
        &self.coils
    }

    pub fn coils_mut(&mut self) -> &mut [ComplexGrid] {
        &mut self.coils
    }

    pub fn into_coils(self) -> Vec<ComplexGrid> {
        self.coils
    }

    /// Iterates all samples, coil-major.
    pub fn iter(&self) -> impl Iterator<Item = &C64> {
        self.coils.iter().flat_map(|c| c.data().iter())
    }

    pub fn norm(&self) -> f64 {
        self.coils.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.coils.iter().map(|c| c.norm_l1()).sum()
    }

    /// `Σᵢ ⟨selfᵢ, otherᵢ⟩`.
    pub fn dot(&self, other: &MultiCoilKspace) -> C64 {
        self.coils
            .iter()
            .zip(&other.coils)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.coils.iter_mut().for_each(|c| c.scale(alpha));
    }

    pub fn sub(&self, other: &MultiCoilKspace) -> MultiCoilKspace {
        MultiCoilKspace {
            coils: self
                .coils
                .iter()
                .zip(&other.coils)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coils.iter().all(|c| c.is_finite())
    }
}

/// Coil maps plus sampling mask: everything needed to apply `E` and `Eᴴ`.
#[derive(Clone, Debug)]
pub struct AcquisitionModel {
    maps: SensitivityMaps,
    mask: SamplingMask,
    /// Mask weights in unshifted FFT order, pre-scaled by the orthonormal
    /// factor of one forward/inverse pair. For column-separable masks only
    /// one row is stored.
    unshifted_mask: Vec<f64>,
    separable: bool,
}

impl AcquisitionModel {
    pub fn new(maps: SensitivityMaps, mask: SamplingMask) -> Result<Self> {
        if maps.shape() != mask.shape() {
            return Err(Error::ShapeMismatch {
                expected: maps.shape(),
                found: mask.shape(),
            });
        }
        let (h, w) = mask.shape();
        let separable = mask.is_column_separable();
        let unshifted_mask = if separable {
            let scale = 1.0 / w as f64;
            (0..w)
                .map(|ku| {
                    if mask.is_sampled(0, ifftshift_index(ku, w)) {
                        scale
                    } else {
                        0.0
                    }
                })
                .collect()
        } else {
            let scale = 1.0 / (h * w) as f64;
            let mut m = vec![0.0; h * w];
            for ru in 0..h {
                for cu in 0..w {
                    if mask.is_sampled(ifftshift_index(ru, h), ifftshift_index(cu, w)) {
                        m[ru * w + cu] = scale;
                    }
                }
            }
            m
        };
        Ok(Self {
            maps,
            mask,
            unshifted_mask,
            separable,
        })
    }

    pub fn maps(&self) -> &SensitivityMaps {
        &self.maps
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mask.shape()
    }

    pub fn num_coils(&self) -> usize {
        self.maps.num_coils()
    }

    /// `E x`: per coil `M ⊙ fft2c(Cᵢ ⊙ x)`.
    pub fn forward(&self, x: &ComplexGrid) -> Result<MultiCoilKspace> {
        x.check_shape(self.shape())?;
        let coils = self
            .maps
            .coils()
            .iter()
            .map(|map| {
                let mut k = fft2c(&map.hadamard(x));
                self.mask.apply(&mut k);
                k
            })
            .collect();
        Ok(MultiCoilKspace { coils })
    }

    /// `Eᴴ y = Σᵢ conj(Cᵢ) ⊙ ifft2c(M ⊙ yᵢ)`.
    pub fn adjoint(&self, y: &MultiCoilKspace) -> Result<ComplexGrid> {
        y.check_shape(self.shape())?;
        if y.num_coils() != self.num_coils() {
            return Err(Error::invalid(format!(
                "k-space has {} coils, model has {}",
                y.num_coils(),
                self.num_coils()
            )));
        }
        let (h, w) = self.shape();
        let mut out = ComplexGrid::zeros(h, w);
        for (map, yi) in self.maps.coils().iter().zip(y.coils()) {
            let mut masked = yi.clone();
            self.mask.apply(&mut masked);
            let img = ifft2c(&masked);
            for ((o, m), v) in out.data_mut().iter_mut().zip(map.data()).zip(img.data()) {
                *o += m.conj() * v;
            }
        }
        Ok(out)
    }

    /// Zeroes unsampled locations of every coil.
    pub fn apply_mask(&self, y: &mut MultiCoilKspace) {
        for c in y.coils_mut() {
            self.mask.apply(c);
        }
    }

    /// Workspace for repeated applications of `EᴴE + λI`.
    pub fn normal_operator(&self) -> NormalOperator<'_> {
        let (h, w) = self.shape();
        NormalOperator {
            model: self,
            engine: Fft2Engine::new(h, w),
            work: vec![C64::new(0.0, 0.0); h * w],
            col_perm: (0..w).map(|c| unshifted_position(c, w)).collect(),
            row_perm: (0..h).map(|r| unshifted_position(r, h)).collect(),
        }
    }
}

/// Position of centered index `i` after `ifftshift`.
#[inline]
fn unshifted_position(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

/// Applies `EᴴE + λI` without materializing multi-coil k-space.
///
/// Works in the unshifted FFT layout: the centering permutations are folded
/// into the coil-map products. For column-separable (line) masks the
/// phase-encode transform along the height cancels, leaving 1D transforms
/// along the width only.
pub struct NormalOperator<'a> {
    model: &'a AcquisitionModel,
    engine: Fft2Engine,
    work: Vec<C64>,
    col_perm: Vec<usize>,
    row_perm: Vec<usize>,
}

impl NormalOperator<'_> {
    pub fn apply(&mut self, x: &ComplexGrid, lambda: f64, out: &mut ComplexGrid) {
        let (h, w) = self.model.shape();
        debug_assert_eq!(x.shape(), (h, w));
        let separable = self.model.separable;
        let xs = x.data();
        let od = out.data_mut();
        for (o, v) in od.iter_mut().zip(xs) {
            *o = v * lambda;
        }
        for map in self.model.maps.coils() {
            let md = map.data();
            for r in 0..h {
                let ru = if separable { r } else { self.row_perm[r] };
                let dst = &mut self.work[ru * w..(ru + 1) * w];
                let src = r * w;
                for c in 0..w {
                    dst[self.col_perm[c]] = md[src + c] * xs[src + c];
                }
            }
            if separable {
                self.engine
                    .process_rows(&mut self.work, FftDirection::Forward);
                for row in self.work.chunks_exact_mut(w) {
                    for (v, &m) in row.iter_mut().zip(&self.model.unshifted_mask) {
                        *v *= m;
                    }
                }
                self.engine
                    .process_rows(&mut self.work, FftDirection::Inverse);
            } else {
                self.engine.process(&mut self.work, FftDirection::Forward);
                for (v, &m) in self.work.iter_mut().zip(&self.model.unshifted_mask) {
                    *v *= m;
                }
                self.engine.process(&mut self.work, FftDirection::Inverse);
            }
            for r in 0..h {
                let ru = if separable { r } else { self.row_perm[r] };
                let row = &self.work[ru * w..(ru + 1) * w];
                let base = r * w;
                for c in 0..w {
                    od[base + c] += md[base + c].conj() * row[self.col_perm[c]];
                }
            }
        }
    }
}

/// `E x` plus complex Gaussian noise (std `noise_sigma` per real and
/// imaginary component) at sampled locations only.
pub fn simulate_acquisition(
    x: &ComplexGrid,
    model: &AcquisitionModel,
    noise_sigma: f64,
    rng: &mut Rng,
) -> Result<MultiCoilKspace> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::invalid(format!(
            "noise sigma must be finite and non-negative, got {noise_sigma}"
        )));
    }
    let mut y = model.forward(x)?;
    if noise_sigma > 0.0 {
        let mask = model.mask().sampled();
        for coil in y.coils_mut() {
            for (v, &s) in coil.data_mut().iter_mut().zip(mask) {
                if s {
                    *v += C64::new(noise_sigma * rng.normal(), noise_sigma * rng.normal());
                }
            }
        }
    }
    Ok(y)
}
