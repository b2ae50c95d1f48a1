use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Dense row-major complex 2D array.
///
/// Used for images, single-coil k-space planes and masks stored as weights.
/// Both dimensions are always positive and `data.len() == height * width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<C64>,
}

impl ComplexGrid {
    /// Builds a grid from row-major data, validating the shape.
    pub fn from_vec(height: usize, width: usize, data: Vec<C64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "grid data length {} does not match {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn try_zeros(height: usize, width: usize) -> Result<Self> {
        Self::from_vec(height, width, vec![C64::new(0.0, 0.0); height * width])
    }

    /// All-zero grid.
    ///
    /// Panics if either dimension is zero; use [`ComplexGrid::try_zeros`] for
    /// untrusted shapes.
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::try_zeros(height, width).expect("grid dimensions must be positive")
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut grid = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                grid.data[r * width + c] = f(r, c);
            }
        }
        grid
    }

    pub fn from_real(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::from_vec(
            height,
            width,
            values.iter().map(|&v| C64::new(v, 0.0)).collect(),
        )
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.height, self.width)
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; grids have positive dimensions.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.width + col] = value;
    }

    pub fn check_shape(&self, expected: (usize, usize)) -> Result<()> {
        if self.shape() != expected {
            return Err(Error::ShapeMismatch {
                expected,
                found: self.shape(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Euclidean (Frobenius) norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Sum of entry moduli.
    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Inner product `⟨self, other⟩ = Σ conj(self)·other`.
    pub fn dot(&self, other: &ComplexGrid) -> C64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `Re⟨self, other⟩`, the real inner product of the underlying ℝ²ᴺ vectors.
    pub fn real_dot(&self, other: &ComplexGrid) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .sum()
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: C64, x: &ComplexGrid) {
        debug_assert_eq!(self.shape(), x.shape());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * v;
        }
    }

    /// `self += alpha * x` for real `alpha`.
    pub fn axpy_real(&mut self, alpha: f64, x: &ComplexGrid) {
        debug_assert_eq!(self.shape(), x.shape());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            s.re += alpha * v.re;
            s.im += alpha * v.im;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for s in &mut self.data {
            *s *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> ComplexGrid {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn add(&self, other: &ComplexGrid) -> ComplexGrid {
        let mut out = self.clone();
        out.axpy_real(1.0, other);
        out
    }

    pub fn sub(&self, other: &ComplexGrid) -> ComplexGrid {
        let mut out = self.clone();
        out.axpy_real(-1.0, other);
        out
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &ComplexGrid) -> ComplexGrid {
        debug_assert_eq!(self.shape(), other.shape());
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Self {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn map(&self, mut f: impl FnMut(C64) -> C64) -> ComplexGrid {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Modulus of every entry, row-major.
    pub fn magnitude(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_zero_dims_and_bad_lengths() {
        assert!(ComplexGrid::try_zeros(0, 4).is_err());
        assert!(ComplexGrid::try_zeros(4, 0).is_err());
        assert!(ComplexGrid::from_vec(2, 2, vec![C64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn dot_is_conjugate_linear_in_first_argument() {
        let a = ComplexGrid::from_vec(1, 2, vec![C64::new(1.0, 2.0), C64::new(0.0, -1.0)]).unwrap();
        let b = ComplexGrid::from_vec(1, 2, vec![C64::new(3.0, 0.0), C64::new(2.0, 2.0)]).unwrap();
        // conj(1+2i)*3 + conj(-i)*(2+2i) = (3-6i) + (i)(2+2i) = 3-6i + 2i - 2 = 1-4i
        assert_eq!(a.dot(&b), C64::new(1.0, -4.0));
        assert_eq!(a.real_dot(&b), 1.0);
    }

    #[test]
    fn norms() {
        let a = ComplexGrid::from_vec(1, 2, vec![C64::new(3.0, 4.0), C64::new(0.0, -1.0)]).unwrap();
        assert_eq!(a.norm_l1(), 6.0);
        assert_eq!(a.norm_sqr(), 26.0);
        assert_eq!(a.max_abs(), 5.0);
    }
}
