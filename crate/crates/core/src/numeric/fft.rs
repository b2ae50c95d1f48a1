//! Centered, orthonormal 2D discrete Fourier transforms.
//!
//! `fft2c(x) = fftshift(FFT(ifftshift(x))) / √(HW)`, so the DC sample sits at
//! index `(H/2, W/2)` (integer division) and the transform is unitary. Any
//! grid size is supported; rustfft picks mixed-radix or Bluestein plans.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftDirection, FftPlanner};

use super::grid::{ComplexGrid, C64};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft(len, direction))
}

/// Source index read by `ifftshift` for output index `i`.
#[inline]
pub fn ifftshift_index(i: usize, n: usize) -> usize {
    (i + n / 2) % n
}

/// Source index read by `fftshift` for output index `i`.
#[inline]
pub fn fftshift_index(i: usize, n: usize) -> usize {
    (i + n - n / 2) % n
}

/// Unnormalized, unshifted 2D transforms for one grid shape.
///
/// Holds the row and column plans plus reusable work buffers, so repeated
/// transforms of the same shape do not allocate.
pub struct Fft2Engine {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    transposed: Vec<C64>,
    scratch: Vec<C64>,
}

impl Fft2Engine {
    pub fn new(height: usize, width: usize) -> Self {
        let row_fwd = plan(width, FftDirection::Forward);
        let row_inv = plan(width, FftDirection::Inverse);
        let col_fwd = plan(height, FftDirection::Forward);
        let col_inv = plan(height, FftDirection::Inverse);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|p| p.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            height,
            width,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            transposed: vec![C64::new(0.0, 0.0); height * width],
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// 1D transforms of every row (length `width`) in place.
    pub fn process_rows(&mut self, buf: &mut [C64], direction: FftDirection) {
        debug_assert_eq!(buf.len(), self.height * self.width);
        let plan = match direction {
            FftDirection::Forward => &self.row_fwd,
            FftDirection::Inverse => &self.row_inv,
        };
        plan.process_with_scratch(buf, &mut self.scratch);
    }

    /// Full 2D transform in place: rows, then columns via a transpose.
    pub fn process(&mut self, buf: &mut [C64], direction: FftDirection) {
        self.process_rows(buf, direction);
        let (h, w) = (self.height, self.width);
        transpose(buf, &mut self.transposed, h, w);
        let plan = match direction {
            FftDirection::Forward => &self.col_fwd,
            FftDirection::Inverse => &self.col_inv,
        };
        plan.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, buf, w, h);
    }
}

/// `dst (cols×rows) = srcᵀ` for a row-major `rows×cols` source.
fn transpose(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const BLOCK: usize = 16;
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Shifts a grid so that index 0 moves to the center (`fftshift`).
pub fn fftshift(grid: &ComplexGrid) -> ComplexGrid {
    let (h, w) = grid.shape();
    ComplexGrid::from_fn(h, w, |r, c| {
        grid.get(fftshift_index(r, h), fftshift_index(c, w))
    })
}

/// Inverse of [`fftshift`].
pub fn ifftshift(grid: &ComplexGrid) -> ComplexGrid {
    let (h, w) = grid.shape();
    ComplexGrid::from_fn(h, w, |r, c| {
        grid.get(ifftshift_index(r, h), ifftshift_index(c, w))
    })
}

fn centered(grid: &ComplexGrid, direction: FftDirection) -> ComplexGrid {
    let (h, w) = grid.shape();
    let mut buf = ifftshift(grid).into_vec();
    Fft2Engine::new(h, w).process(&mut buf, direction);
    let scale = 1.0 / ((h * w) as f64).sqrt();
    let unshifted = ComplexGrid::from_vec(h, w, buf).expect("shape preserved");
    let mut out = fftshift(&unshifted);
    out.scale(scale);
    out
}

/// Centered orthonormal forward 2D DFT.
pub fn fft2c(img: &ComplexGrid) -> ComplexGrid {
    centered(img, FftDirection::Forward)
}

/// Centered orthonormal inverse 2D DFT; exact inverse of [`fft2c`].
pub fn ifft2c(ksp: &ComplexGrid) -> ComplexGrid {
    centered(ksp, FftDirection::Inverse)
}
