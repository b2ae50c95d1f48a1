//! Complex grids, centered FFTs and deterministic random numbers.

pub mod fft;
mod grid;
mod rng;

pub use fft::{fft2c, ifft2c};
pub use grid::{ComplexGrid, C64};
pub use rng::Rng;
