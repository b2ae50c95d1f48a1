//! Scan-specific, self-supervised reconstruction of undersampled multi-coil
//! MRI.
//!
//! A reconstruction is produced by an unrolled network whose regularizer is a
//! coordinate network (multi-resolution hash encoding followed by a small
//! MLP) and whose data-consistency step is a conjugate-gradient solve of the
//! Tikhonov normal equations
//!
//! ```text
//! x = (EᴴE + λI)⁻¹ (Eᴴy + λz),     z = f_θ(φ(v))
//! ```
//!
//! The network is trained on the scan's own k-space only, through an exact
//! hand-written reverse pass (including the adjoint of the CG solve).
//!
//! Module map:
//! - [`numeric`]: complex grids, centered orthonormal FFT, seeded RNG.
//! - [`acquisition`]: masks, coil maps, phantom, encoding operator `E`.
//! - [`inr`]: hash encoding + MLP with forward and backward passes.
//! - [`unroll`]: CG data consistency, losses, Adam and the training loop.
//! - [`eval`]: metrics, baselines, ablation and sweep harnesses.
//! - [`io`]: the `CXG1` array container, checkpoints and PNG export.

pub mod acquisition;
pub mod error;
pub mod eval;
pub mod inr;
pub mod io;
pub mod numeric;
pub mod unroll;

pub use error::{Error, Result};
pub use numeric::{ComplexGrid, Rng, C64};
