//! Acquisition physics: masks, coil sensitivities, phantom, and the
//! encoding operator with its adjoint.

mod coils;
mod mask;
mod operator;
mod phantom;

pub use coils::{estimate_sensitivities, synth_sensitivities, SensitivityMaps, SUPPORT_THRESHOLD};
pub use mask::{
    central_range, line_count, SamplingMask, SamplingPattern, TRAJECTORY_RATE_TOLERANCE,
};
pub use operator::{simulate_acquisition, AcquisitionModel, MultiCoilKspace, NormalOperator};
pub use phantom::{shepp_logan, shepp_logan_with_phase, PhantomPhase};

use crate::error::Result;
use crate::numeric::ComplexGrid;

/// `E x`.
pub fn apply_e(x: &ComplexGrid, model: &AcquisitionModel) -> Result<MultiCoilKspace> {
    model.forward(x)
}

/// `Eᴴ y`.
pub fn apply_eh(y: &MultiCoilKspace, model: &AcquisitionModel) -> Result<ComplexGrid> {
    model.adjoint(y)
}
