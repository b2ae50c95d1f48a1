//! Unrolled reconstruction: rendered prior, CG data consistency, loss,
//! reverse pass and the per-scan training loop.

mod adam;
mod cg;
mod loss;
mod train;

pub use adam::{sigmoid, softplus, softplus_inv, Adam, AdamConfig};
pub use cg::{cg_normal, cg_solve, dc_backward, CgOutcome, CG_TOLERANCE};
pub use loss::{loss_dc, loss_tv, total_loss, LossBreakdown};
pub use train::{
    loss_log_csv, train, train_with, unroll_forward, HparamPreset, LossRecord, ReconMode,
    ReconReport, TrainState, UnrollCache, UnrollConfig, LOSS_LOG_HEADER,
};
