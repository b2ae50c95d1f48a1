//! Quality metrics, baselines and experiment harnesses.

mod harness;
mod metrics;
mod scenario;

pub use harness::{
    run_ablation, run_ablations, sweep_cg_iters, sweep_hyperparams, AblationVariant, RunRecord,
    Summary, SweepResult, SweepRow, METRICS_CSV_HEADER,
};
pub use metrics::{metrics, psnr, ssim, ssim_with_range, MetricPair, PSNR_CAP};
pub use scenario::{cg_sense, zero_filled, Scenario, ScenarioConfig};
