use serde::{Deserialize, Serialize};

use crate::acquisition::{
    estimate_sensitivities, shepp_logan_with_phase, simulate_acquisition, synth_sensitivities,
    AcquisitionModel, MultiCoilKspace, PhantomPhase, SamplingMask, SamplingPattern,
    SensitivityMaps,
};
use crate::error::Result;
use crate::numeric::{ComplexGrid, Rng};
use crate::unroll::cg_solve;

/// Everything needed to simulate one scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub height: usize,
    pub width: usize,
    pub coils: usize,
    /// Standard deviation of complex k-space noise per real component.
    pub noise: f64,
    pub pattern: SamplingPattern,
    pub acceleration: f64,
    pub acs: usize,
    pub seed: u64,
    pub phase: PhantomPhase,
    /// Reconstruct with maps estimated from the ACS instead of the true ones.
    pub estimate_maps: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            height: 128,
            width: 128,
            coils: 8,
            noise: 0.005,
            pattern: SamplingPattern::RandomLines,
            acceleration: 4.0,
            acs: 16,
            seed: 0,
            phase: PhantomPhase::Zero,
            estimate_maps: false,
        }
    }
}

/// A simulated scan with its ground truth.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub image: ComplexGrid,
    pub true_maps: SensitivityMaps,
    pub mask: SamplingMask,
    /// Model used for reconstruction.
    pub model: AcquisitionModel,
    pub kspace: MultiCoilKspace,
}

impl Scenario {
    /// Mask and noise draw from separate streams of `config.seed`.
    pub fn build(config: &ScenarioConfig) -> Result<Self> {
        let (h, w) = (config.height, config.width);
        let image = shepp_logan_with_phase(h, w, config.phase)?;
        let true_maps = synth_sensitivities(config.coils, h, w)?;
        let root = Rng::new(config.seed);
        let mask = SamplingMask::generate(
            config.pattern,
            h,
            w,
            config.acceleration,
            config.acs,
            &mut root.derive(1),
        )?;
        let truth = AcquisitionModel::new(true_maps.clone(), mask.clone())?;
        let kspace = simulate_acquisition(&image, &truth, config.noise, &mut root.derive(2))?;
        let model = if config.estimate_maps {
            AcquisitionModel::new(estimate_sensitivities(&kspace, &mask)?, mask.clone())?
        } else {
            truth
        };
        Ok(Self {
            config: config.clone(),
            image,
            true_maps,
            mask,
            model,
            kspace,
        })
    }
}

/// `Eᴴy`.
pub fn zero_filled(y: &MultiCoilKspace, model: &AcquisitionModel) -> Result<ComplexGrid> {
    model.adjoint(y)
}

/// Tikhonov-regularized SENSE: the CG solve with a zero prior.
pub fn cg_sense(
    y: &MultiCoilKspace,
    model: &AcquisitionModel,
    lambda0: f64,
    n_iter: usize,
) -> Result<ComplexGrid> {
    let (h, w) = model.shape();
    cg_solve(&ComplexGrid::zeros(h, w), y, model, lambda0, n_iter)
}
