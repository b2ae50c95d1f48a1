use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionModel, MultiCoilKspace, NormalOperator};
use crate::error::{Error, Result};
use crate::eval::{metrics, MetricPair};
use crate::inr::{init_inr, render, render_backward, HashEncodingConfig, InrParams, RenderCache};
use crate::numeric::{ComplexGrid, Rng};

use super::adam::{sigmoid, softplus, softplus_inv, Adam, AdamConfig};
use super::cg::{cg_normal, dc_backward_with, dc_rhs};
use super::loss::total_loss;

/// Initial `(λ, λ_s)` pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HparamPreset {
    /// `λ = 0.01, λ_s = 0.5`, for simulated and retrospective data.
    Retrospective,
    /// `λ = 0.05, λ_s = 2.0`.
    Prospective,
}

impl HparamPreset {
    pub fn values(self) -> (f64, f64) {
        match self {
            HparamPreset::Retrospective => (0.01, 0.5),
            HparamPreset::Prospective => (0.05, 2.0),
        }
    }
}

/// Which image the loss sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReconMode {
    /// Rendered prior followed by CG data consistency.
    #[default]
    Unrolled,
    /// The rendered image itself, with no DC unit.
    InrOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnrollConfig {
    /// Basic units `T`.
    pub num_units: usize,
    pub cg_iters: usize,
    /// Initial DC weight `λ`.
    pub lambda: f64,
    /// Initial TV weight `λ_s`.
    pub lambda_s: f64,
    /// Train `λ` and `λ_s` alongside the network.
    pub learnable_hparams: bool,
    /// Keep `λ_s` at its initial value even when hyperparameters are learned.
    pub freeze_lambda_s: bool,
    pub mode: ReconMode,
    pub optimizer: AdamConfig,
    pub epochs: usize,
    /// Stop when the relative loss change over this many epochs drops below
    /// `early_stop_tol`. Zero disables.
    pub early_stop_window: usize,
    pub early_stop_tol: f64,
    /// Abort when the loss exceeds this multiple of the first loss.
    pub divergence_factor: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    /// Hash encoding; `None` picks [`HashEncodingConfig::for_image`].
    pub encoding: Option<HashEncodingConfig>,
    /// Scale k-space so that `max|Eᴴy| = 1` during training.
    pub normalize_kspace: bool,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        let (lambda, lambda_s) = HparamPreset::Retrospective.values();
        Self {
            num_units: 1,
            cg_iters: 20,
            lambda,
            lambda_s,
            learnable_hparams: true,
            freeze_lambda_s: false,
            mode: ReconMode::Unrolled,
            optimizer: AdamConfig::default(),
            epochs: 2000,
            early_stop_window: 50,
            early_stop_tol: 1e-6,
            divergence_factor: 1e3,
            seed: 0,
            hidden: vec![64, 64],
            encoding: None,
            normalize_kspace: true,
        }
    }
}

impl UnrollConfig {
    pub fn with_preset(preset: HparamPreset) -> Self {
        let (lambda, lambda_s) = preset.values();
        Self {
            lambda,
            lambda_s,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_units == 0 || self.cg_iters == 0 {
            return Err(Error::invalid("num_units and cg_iters must be at least 1"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.lambda_s >= 0.0) || !self.lambda_s.is_finite() {
            return Err(Error::invalid(format!(
                "lambda_s must be non-negative, got {}",
                self.lambda_s
            )));
        }
        if !(self.divergence_factor > 1.0) || !(self.early_stop_tol >= 0.0) {
            return Err(Error::invalid(
                "divergence_factor must exceed 1 and early_stop_tol be non-negative",
            ));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::invalid(format!(
                "hidden widths must be positive: {:?}",
                self.hidden
            )));
        }
        if let Some(enc) = &self.encoding {
            enc.validate()?;
        }
        self.optimizer.validate()
    }

    /// SHA-256 over the canonical JSON form of every setting.
    pub fn fingerprint(&self) -> String {
        crate::io::fingerprint(self)
    }

    pub fn encoding_for(&self, height: usize, width: usize) -> HashEncodingConfig {
        self.encoding
            .unwrap_or_else(|| HashEncodingConfig::for_image(height, width))
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct UnrollCache {
    /// Rendered prior `z`, shared by all units.
    pub z: ComplexGrid,
    pub render: RenderCache,
    /// `x⁰ = Eᴴy` followed by the output of every unit.
    pub units: Vec<ComplexGrid>,
}

/// Shared per-scan buffers: masked k-space, `Eᴴy` and the normal operator.
struct Problem<'a> {
    model: &'a AcquisitionModel,
    y: MultiCoilKspace,
    eh_y: ComplexGrid,
    op: NormalOperator<'a>,
}

impl<'a> Problem<'a> {
    fn new(y: &MultiCoilKspace, model: &'a AcquisitionModel, scale: f64) -> Result<Self> {
        if y.num_coils() != model.num_coils() {
            return Err(Error::invalid(format!(
                "k-space has {} coils, model has {}",
                y.num_coils(),
                model.num_coils()
            )));
        }
        y.check_shape(model.shape())?;
        let mut y = y.clone();
        model.apply_mask(&mut y);
        if scale != 1.0 {
            y.scale(scale);
        }
        let eh_y = model.adjoint(&y)?;
        Ok(Self {
            model,
            y,
            eh_y,
            op: model.normal_operator(),
        })
    }

    fn forward(
        &mut self,
        params: &InrParams,
        lambda: f64,
        config: &UnrollConfig,
    ) -> Result<(ComplexGrid, UnrollCache)> {
        let (h, w) = self.model.shape();
        let (z, render_cache) = render(params, h, w);
        let mut units = vec![self.eh_y.clone()];
        if config.mode == ReconMode::Unrolled {
            let rhs = dc_rhs(&self.eh_y, &z, lambda);
            for _ in 0..config.num_units {
                // z does not depend on the previous unit, so every unit solves the same system.
                units.push(cg_normal(&mut self.op, &rhs, lambda, config.cg_iters)?.x);
            }
        }
        let x_hat = match config.mode {
            ReconMode::Unrolled => units.last().unwrap().clone(),
            ReconMode::InrOnly => z.clone(),
        };
        Ok((
            x_hat,
            UnrollCache {
                z,
                render: render_cache,
                units,
            },
        ))
    }
}

/// Runs the unrolled network with `config.lambda`: `x⁰ = Eᴴy`, then for each
/// unit `z = render(θ)`, `x = CG(z)`.
pub fn unroll_forward(
    params: &InrParams,
    y: &MultiCoilKspace,
    model: &AcquisitionModel,
    config: &UnrollConfig,
) -> Result<(ComplexGrid, UnrollCache)> {
    config.validate()?;
    Problem::new(y, model, 1.0)?.forward(params, config.lambda, config)
}

/// One line of the loss log, evaluated before that epoch's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub total: f64,
    pub dc: f64,
    pub tv: f64,
    pub lambda: f64,
    pub lambda_s: f64,
}

/// Optimizer state of one training run.
/// Header line of [`loss_log_csv`].
pub const LOSS_LOG_HEADER: &str = "epoch,total,dc,tv,lambda,lambda_s";

impl LossRecord {
    /// One comma-separated line; floats use the shortest exact form.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.total, self.dc, self.tv, self.lambda, self.lambda_s
        )
    }
}

pub fn loss_log_csv(records: &[LossRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(LOSS_LOG_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub params: InrParams,
    pub lambda: f64,
    /// Unconstrained variable with `λ = softplus(rho)`.
    pub rho: f64,
    pub lambda_s: f64,
    pub adam: Adam,
    pub adam_hparams: Adam,
    pub epoch: usize,
    pub history: Vec<LossRecord>,
}

impl TrainState {
    pub fn new(params: InrParams, lambda: f64, lambda_s: f64) -> Self {
        let n = params.num_params();
        let rho = softplus_inv(lambda);
        Self {
            params,
            lambda,
            rho,
            lambda_s,
            adam: Adam::new(n),
            adam_hparams: Adam::new(2),
            epoch: 0,
            history: Vec::new(),
        }
    }

    /// Applies one Adam update from parameter and hyperparameter gradients.
    pub fn adam_step(
        &mut self,
        grads: &InrParams,
        grad_lambda: f64,
        grad_lambda_s: f64,
        config: &UnrollConfig,
    ) -> Result<()> {
        let opt = &config.optimizer;
        let hp_grads = [grad_lambda * sigmoid(self.rho), grad_lambda_s];
        if config.learnable_hparams && !hp_grads.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFinite {
                stage: "hyperparameter gradient",
                iteration: self.epoch,
            });
        }
        self.adam
            .update(&mut self.params.blocks_mut(), &grads.blocks(), opt.lr, opt)?;
        if config.learnable_hparams {
            let g_s = if config.freeze_lambda_s {
                0.0
            } else {
                hp_grads[1]
            };
            let mut rho = [self.rho];
            let mut ls = [self.lambda_s];
            self.adam_hparams.update(
                &mut [&mut rho, &mut ls],
                &[&[hp_grads[0]], &[g_s]],
                opt.lr_hparams,
                opt,
            )?;
            self.rho = rho[0];
            self.lambda = softplus(self.rho);
            if !config.freeze_lambda_s {
                self.lambda_s = ls[0].max(0.0);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReconReport {
    pub x_hat: ComplexGrid,
    pub losses: Vec<LossRecord>,
    pub lambda: f64,
    pub lambda_s: f64,
    pub metrics: Option<MetricPair>,
    pub seconds: f64,
    pub fingerprint: String,
    pub epochs_run: usize,
    pub stopped_early: bool,
    /// Factor applied to k-space during training.
    pub kspace_scale: f64,
}

/// Trains the network on one scan and returns the reconstruction.
pub fn train(
    y: &MultiCoilKspace,
    model: &AcquisitionModel,
    config: &UnrollConfig,
    reference: Option<&ComplexGrid>,
) -> Result<(ReconReport, TrainState)> {
    train_with(y, model, config, reference, |_| {})
}

/// [`train`] with a callback invoked after every recorded epoch.
pub fn train_with(
    y: &MultiCoilKspace,
    model: &AcquisitionModel,
    config: &UnrollConfig,
    reference: Option<&ComplexGrid>,
    mut observer: impl FnMut(&LossRecord),
) -> Result<(ReconReport, TrainState)> {
    let start = Instant::now();
    config.validate()?;
    let (h, w) = model.shape();
    if let Some(r) = reference {
        r.check_shape((h, w))?;
    }
    let scale = if config.normalize_kspace {
        let peak = model.adjoint(y)?.max_abs();
        if peak == 0.0 || !peak.is_finite() {
            return Err(Error::invalid("k-space has no usable signal to normalize"));
        }
        1.0 / peak
    } else {
        1.0
    };
    let mut problem = Problem::new(y, model, scale)?;
    let mut rng = Rng::new(config.seed);
    let params = init_inr(&config.encoding_for(h, w), &config.hidden, &mut rng)?;
    let mut state = TrainState::new(params, config.lambda, config.lambda_s);

    let mut stopped_early = false;
    let mut limit = f64::INFINITY;
    while state.epoch < config.epochs {
        let (x_hat, cache) = problem.forward(&state.params, state.lambda, config)?;
        let loss = total_loss(&problem.y, &x_hat, model, state.lambda_s)?;
        if !loss.total.is_finite() {
            return Err(Error::NonFinite {
                stage: "loss",
                iteration: state.epoch,
            });
        }
        if state.epoch == 0 {
            limit = config.divergence_factor * loss.total;
        } else if loss.total > limit {
            return Err(Error::Diverged {
                epoch: state.epoch,
                loss: loss.total,
                limit,
            });
        }
        let record = LossRecord {
            epoch: state.epoch,
            total: loss.total,
            dc: loss.dc,
            tv: loss.tv,
            lambda: state.lambda,
            lambda_s: state.lambda_s,
        };
        state.history.push(record);
        observer(&record);

        let win = config.early_stop_window;
        if win > 0 && state.history.len() > win {
            let past = state.history[state.history.len() - 1 - win].total;
            if (loss.total - past).abs() <= config.early_stop_tol * past.abs() {
                stopped_early = true;
                break;
            }
        }

        let (grad_z, grad_lambda) = match config.mode {
            ReconMode::Unrolled => dc_backward_with(
                &mut problem.op,
                &loss.grad_x,
                &cache.z,
                &x_hat,
                state.lambda,
                config.cg_iters,
            )?,
            ReconMode::InrOnly => (loss.grad_x, 0.0),
        };
        let grads = render_backward(&state.params, &cache.render, &grad_z)?;
        state.adam_step(&grads, grad_lambda, loss.grad_lambda_s, config)?;
        state.epoch += 1;
    }

    let (mut x_hat, _) = problem.forward(&state.params, state.lambda, config)?;
    if scale != 1.0 {
        x_hat.scale(1.0 / scale);
    }
    let metrics = reference.map(|r| metrics(r, &x_hat)).transpose()?;
    let report = ReconReport {
        x_hat,
        losses: state.history.clone(),
        lambda: state.lambda,
        lambda_s: state.lambda_s,
        metrics,
        seconds: start.elapsed().as_secs_f64(),
        fingerprint: config.fingerprint(),
        epochs_run: state.history.len(),
        stopped_early,
        kspace_scale: scale,
    };
    Ok((report, state))
}
