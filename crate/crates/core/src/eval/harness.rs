//! Ablation and sweep drivers.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unroll::{train, ReconMode, UnrollConfig};

use super::metrics::metrics;
use super::scenario::{cg_sense, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// Full unrolled training.
    Baseline,
    /// CG-SENSE with the initial `λ` and no learned prior.
    NoRegularizer,
    /// The rendered image trained directly against the loss, no CG unit.
    NoDc,
    /// Full training with `λ_s` frozen at zero.
    NoTv,
}

impl AblationVariant {
    pub const ALL: [AblationVariant; 4] = [
        AblationVariant::Baseline,
        AblationVariant::NoRegularizer,
        AblationVariant::NoDc,
        AblationVariant::NoTv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Baseline => "baseline",
            AblationVariant::NoRegularizer => "no_regularizer",
            AblationVariant::NoDc => "no_dc",
            AblationVariant::NoTv => "no_tv",
        }
    }

    /// Training configuration for the variant. `None` for `NoRegularizer`,
    /// which does not train.
    pub fn train_config(self, base: &UnrollConfig) -> Option<UnrollConfig> {
        match self {
            AblationVariant::Baseline => Some(base.clone()),
            AblationVariant::NoRegularizer => None,
            AblationVariant::NoDc => Some(UnrollConfig {
                mode: ReconMode::InrOnly,
                ..base.clone()
            }),
            AblationVariant::NoTv => Some(UnrollConfig {
                lambda_s: 0.0,
                freeze_lambda_s: true,
                ..base.clone()
            }),
        }
    }
}

impl fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationVariant::ALL
            .into_iter()
            .find(|v| v.name() == s || v.name().replace('_', "-") == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown ablation variant {s:?}; expected baseline, no_regularizer, no_dc or no_tv"
                ))
            })
    }
}

/// Outcome of one run; failed runs keep their error and no metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn is_missing(&self) -> bool {
        self.psnr.is_none()
    }
}

/// Mean and sample standard deviation over finished runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Summary { mean, std })
    }
}

/// One axis value of a sweep or one ablation variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    /// Settings that define the row, e.g. `[("lambda", 0.02)]`.
    pub settings: Vec<(String, f64)>,
    pub runs: Vec<RunRecord>,
    pub psnr: Option<Summary>,
    pub ssim: Option<Summary>,
    pub seconds: Summary,
    pub missing: usize,
}

impl SweepRow {
    pub fn new(
        label: impl Into<String>,
        settings: Vec<(String, f64)>,
        runs: Vec<RunRecord>,
    ) -> Self {
        let done: Vec<&RunRecord> = runs.iter().filter(|r| !r.is_missing()).collect();
        let psnr: Vec<f64> = done.iter().filter_map(|r| r.psnr).collect();
        let ssim: Vec<f64> = done.iter().filter_map(|r| r.ssim).collect();
        let secs: Vec<f64> = runs.iter().map(|r| r.seconds).collect();
        Self {
            label: label.into(),
            settings,
            psnr: Summary::of(&psnr),
            ssim: Summary::of(&ssim),
            seconds: Summary::of(&secs).unwrap_or_default(),
            missing: runs.len() - done.len(),
            runs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

/// Header of [`SweepResult::to_csv`].
pub const METRICS_CSV_HEADER: &str = "variant,seed,psnr_db,ssim,seconds";

impl SweepResult {
    /// One line per run; failed runs leave the metric fields empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for row in &self.rows {
            for run in &row.runs {
                out.push_str(&format!(
                    "{},{},{},{},{:.3}\n",
                    row.label,
                    run.seed,
                    fmt(run.psnr),
                    fmt(run.ssim),
                    run.seconds
                ));
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }

    /// Row with the highest mean PSNR; the first such row on ties.
    pub fn best(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.psnr.is_some())
            .fold(None, |best: Option<&SweepRow>, r| match best {
                Some(b) if b.psnr.unwrap().mean >= r.psnr.unwrap().mean => Some(b),
                _ => Some(r),
            })
    }

    pub fn row(&self, label: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

/// Trains (or solves) one configuration and scores it against the phantom.
fn run_once(
    scenario: &Scenario,
    config: Option<&UnrollConfig>,
    base: &UnrollConfig,
    seed: u64,
) -> RunRecord {
    let start = Instant::now();
    let result = match config {
        Some(cfg) => {
            let cfg = UnrollConfig {
                seed,
                ..cfg.clone()
            };
            train(
                &scenario.kspace,
                &scenario.model,
                &cfg,
                Some(&scenario.image),
            )
            .map(|(r, _)| r.x_hat)
        }
        None => cg_sense(
            &scenario.kspace,
            &scenario.model,
            base.lambda,
            base.cg_iters,
        ),
    }
    .and_then(|x| metrics(&scenario.image, &x));
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(m) => RunRecord {
            seed,
            psnr: Some(m.psnr),
            ssim: Some(m.ssim),
            seconds,
            error: None,
        },
        Err(e) => RunRecord {
            seed,
            psnr: None,
            ssim: None,
            seconds,
            error: Some(e.to_string()),
        },
    }
}

fn check_seeds(seeds: &[u64]) -> Result<()> {
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    Ok(())
}

/// Runs one ablation variant over the training seeds.
pub fn run_ablation(
    variant: AblationVariant,
    scenario: &Scenario,
    base: &UnrollConfig,
    seeds: &[u64],
) -> Result<SweepResult> {
    check_seeds(seeds)?;
    base.validate()?;
    let cfg = variant.train_config(base);
    let runs = seeds
        .iter()
        .map(|&s| run_once(scenario, cfg.as_ref(), base, s))
        .collect();
    Ok(SweepResult {
        axis: "variant".into(),
        rows: vec![SweepRow::new(variant.name(), Vec::new(), runs)],
    })
}

/// Runs several variants into one result, rows in the given order.
pub fn run_ablations(
    variants: &[AblationVariant],
    scenario: &Scenario,
    base: &UnrollConfig,
    seeds: &[u64],
) -> Result<SweepResult> {
    let mut rows = Vec::with_capacity(variants.len());
    for &v in variants {
        rows.extend(run_ablation(v, scenario, base, seeds)?.rows);
    }
    Ok(SweepResult {
        axis: "variant".into(),
        rows,
    })
}

fn trim(v: f64) -> String {
    let s = format!("{v:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Grid search over initial `λ` and `λ_s`.
///
/// By default each grid is swept with the other value held at its base
/// setting; `cross` trains every pair instead.
pub fn sweep_hyperparams(
    scenario: &Scenario,
    base: &UnrollConfig,
    lambda_grid: &[f64],
    lambda_s_grid: &[f64],
    seeds: &[u64],
    cross: bool,
) -> Result<SweepResult> {
    check_seeds(seeds)?;
    base.validate()?;
    if lambda_grid.is_empty() && lambda_s_grid.is_empty() {
        return Err(Error::invalid("hyperparameter sweep needs a nonempty grid"));
    }
    let mut points: Vec<(Option<f64>, Option<f64>)> = Vec::new();
    if cross {
        if lambda_grid.is_empty() || lambda_s_grid.is_empty() {
            return Err(Error::invalid("cross-product sweep needs both grids"));
        }
        for &l in lambda_grid {
            for &s in lambda_s_grid {
                points.push((Some(l), Some(s)));
            }
        }
    } else {
        points.extend(lambda_grid.iter().map(|&l| (Some(l), None)));
        points.extend(lambda_s_grid.iter().map(|&s| (None, Some(s))));
    }

    let mut rows = Vec::with_capacity(points.len());
    for (l, s) in points {
        let mut settings = Vec::new();
        let mut label = Vec::new();
        if let Some(l) = l {
            settings.push(("lambda".to_string(), l));
            label.push(format!("lambda={}", trim(l)));
        }
        if let Some(s) = s {
            settings.push(("lambda_s".to_string(), s));
            label.push(format!("lambda_s={}", trim(s)));
        }
        let cfg = UnrollConfig {
            lambda: l.unwrap_or(base.lambda),
            lambda_s: s.unwrap_or(base.lambda_s),
            ..base.clone()
        };
        let runs = match cfg.validate() {
            Ok(()) => seeds
                .iter()
                .map(|&seed| run_once(scenario, Some(&cfg), base, seed))
                .collect(),
            Err(e) => seeds
                .iter()
                .map(|&seed| RunRecord {
                    seed,
                    psnr: None,
                    ssim: None,
                    seconds: 0.0,
                    error: Some(e.to_string()),
                })
                .collect(),
        };
        rows.push(SweepRow::new(label.join(","), settings, runs));
    }
    let axis = match (lambda_grid.is_empty(), lambda_s_grid.is_empty(), cross) {
        (_, _, true) => "lambda x lambda_s",
        (false, true, _) => "lambda",
        (true, false, _) => "lambda_s",
        _ => "lambda | lambda_s",
    };
    Ok(SweepResult {
        axis: axis.into(),
        rows,
    })
}

/// Trains once per CG iteration count.
pub fn sweep_cg_iters(
    scenario: &Scenario,
    base: &UnrollConfig,
    iters: &[usize],
    seeds: &[u64],
) -> Result<SweepResult> {
    check_seeds(seeds)?;
    if iters.is_empty() || iters.contains(&0) {
        return Err(Error::invalid(
            "CG iteration counts must be a nonempty list of positive values",
        ));
    }
    let mut rows = Vec::with_capacity(iters.len());
    for &n in iters {
        let cfg = UnrollConfig {
            cg_iters: n,
            ..base.clone()
        };
        cfg.validate()?;
        let runs = seeds
            .iter()
            .map(|&seed| run_once(scenario, Some(&cfg), base, seed))
            .collect();
        rows.push(SweepRow::new(
            format!("cg_iters={n}"),
            vec![("cg_iters".to_string(), n as f64)],
            runs,
        ));
    }
    Ok(SweepResult {
        axis: "cg_iters".into(),
        rows,
    })
}
