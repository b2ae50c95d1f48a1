//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use inrecon_core::acquisition::{AcquisitionModel, MultiCoilKspace, SamplingMask, SensitivityMaps};
use inrecon_core::eval::{
    cg_sense, metrics, run_ablations, sweep_cg_iters, sweep_hyperparams, zero_filled,
    AblationVariant, MetricPair, Scenario, SweepResult, METRICS_CSV_HEADER, PSNR_CAP,
};
use inrecon_core::io::{
    export_png, write_array, write_checkpoint, write_grid, write_kspace, Array, ArrayData,
    Checkpoint,
};
use inrecon_core::numeric::{ComplexGrid, Rng};
use inrecon_core::unroll::{loss_log_csv, train_with};
use serde::Serialize;

use crate::args::{
    AblateArgs, EvalArgs, ExportArgs, MaskArgs, ReconArgs, ScenarioOverrides, SimulateArgs,
    SweepArgs, SweepAxis,
};
use crate::config::{validate_scenario, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{run_dir, write_text, Recorder};

const LAMBDA_GRID: [f64; 10] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09, 0.10];
const LAMBDA_S_GRID: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
const CG_GRID: [usize; 5] = [10, 15, 20, 25, 30];

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("value serializes to JSON")
}

/// Reads an input array, treating a missing file as a usage error.
fn read_input(rec: &mut Recorder, kind: &str, path: &Path) -> CliResult<Array> {
    if !path.is_file() {
        return Err(CliError::missing(kind, path));
    }
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    rec.input(path, &bytes);
    Ok(Array::decode(&bytes, &path.display().to_string())?)
}

fn mask_from_array(a: &Array) -> CliResult<SamplingMask> {
    let g = a.to_grid()?;
    let weights: Vec<f64> = g.data().iter().map(|z| z.norm()).collect();
    Ok(SamplingMask::from_weights(g.height(), g.width(), &weights)?)
}

fn mask_array(mask: &SamplingMask) -> Array {
    Array::new(
        vec![mask.height(), mask.width()],
        ArrayData::Float64(mask.to_weights()),
    )
    .expect("mask dims are valid")
}

fn load_config(path: Option<&Path>, overrides: &ScenarioOverrides) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load_or_default(path)?;
    overrides.apply(&mut cfg.scenario);
    cfg.resolve()
}

fn metric_row(label: &str, seed: u64, m: &MetricPair, seconds: f64) -> String {
    format!("{label},{seed},{:.6},{:.6},{seconds:.3}\n", m.psnr, m.ssim)
}

fn print_metrics(label: &str, m: &MetricPair) {
    println!("{label:<12} PSNR {:>8.3} dB  SSIM {:.6}", m.psnr, m.ssim);
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let cfg = load_config(args.config.as_deref(), &args.scenario)?;
    let scenario = Scenario::build(&cfg.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let fp = inrecon_core::io::fingerprint(&cfg.scenario);
    let dir = run_dir(
        args.out.as_deref(),
        cfg.output_dir.as_deref(),
        "simulate",
        &fp,
    )?;
    let mut rec = Recorder::start("simulate");

    write_grid(dir.join("phantom.cxg"), &scenario.image)?;
    write_array(
        dir.join("maps.cxg"),
        &Array::from_stack(scenario.model.maps().coils())?,
    )?;
    write_array(dir.join("mask.cxg"), &mask_array(&scenario.mask))?;
    write_kspace(dir.join("kspace.cxg"), &scenario.kspace)?;
    let zf = zero_filled(&scenario.kspace, &scenario.model)?;
    write_grid(dir.join("zero_filled.cxg"), &zf)?;
    export_png(&scenario.image, dir.join("phantom.png"), None)?;
    export_png(&zf, dir.join("zero_filled.png"), None)?;
    export_png(
        &scenario.mask.to_grid(),
        dir.join("mask.png"),
        Some((0.0, 1.0)),
    )?;
    write_text(&dir.join("config.toml"), &toml_scenario(&cfg))?;

    let m = metrics(&scenario.image, &zf)?;
    rec.metrics.insert(
        "sampled_fraction".into(),
        scenario.mask.undersampling_rate(),
    );
    rec.metrics.insert("zero_filled_psnr".into(), m.psnr);
    rec.metrics.insert("zero_filled_ssim".into(), m.ssim);
    rec.finish_dir(&dir, &fp, json(&cfg.scenario))?;
    println!(
        "simulated {}x{} phantom, {} coils, {} k-space samples",
        cfg.scenario.height,
        cfg.scenario.width,
        cfg.scenario.coils,
        scenario.mask.count()
    );
    print_metrics("zero_filled", &m);
    println!("wrote {}", dir.display());
    Ok(())
}

fn toml_scenario(cfg: &RunConfig) -> String {
    let doc = RunConfig {
        output_dir: None,
        preset: None,
        scenario: cfg.scenario.clone(),
        encoding: None,
        unroll: cfg.unroll.clone(),
    };
    doc.to_toml()
}

pub fn mask(args: &MaskArgs) -> CliResult<()> {
    let pattern = args.pattern;
    let (h, w) = (
        args.height.unwrap_or(args.size),
        args.width.unwrap_or(args.size),
    );
    let mut rng = Rng::new(args.seed).derive(1);
    let mask = SamplingMask::generate(pattern, h, w, args.acceleration, args.acs, &mut rng)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let settings = serde_json::json!({
        "pattern": pattern.name(), "height": h, "width": w,
        "acceleration": args.acceleration, "acs": args.acs, "seed": args.seed,
    });
    let fp = inrecon_core::io::fingerprint(&settings);
    let dir = run_dir(args.out.as_deref(), None, "mask", &fp)?;
    let mut rec = Recorder::start("mask");
    write_array(dir.join("mask.cxg"), &mask_array(&mask))?;
    export_png(&mask.to_grid(), dir.join("mask.png"), Some((0.0, 1.0)))?;
    let rate = mask.undersampling_rate();
    rec.metrics.insert("sampled".into(), mask.count() as f64);
    rec.metrics.insert("sampled_fraction".into(), rate);
    rec.metrics
        .insert("realized_acceleration".into(), mask.acceleration());
    if mask.is_column_separable() {
        rec.metrics
            .insert("lines".into(), mask.sampled_columns().len() as f64);
        println!("lines {}", mask.sampled_columns().len());
    }
    rec.finish_dir(&dir, &fp, settings)?;
    println!(
        "sampled {:.2}% (R = {:.3})\nwrote {}",
        100.0 * rate,
        mask.acceleration(),
        dir.display()
    );
    Ok(())
}

/// Measured data, model and optional reference for a reconstruction.
struct Problem {
    kspace: MultiCoilKspace,
    model: AcquisitionModel,
    reference: Option<ComplexGrid>,
}

fn load_problem(args: &ReconArgs, cfg: &RunConfig, rec: &mut Recorder) -> CliResult<Problem> {
    match (&args.kspace, &args.maps, &args.mask) {
        (None, None, None) => {
            if args.reference.is_some() {
                return Err(CliError::Usage(
                    "--reference needs --kspace, --maps and --mask".into(),
                ));
            }
            let s = Scenario::build(&cfg.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
            Ok(Problem {
                kspace: s.kspace,
                model: s.model,
                reference: Some(s.image),
            })
        }
        (Some(k), Some(m), Some(mk)) => {
            let kspace = read_input(rec, "k-space file", k)?.to_kspace()?;
            let maps = SensitivityMaps::new(read_input(rec, "maps file", m)?.to_stack()?)?;
            let mask = mask_from_array(&read_input(rec, "mask file", mk)?)?;
            let model = AcquisitionModel::new(maps, mask)?;
            let reference = match &args.reference {
                Some(r) => Some(read_input(rec, "reference file", r)?.to_grid()?),
                None => None,
            };
            Ok(Problem {
                kspace,
                model,
                reference,
            })
        }
        _ => Err(CliError::Usage(
            "--kspace, --maps and --mask must be given together".into(),
        )),
    }
}

pub fn recon(args: &ReconArgs) -> CliResult<()> {
    let mut cfg = load_config(args.config.as_deref(), &ScenarioOverrides::default())?;
    if let Some(e) = args.epochs {
        cfg.unroll.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.unroll.seed = s;
    }
    let mut rec = Recorder::start("recon");
    let problem = load_problem(args, &cfg, &mut rec)?;
    let (h, w) = problem.model.shape();
    cfg.unroll.encoding = Some(cfg.unroll.encoding_for(h, w));
    cfg.unroll
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid [unroll] settings: {e}")))?;

    let inputs: Vec<_> = rec.inputs().iter().map(|e| e.sha256.clone()).collect();
    let fp = inrecon_core::io::fingerprint(&(cfg.fingerprint(), inputs));
    let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), "recon", &fp)?;

    let progress = args.progress;
    let start = Instant::now();
    let (report, state) = train_with(
        &problem.kspace,
        &problem.model,
        &cfg.unroll,
        problem.reference.as_ref(),
        |r| {
            if progress > 0 && r.epoch % progress == 0 {
                eprintln!(
                "epoch {:>5}  loss {:.6}  dc {:.6}  tv {:.3}  lambda {:.5}  lambda_s {:.4}  [{:.1}s]",
                r.epoch,
                r.total,
                r.dc,
                r.tv,
                r.lambda,
                r.lambda_s,
                start.elapsed().as_secs_f64()
            );
            }
        },
    )?;

    write_grid(dir.join("recon.cxg"), &report.x_hat)?;
    export_png(&report.x_hat, dir.join("recon.png"), None)?;
    write_text(&dir.join("loss_log.csv"), &loss_log_csv(&report.losses))?;
    write_checkpoint(
        dir.join("checkpoint.inr"),
        &Checkpoint {
            params: state.params,
            lambda: report.lambda,
            lambda_s: report.lambda_s,
        },
    )?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;

    rec.metrics
        .insert("epochs_run".into(), report.epochs_run as f64);
    rec.metrics.insert("lambda".into(), report.lambda);
    rec.metrics.insert("lambda_s".into(), report.lambda_s);
    if let Some(last) = report.losses.last() {
        rec.metrics.insert("final_loss".into(), last.total);
    }
    if let (Some(reference), Some(m)) = (&problem.reference, report.metrics) {
        let mut csv = String::from(METRICS_CSV_HEADER);
        csv.push('\n');
        csv.push_str(&metric_row("unrolled", cfg.unroll.seed, &m, report.seconds));
        print_metrics("unrolled", &m);
        rec.metrics.insert("psnr".into(), m.psnr);
        rec.metrics.insert("ssim".into(), m.ssim);

        let t = Instant::now();
        let zf = zero_filled(&problem.kspace, &problem.model)?;
        let mz = metrics(reference, &zf)?;
        csv.push_str(&metric_row(
            "zero_filled",
            cfg.unroll.seed,
            &mz,
            t.elapsed().as_secs_f64(),
        ));
        let t = Instant::now();
        let cs = cg_sense(
            &problem.kspace,
            &problem.model,
            cfg.unroll.lambda,
            cfg.unroll.cg_iters,
        )?;
        let mc = metrics(reference, &cs)?;
        csv.push_str(&metric_row(
            "cg_sense",
            cfg.unroll.seed,
            &mc,
            t.elapsed().as_secs_f64(),
        ));
        print_metrics("zero_filled", &mz);
        print_metrics("cg_sense", &mc);
        for (k, v) in [("zero_filled", mz), ("cg_sense", mc)] {
            rec.metrics.insert(format!("{k}_psnr"), v.psnr);
            rec.metrics.insert(format!("{k}_ssim"), v.ssim);
        }
        write_grid(dir.join("zero_filled.cxg"), &zf)?;
        export_png(&zf, dir.join("zero_filled.png"), None)?;
        export_png(reference, dir.join("reference.png"), None)?;
        write_text(&dir.join("metrics.csv"), &csv)?;
        rec.volatile("metrics.csv");
    }
    rec.finish_dir(&dir, &fp, json(&cfg))?;
    println!(
        "{} epochs in {:.1}s{}\nwrote {}",
        report.epochs_run,
        report.seconds,
        if report.stopped_early {
            " (early stop)"
        } else {
            ""
        },
        dir.display()
    );
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CliResult<()> {
    let mut rec = Recorder::start("eval");
    let reference = read_input(&mut rec, "reference file", &args.reference)?.to_grid()?;
    let test = read_input(&mut rec, "test file", &args.test)?.to_grid()?;
    let m = metrics(&reference, &test)?;
    if m.psnr >= PSNR_CAP {
        println!("PSNR {PSNR_CAP} dB (identical)");
    } else {
        println!("PSNR {:.4} dB", m.psnr);
    }
    println!("SSIM {:.6}", m.ssim);
    let digests: Vec<_> = rec.inputs().iter().map(|e| e.sha256.clone()).collect();
    let fp = inrecon_core::io::fingerprint(&digests);
    let dir = run_dir(args.out.as_deref(), None, "eval", &fp)?;
    let mut text = serde_json::to_string_pretty(&m).expect("metrics serialize");
    text.push('\n');
    write_text(&dir.join("metrics.json"), &text)?;
    rec.metrics.insert("psnr".into(), m.psnr);
    rec.metrics.insert("ssim".into(), m.ssim);
    rec.finish_dir(&dir, &fp, serde_json::Value::Null)?;
    Ok(())
}

fn write_sweep(dir: &Path, stem: &str, result: &SweepResult, rec: &mut Recorder) -> CliResult<()> {
    let csv = format!("{stem}.csv");
    let js = format!("{stem}.json");
    write_text(&dir.join(&csv), &result.to_csv())?;
    write_text(&dir.join(&js), &(result.to_json() + "\n"))?;
    rec.volatile(&csv);
    rec.volatile(&js);
    for row in &result.rows {
        if let Some(p) = row.psnr {
            rec.metrics.insert(format!("{}:psnr", row.label), p.mean);
        }
        if let Some(s) = row.ssim {
            rec.metrics.insert(format!("{}:ssim", row.label), s.mean);
        }
        let psnr = row
            .psnr
            .map_or("-".into(), |s| format!("{:.3} ± {:.3}", s.mean, s.std));
        let ssim = row
            .ssim
            .map_or("-".into(), |s| format!("{:.4} ± {:.4}", s.mean, s.std));
        let missing = if row.missing > 0 {
            format!("  ({} failed)", row.missing)
        } else {
            String::new()
        };
        println!("{:<24} PSNR {psnr:<18} SSIM {ssim}{missing}", row.label);
    }
    Ok(())
}

fn harness_setup(
    config: Option<&Path>,
    epochs: Option<usize>,
    command: &str,
    extra: &impl Serialize,
) -> CliResult<(RunConfig, Scenario, String)> {
    let mut cfg = load_config(config, &ScenarioOverrides::default())?;
    if let Some(e) = epochs {
        cfg.unroll.epochs = e;
    }
    cfg.unroll
        .validate()
        .map_err(|e| CliError::Usage(format!("invalid [unroll] settings: {e}")))?;
    validate_scenario(&cfg.scenario)?;
    let scenario = Scenario::build(&cfg.scenario).map_err(|e| CliError::Usage(e.to_string()))?;
    let fp = inrecon_core::io::fingerprint(&(command, cfg.fingerprint(), extra));
    Ok((cfg, scenario, fp))
}

pub fn ablate(args: &AblateArgs) -> CliResult<()> {
    let variants: Vec<AblationVariant> = if args.variants.is_empty() {
        AblationVariant::ALL.to_vec()
    } else {
        args.variants.clone()
    };
    let names: Vec<_> = variants.iter().map(|v| v.name()).collect();
    let (cfg, scenario, fp) = harness_setup(
        args.config.as_deref(),
        args.epochs,
        "ablate",
        &(&names, &args.seeds),
    )?;
    let dir = run_dir(
        args.out.as_deref(),
        cfg.output_dir.as_deref(),
        "ablate",
        &fp,
    )?;
    let mut rec = Recorder::start("ablate");
    let result = run_ablations(&variants, &scenario, &cfg.unroll, &args.seeds)?;
    write_sweep(&dir, "ablation", &result, &mut rec)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    rec.finish_dir(&dir, &fp, json(&cfg))?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn parse_list<T: std::str::FromStr>(values: &[String], what: &str) -> CliResult<Vec<T>> {
    values
        .iter()
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("invalid {what} value `{v}`")))
        })
        .collect()
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let extra = (
        format!("{:?}", args.axis),
        &args.values,
        args.cross,
        &args.seeds,
    );
    let (cfg, scenario, fp) = harness_setup(args.config.as_deref(), args.epochs, "sweep", &extra)?;
    let mut rec = Recorder::start("sweep");
    let given = !args.values.is_empty();
    let result = match args.axis {
        SweepAxis::CgIters => {
            let iters = if given {
                parse_list(&args.values, "CG iteration")?
            } else {
                CG_GRID.to_vec()
            };
            if iters.contains(&0) {
                return Err(CliError::Usage(
                    "CG iteration counts must be positive".into(),
                ));
            }
            let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), "sweep", &fp)?;
            let r = sweep_cg_iters(&scenario, &cfg.unroll, &iters, &args.seeds)?;
            (dir, r)
        }
        axis => {
            let (lg, sg): (Vec<f64>, Vec<f64>) = match axis {
                SweepAxis::Lambda if given => (parse_list(&args.values, "lambda")?, vec![]),
                SweepAxis::Lambda => (LAMBDA_GRID.to_vec(), vec![]),
                SweepAxis::LambdaS if given => (vec![], parse_list(&args.values, "lambda_s")?),
                SweepAxis::LambdaS => (vec![], LAMBDA_S_GRID.to_vec()),
                _ => (LAMBDA_GRID.to_vec(), LAMBDA_S_GRID.to_vec()),
            };
            if args.cross && (lg.is_empty() || sg.is_empty()) {
                return Err(CliError::Usage("--cross needs --axis both".into()));
            }
            let dir = run_dir(args.out.as_deref(), cfg.output_dir.as_deref(), "sweep", &fp)?;
            let r = sweep_hyperparams(&scenario, &cfg.unroll, &lg, &sg, &args.seeds, args.cross)?;
            (dir, r)
        }
    };
    let (dir, result) = result;
    write_sweep(&dir, "sweep", &result, &mut rec)?;
    if let Some(best) = result.best() {
        println!("best: {}", best.label);
    }
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    rec.finish_dir(&dir, &fp, json(&cfg))?;
    println!("wrote {}", dir.display());
    Ok(())
}

pub fn export(args: &ExportArgs) -> CliResult<()> {
    let mut rec = Recorder::start("export");
    let array = read_input(&mut rec, "input file", &args.input)?;
    let stack = array.to_stack()?;
    let grid = stack.get(args.index).ok_or_else(|| {
        CliError::Usage(format!(
            "index {} out of range for a stack of {}",
            args.index,
            stack.len()
        ))
    })?;
    let window = match &args.window {
        None => None,
        Some(w) => {
            let v: Vec<f64> = parse_list(w, "window")?;
            match v.as_slice() {
                [lo, hi] if lo.is_finite() && hi.is_finite() && hi > lo => Some((*lo, *hi)),
                _ => {
                    return Err(CliError::Usage(
                        "--window expects LO,HI with LO < HI".into(),
                    ))
                }
            }
        }
    };
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.input.with_extension("png"));
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    export_png(grid, &output, window)?;
    let manifest_path = PathBuf::from(format!("{}.manifest.json", output.display()));
    let settings = serde_json::json!({ "index": args.index, "window": window });
    let digests: Vec<_> = rec.inputs().iter().map(|e| e.sha256.clone()).collect();
    let fp = inrecon_core::io::fingerprint(&(digests, &settings));
    rec.finish_files(&manifest_path, std::slice::from_ref(&output), &fp, settings)?;
    println!("wrote {}", output.display());
    Ok(())
}

pub fn print_default_config() {
    print!("{}", RunConfig::reference_toml());
}
