//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inrecon_core::acquisition::{PhantomPhase, SamplingPattern};
use inrecon_core::eval::{AblationVariant, ScenarioConfig};

#[derive(Debug, Parser)]
#[command(
    name = "inrecon",
    version,
    about = "Scan-specific MRI reconstruction with an unrolled hash-grid INR prior",
    after_help = "Runs without --out go to $INRECON_OUT/<command>-<fingerprint> (default root ./runs)."
)]
pub struct Cli {
    /// Print the reference configuration with every default and exit.
    #[arg(long)]
    pub print_default_config: bool,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a phantom scan: maps, mask and noisy k-space.
    Simulate(SimulateArgs),
    /// Generate and save a sampling mask.
    Mask(MaskArgs),
    /// Train on one scan and write the reconstruction.
    Recon(ReconArgs),
    /// PSNR and SSIM between two arrays.
    Eval(EvalArgs),
    /// Run the ablation variants on the configured scenario.
    Ablate(AblateArgs),
    /// Sweep initial hyperparameters or CG iteration counts.
    Sweep(SweepArgs),
    /// Write an array's magnitude as an 8-bit PNG.
    Export(ExportArgs),
}

fn parse_phase(s: &str) -> Result<PhantomPhase, String> {
    match s {
        "zero" => Ok(PhantomPhase::Zero),
        "quadratic" => Ok(PhantomPhase::Quadratic),
        other => Err(format!("unknown phase '{other}' (zero, quadratic)")),
    }
}

/// Scenario settings that override the config file.
#[derive(Debug, Default, Args)]
pub struct ScenarioOverrides {
    /// Square image size (sets height and width).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub coils: Option<usize>,
    /// Mask and noise seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Complex noise standard deviation per real component.
    #[arg(long)]
    pub noise: Option<f64>,
    /// random-lines, uniform-lines, radial or spiral.
    #[arg(long)]
    pub pattern: Option<SamplingPattern>,
    #[arg(long)]
    pub acceleration: Option<f64>,
    #[arg(long)]
    pub acs: Option<usize>,
    /// zero or quadratic.
    #[arg(long, value_parser = parse_phase)]
    pub phase: Option<PhantomPhase>,
    /// Reconstruct with maps estimated from the calibration region.
    #[arg(long)]
    pub estimate_maps: bool,
}

impl ScenarioOverrides {
    pub fn apply(&self, s: &mut ScenarioConfig) {
        if let Some(n) = self.size {
            s.height = n;
            s.width = n;
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { s.$f = v; } )* };
        }
        set!(coils, seed, noise, pattern, acceleration, acs, phase);
        if self.estimate_maps {
            s.estimate_maps = true;
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run configuration (TOML); only the [scenario] section is used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioOverrides,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MaskArgs {
    #[arg(long, default_value = "random-lines")]
    pub pattern: SamplingPattern,
    /// Square size, overridden per axis by --height/--width.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long, default_value_t = 4.0)]
    pub acceleration: f64,
    #[arg(long, default_value_t = 16)]
    pub acs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReconArgs {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Measured k-space (coils×H×W); requires --maps and --mask. Without
    /// these the configured scenario is simulated.
    #[arg(long)]
    pub kspace: Option<PathBuf>,
    #[arg(long)]
    pub maps: Option<PathBuf>,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Ground truth for metrics when reconstructing from files.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Overrides unroll.epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Overrides unroll.seed (network initialization).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print a progress line every N epochs (0: quiet).
    #[arg(long, default_value_t = 100)]
    pub progress: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Variants to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub variants: Vec<AblationVariant>,
    /// Training seeds.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    /// Initial λ over 0.01..0.10.
    Lambda,
    /// Initial λ_s over 0.1..1.0.
    LambdaS,
    /// Both grids, one at a time (or crossed with --cross).
    Both,
    /// CG iterations over 10..30 step 5.
    CgIters,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "both")]
    pub axis: SweepAxis,
    /// Grid values replacing the axis default.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    /// Train every (λ, λ_s) pair.
    #[arg(long)]
    pub cross: bool,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub seeds: Vec<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to the input path with a .png extension.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Display window LO,HI (default 0 to the maximum magnitude).
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub window: Option<Vec<String>>,
    /// Slice of a 3D stack to export.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
}
