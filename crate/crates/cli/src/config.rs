//! TOML run configuration.

use std::path::{Path, PathBuf};

use inrecon_core::eval::ScenarioConfig;
use inrecon_core::inr::HashEncodingConfig;
use inrecon_core::unroll::{HparamPreset, UnrollConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default root for run directories.
pub const OUTPUT_ROOT_ENV: &str = "INRECON_OUT";

/// Root used when neither a flag, the config nor the environment names one.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Run directory. Falls back to `$INRECON_OUT/<command>-<fingerprint>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Overwrites `unroll.lambda` and `unroll.lambda_s` when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<HparamPreset>,
    pub scenario: ScenarioConfig,
    /// Hash-encoding layout; derived from the image size when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoding: Option<HashEncodingConfig>,
    pub unroll: UnrollConfig,
}

const REFERENCE_HEADER: &str = "\
# inrecon run configuration. Every key is optional; the values below are the
# defaults. Unknown keys are rejected.
#
# preset = \"retrospective\" | \"prospective\" overwrites unroll.lambda and
# unroll.lambda_s with (0.01, 0.5) or (0.05, 2.0).
# output_dir = \"path\" fixes the run directory; otherwise runs go to
# $INRECON_OUT/<command>-<fingerprint> (default root: ./runs).
# scenario.pattern: random-lines | uniform-lines | radial | spiral
# scenario.phase: zero | quadratic
# unroll.mode: unrolled | inr-only
# Omitting [encoding] derives it from the image size as shown.

";

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| CliError::Usage(format!("{origin}: {e}")))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim_end().to_string();
            if path == "." || path.is_empty() {
                CliError::Usage(format!("{origin}: {msg}"))
            } else {
                CliError::Usage(format!("{origin}: at `{path}`: {msg}"))
            }
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(CliError::missing("config file", path))
            }
            Err(e) => {
                return Err(CliError::Usage(format!(
                    "cannot read config {}: {e}",
                    path.display()
                )))
            }
        };
        Self::parse(&text, &path.display().to_string())
    }

    /// Loads `path` or falls back to the defaults.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Applies the preset and the `[encoding]` section, then validates.
    pub fn resolve(mut self) -> CliResult<Self> {
        if let Some(p) = self.preset.take() {
            let (l, s) = p.values();
            self.unroll.lambda = l;
            self.unroll.lambda_s = s;
        }
        if let Some(enc) = self.encoding.take() {
            if self.unroll.encoding.is_some() {
                return Err(CliError::Usage(
                    "encoding given both in [encoding] and [unroll.encoding]".into(),
                ));
            }
            self.unroll.encoding = Some(enc);
        }
        self.unroll
            .validate()
            .map_err(|e| CliError::Usage(format!("invalid [unroll] settings: {e}")))?;
        validate_scenario(&self.scenario)?;
        Ok(self)
    }

    /// Reference document with every default spelled out.
    pub fn reference_toml() -> String {
        let mut cfg = Self::default();
        let s = &cfg.scenario;
        cfg.encoding = Some(HashEncodingConfig::for_image(s.height, s.width));
        format!("{REFERENCE_HEADER}{}", cfg.to_toml())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes to TOML")
    }

    /// Digest of the resolved settings, excluding the output location.
    pub fn fingerprint(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        inrecon_core::io::fingerprint(&c)
    }
}

pub fn validate_scenario(s: &ScenarioConfig) -> CliResult<()> {
    let bad = |m: String| Err(CliError::Usage(format!("invalid [scenario] settings: {m}")));
    if s.height == 0 || s.width == 0 {
        return bad(format!(
            "image size must be positive, got {}x{}",
            s.height, s.width
        ));
    }
    if s.coils == 0 {
        return bad("coils must be at least 1".into());
    }
    if !(s.noise >= 0.0) || !s.noise.is_finite() {
        return bad(format!(
            "noise must be a finite value >= 0, got {}",
            s.noise
        ));
    }
    if !(s.acceleration >= 1.0) || !s.acceleration.is_finite() {
        return bad(format!("acceleration must be >= 1, got {}", s.acceleration));
    }
    if s.acs > s.width {
        return bad(format!("acs {} exceeds the width {}", s.acs, s.width));
    }
    Ok(())
}
