//! Per-run manifest and output-directory helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use inrecon_core::io::{atomic_write, sha256_hex};
use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::error::{CliError, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    /// Absent for files that embed wall-clock timings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sha256: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub fingerprint: String,
    pub started_at: String,
    pub finished_at: String,
    pub elapsed_seconds: f64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub metrics: BTreeMap<String, f64>,
}

impl RunManifest {
    /// Copy with the timing fields blanked, for comparing runs.
    pub fn without_timestamps(&self) -> Self {
        Self {
            started_at: String::new(),
            finished_at: String::new(),
            elapsed_seconds: 0.0,
            ..self.clone()
        }
    }
}

fn now() -> (OffsetDateTime, Instant) {
    (OffsetDateTime::now_utc(), Instant::now())
}

fn stamp(t: OffsetDateTime) -> String {
    t.format(&Rfc3339)
        .expect("RFC 3339 formatting of a UTC time")
}

/// Accumulates manifest fields while a command runs.
pub struct Recorder {
    command: String,
    started: (OffsetDateTime, Instant),
    inputs: Vec<FileEntry>,
    volatile: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

impl Recorder {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: now(),
            inputs: Vec::new(),
            volatile: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    /// Registers an input file with its digest.
    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileEntry {
            path: path.display().to_string(),
            bytes: Some(bytes.len() as u64),
            sha256: Some(sha256_hex(bytes)),
        });
    }

    pub fn inputs(&self) -> &[FileEntry] {
        &self.inputs
    }

    /// Marks an output (relative name) as containing timings.
    pub fn volatile(&mut self, name: &str) {
        self.volatile.push(name.to_string());
    }

    /// Writes `manifest.json` into `dir`, listing every other file below it.
    pub fn finish_dir(
        self,
        dir: &Path,
        fingerprint: &str,
        config: serde_json::Value,
    ) -> CliResult<RunManifest> {
        let mut files = Vec::new();
        collect_files(dir, dir, &mut files)?;
        files.retain(|p| p != MANIFEST_NAME);
        let outputs = self.entries(dir, &files)?;
        self.write(dir.join(MANIFEST_NAME), fingerprint, config, outputs)
    }

    /// Writes a manifest at `manifest_path` for explicitly listed outputs.
    pub fn finish_files(
        self,
        manifest_path: &Path,
        outputs: &[PathBuf],
        fingerprint: &str,
        config: serde_json::Value,
    ) -> CliResult<RunManifest> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let names: Vec<String> = outputs
            .iter()
            .map(|p| p.strip_prefix(base).unwrap_or(p).display().to_string())
            .collect();
        let entries = self.entries(base, &names)?;
        self.write(manifest_path.to_path_buf(), fingerprint, config, entries)
    }

    fn entries(&self, base: &Path, names: &[String]) -> CliResult<Vec<FileEntry>> {
        names
            .iter()
            .map(|name| {
                if self.volatile.iter().any(|v| v == name) {
                    return Ok(FileEntry {
                        path: name.clone(),
                        bytes: None,
                        sha256: None,
                    });
                }
                let path = base.join(name);
                let bytes = std::fs::read(&path).map_err(|e| {
                    CliError::Runtime(format!("cannot read {}: {e}", path.display()))
                })?;
                Ok(FileEntry {
                    path: name.clone(),
                    bytes: Some(bytes.len() as u64),
                    sha256: Some(sha256_hex(&bytes)),
                })
            })
            .collect()
    }

    fn write(
        self,
        path: PathBuf,
        fingerprint: &str,
        config: serde_json::Value,
        outputs: Vec<FileEntry>,
    ) -> CliResult<RunManifest> {
        let (end, _) = now();
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            fingerprint: fingerprint.to_string(),
            started_at: stamp(self.started.0),
            finished_at: stamp(end),
            elapsed_seconds: self.started.1.elapsed().as_secs_f64(),
            config,
            inputs: self.inputs,
            outputs,
            metrics: self.metrics,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        atomic_write(&path, text.as_bytes())?;
        Ok(manifest)
    }
}

/// Relative paths of all regular files under `dir`, sorted.
fn collect_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> CliResult<()> {
    let rd = std::fs::read_dir(dir)
        .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", dir.display())))?;
    let mut entries: Vec<_> = rd.filter_map(|e| e.ok()).map(|e| e.path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if p.is_file() {
            let rel = p.strip_prefix(root).expect("walked below root");
            out.push(rel.display().to_string());
        }
    }
    out.sort();
    Ok(())
}

/// Picks and creates the run directory: explicit flag, then the config's
/// `output_dir`, then `$INRECON_OUT/<command>-<fingerprint prefix>`.
pub fn run_dir(
    flag: Option<&Path>,
    from_config: Option<&Path>,
    command: &str,
    fingerprint: &str,
) -> CliResult<PathBuf> {
    let dir = match flag.or(from_config) {
        Some(p) => p.to_path_buf(),
        None => {
            let root = std::env::var_os(crate::config::OUTPUT_ROOT_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUTPUT_ROOT));
            root.join(format!("{command}-{}", &fingerprint[..12]))
        }
    };
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::Runtime(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })?;
    Ok(dir)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    atomic_write(path, text.as_bytes())?;
    Ok(())
}
