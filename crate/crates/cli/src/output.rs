//! Result files: CSVs plus a sibling manifest recording the resolved
//! configuration, so every output is self-describing and replayable (a
//! manifest loads as a config).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::config::{
    CliError, CliResult, FileConfig, ModelSection, PolicySection, ScenarioSection, SweepSection,
};

#[derive(Debug, Serialize)]
pub struct RunInfo {
    pub version: String,
    pub command: String,
    pub config_path: String,
    pub outputs: Vec<String>,
    pub started_unix: u64,
}

/// Manifest = run metadata + the full resolved config sections.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub run: RunInfo,
    pub model: ModelSection,
    pub scenario: ScenarioSection,
    pub policy: PolicySection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

impl Manifest {
    pub fn new(
        command: &str,
        config_path: &Path,
        outputs: Vec<String>,
        config: &FileConfig,
    ) -> Self {
        Manifest {
            run: RunInfo {
                version: format!("v{}", env!("CARGO_PKG_VERSION")),
                command: command.to_string(),
                config_path: config_path.display().to_string(),
                outputs,
                started_unix: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            },
            model: config.model.clone(),
            scenario: config.scenario.clone(),
            policy: config.policy.clone(),
            sweep: config.sweep.clone(),
        }
    }
}

/// Output directory: `--out` flag, else $GREENLINK_OUT, else ./runs.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("GREENLINK_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_manifest(dir: &Path, name: &str, manifest: &Manifest) -> CliResult<PathBuf> {
    let text = toml::to_string_pretty(manifest)
        .map_err(|e| CliError::Runtime(format!("cannot serialize manifest: {e}")))?;
    write_file(dir, name, &text)
}
