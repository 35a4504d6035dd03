//! Run manifest written next to every output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub command_line: Vec<String>,
    /// Every parameter after merging flags, config file and defaults.
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

/// Collects what a run read and wrote.
#[derive(Debug)]
pub struct Recorder {
    subcommand: String,
    started: Instant,
    pub parameters: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl Recorder {
    pub fn new(subcommand: &str) -> Self {
        Self {
            subcommand: subcommand.to_owned(),
            started: Instant::now(),
            parameters: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed: None,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn params(&mut self, v: &impl Serialize) {
        self.parameters = serde_json::to_value(v).expect("parameters serialize");
    }

    pub fn finish(self) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand,
            command_line: std::env::args().collect(),
            parameters: self.parameters,
            inputs: self.inputs,
            outputs: self.outputs,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        }
    }
}

pub fn write(path: &Path, m: &RunManifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Usage(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn path_for(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
