//! Run manifest: a JSON sidecar written next to every command's outputs,
//! recording the resolved configuration, seeds, inputs, and outputs so any
//! run can be reproduced exactly from its artifacts.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::errors::CliError;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Which subcommand produced this run.
    pub command: String,
    /// Binary version, for provenance.
    pub version: String,
    /// Fully resolved `section.key` → value map after precedence
    /// (defaults < config file < flags).
    pub config: BTreeMap<String, String>,
    /// Every seed that fed a random-number generator in this run.
    pub seeds: Vec<u64>,
    /// Files read.
    pub inputs: Vec<String>,
    /// Files written (excluding the manifest itself).
    pub outputs: Vec<String>,
    /// Wall-clock duration of the run.
    pub wall_clock_seconds: f64,
    /// Free-form notes on conventions (index base, split rule, precedence).
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> (Self, Instant) {
        let manifest = Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: BTreeMap::new(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
            notes: vec![
                "sensor and mode indices are 0-based".to_string(),
                "config precedence: defaults < config file < flags".to_string(),
            ],
        };
        (manifest, Instant::now())
    }

    pub fn record_config(&mut self, entries: &BTreeMap<String, String>) {
        self.config.extend(entries.clone());
    }

    pub fn record_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn finish(mut self, started: Instant, path: &Path) -> Result<(), CliError> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        let body = serde_json::to_string_pretty(&self).map_err(|e| {
            CliError::io(format!("cannot serialize manifest: {e}"))
        })?;
        std::fs::write(path, body + "\n").map_err(|e| {
            CliError::io(format!("cannot write manifest '{}': {e}", path.display()))
        })?;
        Ok(())
    }
}
