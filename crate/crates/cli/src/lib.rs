//! The `endfire` pipeline: simulate runs from presets or config files,
//! analyse their event files, fit the resulting histograms and gather
//! several runs into one report.
//!
//! A run directory holds
//!
//! ```text
//! config.toml            resolved configuration, reproduces the run
//! events.csv | .bin      detected events
//! counts.csv             per-shot counts
//! simulation.json        count totals and angular summary
//! analysis/analysis.json histograms and estimator metadata
//! analysis/*.csv         plot-ready histograms
//! fits.json              fit summary
//! ```

pub mod commands;
pub mod config;
pub mod error;
pub mod events;
pub mod tables;

use std::path::{Path, PathBuf};

pub use error::{CliError, Result};

pub const CONFIG_FILE: &str = "config.toml";
pub const COUNTS_FILE: &str = "counts.csv";
pub const SIMULATION_FILE: &str = "simulation.json";
pub const ANALYSIS_DIR: &str = "analysis";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const FITS_FILE: &str = "fits.json";
pub const REPORT_DIR: &str = "report";

pub fn analysis_file(run: &Path) -> PathBuf {
    run.join(ANALYSIS_DIR).join(ANALYSIS_FILE)
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
