//! Run configuration: which scenario to simulate, how to analyse it, and
//! the digest that ties event files to the configuration that made them.

use std::path::{Path, PathBuf};

use endfire_core::corr::{Binning, PairWindow, VolumeCut, SHELL_INNER, SHELL_OUTER};
use endfire_core::fitshapes::DEFAULT_POLE_WINDOW;
use endfire_core::scenario::{self, Scenario};
use endfire_core::Axis;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::events::EventFormat;

pub const DEFAULT_PRESET: &str = "tau0";
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_OUT: &str = "endfire-run";
/// Sixteen groups leave the g² precision set by shot-to-shot intensity
/// fluctuations and cut the denominator cost sixteenfold.
pub const DEFAULT_DENOMINATOR_GROUPS: usize = 16;
pub const MIN_SHOTS_PER_GROUP: u64 = 32;

/// Contents of a `--config` TOML file. Every field is optional.
///
/// ```toml
/// preset = "tau0"        # or an inline [scenario] table, not both
/// n_shots = 1000         # default: the scenario's own shot count
/// seed = 42
/// out = "runs/tau0"
/// format = "csv"         # or "binary"
///
/// [analysis]
/// denominator_groups = 16
///
/// [fit]
/// reference = "runs/tau500"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: EventFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

/// Window and bins for correlations along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationAxis {
    /// Strict bounds on the two transverse separations.
    pub transverse: [f64; 2],
    pub bin_width: f64,
    pub bin_count: usize,
}

impl CorrelationAxis {
    fn from_defaults(window: PairWindow, binning: Binning) -> Self {
        Self {
            transverse: window.transverse,
            bin_width: binning.width,
            bin_count: binning.count,
        }
    }

    pub fn window(&self, axis: Axis) -> PairWindow {
        PairWindow {
            axis,
            transverse: self.transverse,
        }
    }

    pub fn binning(&self) -> Binning {
        Binning {
            width: self.bin_width,
            count: self.bin_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Radial band for angular histograms and shell counts.
    pub shell: [f64; 2],
    pub angle_bins: usize,
    /// Half-thickness of the slab around each angular plane.
    pub angle_slab: f64,
    /// Shot groups for the cross-shot denominator: shots are paired only
    /// within their group (shot_id mod groups). 1 pairs every shot with
    /// every other shot. Capped so that each group keeps at least
    /// [`MIN_SHOTS_PER_GROUP`] shots.
    pub denominator_groups: usize,
    pub z: CorrelationAxis,
    pub y: CorrelationAxis,
    /// Integration volumes for the g² histograms.
    pub volumes: Vec<VolumeCut>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            shell: [SHELL_INNER, SHELL_OUTER],
            angle_bins: 180,
            angle_slab: 0.1,
            volumes: vec![
                VolumeCut::endfire_peaks(),
                VolumeCut::sphere_away_from_peaks(),
                VolumeCut::transferred_cloud(1.0, 0.1),
            ],
            z: CorrelationAxis::from_defaults(PairWindow::along_z(), Binning::along_z()),
            y: CorrelationAxis::from_defaults(PairWindow::along_y(), Binning::along_y()),
            denominator_groups: DEFAULT_DENOMINATOR_GROUPS,
        }
    }
}

impl AnalysisConfig {
    /// Groups actually used for a run of `n_shots`.
    pub fn effective_groups(&self, n_shots: u64) -> usize {
        let cap = (n_shots / MIN_SHOTS_PER_GROUP).max(1);
        self.denominator_groups.min(usize::try_from(cap).unwrap_or(usize::MAX))
    }

    pub fn shell_cut(&self) -> VolumeCut {
        VolumeCut::shell(self.shell[0], self.shell[1])
    }

    fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("analysis.{field}: {why}")));
        if !(self.shell[0] >= 0.0 && self.shell[0] < self.shell[1]) {
            return bad("shell", "needs 0 <= inner < outer");
        }
        if self.angle_bins < 8 {
            return bad("angle_bins", "needs at least 8 bins");
        }
        if !(self.angle_slab > 0.0) {
            return bad("angle_slab", "must be positive");
        }
        if self.denominator_groups == 0 {
            return bad("denominator_groups", "must be at least 1");
        }
        for (name, ax, axis) in [("z", &self.z, Axis::Z), ("y", &self.y, Axis::Y)] {
            ax.window(axis)
                .validate()
                .and(ax.binning().validate())
                .or_else(|e| bad(name, &e.to_string()))?;
        }
        let mut names: Vec<&str> = Vec::new();
        for (i, v) in self.volumes.iter().enumerate() {
            let field = format!("volumes[{i}]");
            if v.name.is_empty() || !v.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(&field, "name must be non-empty ASCII letters, digits, '_' or '-'");
            }
            if names.contains(&v.name.as_str()) {
                return bad(&field, &format!("duplicate volume name `{}`", v.name));
            }
            if !v.is_valid() {
                return bad(&field, "radial band needs inner < outer");
            }
            names.push(&v.name);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    /// Run directory of a peak-free run whose sin²θ fit is subtracted before
    /// the angular peak fits. Without one the run is its own reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
    /// Half-width in rad of the region fitted around each pole.
    pub pole_window: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            reference: None,
            pole_window: DEFAULT_POLE_WINDOW,
        }
    }
}

/// Flag overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub n_shots: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub scenario: Scenario,
    pub n_shots: u64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: EventFormat,
    pub analysis: AnalysisConfig,
    pub fit: FitConfig,
}

/// The part of the configuration that determines the events.
#[derive(Serialize)]
struct SimulationSection<'a> {
    scenario: &'a Scenario,
    n_shots: u64,
    seed: u64,
}

impl Resolved {
    /// Hex SHA-256 of the simulation section.
    pub fn digest(&self) -> String {
        let section = SimulationSection {
            scenario: &self.scenario,
            n_shots: self.n_shots,
            seed: self.seed,
        };
        let canonical = serde_json::to_string(&section).expect("scenario serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// Self-contained config for the run directory. It names no preset and
    /// no output path, so it reproduces the run from anywhere.
    pub fn to_toml(&self) -> String {
        let cfg = RunConfig {
            preset: None,
            n_shots: Some(self.n_shots),
            seed: Some(self.seed),
            out: None,
            format: self.format,
            scenario: Some(self.scenario.clone()),
            analysis: self.analysis.clone(),
            fit: self.fit.clone(),
        };
        toml::to_string(&cfg).expect("config serializes")
    }
}

pub fn parse(text: &str, origin: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse(&text, &path.display().to_string())
}

pub fn resolve(cfg: RunConfig, overrides: &Overrides) -> Result<Resolved> {
    let preset = overrides.preset.clone().or(cfg.preset);
    let mut scenario = match (preset, cfg.scenario) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "`preset` and `[scenario]` are mutually exclusive".into(),
            ))
        }
        (None, Some(s)) => s,
        (preset, None) => {
            let name = preset.as_deref().unwrap_or(DEFAULT_PRESET);
            scenario::preset(name).map_err(|e| CliError::Config(format!("preset: {e}")))?
        }
    };
    scenario
        .validate()
        .map_err(|e| CliError::Config(format!("scenario: {e}")))?;
    let n_shots = overrides.n_shots.or(cfg.n_shots).unwrap_or(scenario.n_shots);
    if n_shots == 0 {
        return Err(CliError::Config("n_shots: must be at least 1".into()));
    }
    scenario.n_shots = n_shots;
    cfg.analysis.validate()?;
    if !(cfg.fit.pole_window > 0.0 && cfg.fit.pole_window <= std::f64::consts::FRAC_PI_2) {
        return Err(CliError::Config("fit.pole_window: must lie in (0, π/2]".into()));
    }
    Ok(Resolved {
        scenario,
        n_shots,
        seed: overrides.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        out: overrides
            .out
            .clone()
            .or(cfg.out)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
        format: cfg.format,
        analysis: cfg.analysis,
        fit: cfg.fit,
    })
}
