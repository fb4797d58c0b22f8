//! Named scenarios: a scene, a detector and a default shot count.
//!
//! The shipped presets are TOML files under `presets/`, embedded at build
//! time so the binary is self-contained.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{DetectorModel, ScatterScene, SynthError};

pub const DEFAULT_SHOTS: u64 = 1000;

/// Preset names with their TOML sources.
pub const PRESETS: [(&str, &str); 4] = [
    ("tau0", include_str!("../presets/tau0.toml")),
    ("tau200", include_str!("../presets/tau200.toml")),
    ("tau500", include_str!("../presets/tau500.toml")),
    ("raman", include_str!("../presets/raman.toml")),
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown preset `{0}` (available: tau0, tau200, tau500, raman)")]
    UnknownPreset(String),
    #[error("preset `{name}`: {source}")]
    Parse {
        name: String,
        #[source]
        source: toml::de::Error,
    },
    #[error(transparent)]
    Invalid(#[from] SynthError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_shots")]
    pub n_shots: u64,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub scene: ScatterScene,
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.scene.validate()?;
        self.detector.validate()
    }
}

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let src = preset_source(name).ok_or_else(|| ScenarioError::UnknownPreset(name.into()))?;
    let scenario: Scenario = toml::from_str(src).map_err(|source| ScenarioError::Parse {
        name: name.into(),
        source,
    })?;
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modestats::ModeOccupationModel;
    use crate::synth::DiffuseStatistics;

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, _) in PRESETS {
            let s = preset(name).unwrap();
            assert_eq!(s.name, name);
            assert_eq!(s.n_shots, DEFAULT_SHOTS);
        }
    }

    #[test]
    fn preset_contents() {
        let tau0 = preset("tau0").unwrap();
        assert_eq!(tau0.scene.peaks.len(), 2);
        assert!(matches!(tau0.scene.peaks[0].occupation, ModeOccupationModel::Thermal { .. }));
        assert!(matches!(tau0.scene.diffuse_statistics, DiffuseStatistics::Chaotic { .. }));
        assert!(preset("tau500").unwrap().scene.peaks.is_empty());
        let raman = preset("raman").unwrap();
        assert!(matches!(raman.scene.peaks[0].occupation, ModeOccupationModel::Coherent { .. }));
        assert_eq!(raman.scene.peaks[0].hwhm_vertical, 0.039);
        assert_eq!(raman.scene.peaks[0].hwhm_horizontal, 0.190);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(preset("tau1"), Err(ScenarioError::UnknownPreset(_))));
    }
}
