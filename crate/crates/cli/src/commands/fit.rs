use std::path::Path;

use endfire_core::corr::Plane;
use endfire_core::fitshapes::{
    fit_angular_peak, fit_g2_gaussian, fit_sin2_background, BackgroundRef, FitError, FitResult,
};
use endfire_core::Axis;
use log::info;
use serde::{Deserialize, Serialize};

use super::analyze::AnalysisReport;
use crate::config;
use crate::error::{CliError, Result};
use crate::{analysis_file, read_json, write_json, CONFIG_FILE, FITS_FILE};

pub const FITS_SCHEMA: &str = "endfire-fits v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitEntry {
    pub name: String,
    pub status: FitStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl FitEntry {
    fn new(name: String, outcome: std::result::Result<FitResult, FitError>) -> Self {
        match outcome {
            Ok(r) => Self { name, status: FitStatus::Ok, result: Some(r), error: None },
            Err(e) => Self { name, status: FitStatus::Failed, result: None, error: Some(e.to_string()) },
        }
    }
}

/// Ratio of fitted g² HWHMs between two volumes along one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthRatio {
    pub numerator: String,
    pub denominator: String,
    pub axis: Axis,
    pub ratio: f64,
    pub err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub schema: String,
    pub scenario: String,
    pub seed: u64,
    pub config_sha: String,
    /// Scenario of the peak-free run used as angular background.
    pub background_reference: String,
    pub entries: Vec<FitEntry>,
    pub width_ratios: Vec<WidthRatio>,
}

impl FitSummary {
    pub fn entry(&self, name: &str) -> Option<&FitEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn result(&self, name: &str) -> Option<&FitResult> {
        self.entry(name).and_then(|e| e.result.as_ref())
    }
}

/// Fits every histogram of an analysed run and writes `<run>/fits.json`.
///
/// Failures are recorded per entry. The command itself fails only when no
/// fit at all succeeded.
pub fn fit(run: &Path, reference: Option<&Path>) -> Result<FitSummary> {
    let analysis: AnalysisReport = read_json(&analysis_file(run))?;
    let cfg = config::resolve(config::load(&run.join(CONFIG_FILE))?, &config::Overrides::default())?;
    let reference = reference.map(Path::to_path_buf).or(cfg.fit.reference.clone());
    let reference_analysis: Option<AnalysisReport> = match &reference {
        Some(dir) => Some(read_json(&analysis_file(dir))?),
        None => None,
    };

    let mut entries = Vec::new();
    for v in &analysis.volumes {
        for c in &v.correlations {
            entries.push(FitEntry::new(format!("g2/{}/{}", v.cut.name, c.axis.name()), fit_g2_gaussian(&c.histogram)));
        }
    }

    let missing = |which: &str| CliError::Data(format!("{which} analysis has no y-z angular histogram"));
    let target = analysis.angular(Plane::Yz).ok_or_else(|| missing("run"))?;
    entries.push(FitEntry::new("sin2/yz".into(), fit_sin2_background(target)));
    let background = match &reference_analysis {
        Some(r) => r.angular(Plane::Yz).ok_or_else(|| missing("reference"))?,
        None => target,
    };
    match fit_angular_peak(target, BackgroundRef::Reference(background), cfg.fit.pole_window) {
        Ok(peaks) => {
            for p in peaks.poles {
                let side = if p.pole > 0.0 { "+z" } else { "-z" };
                match p.result {
                    Err(FitError::NoSignificantPeak { .. }) => info!("no significant peak at {side}"),
                    outcome => entries.push(FitEntry::new(format!("lorentzian/yz/{side}"), outcome)),
                }
            }
        }
        Err(FitError::NoSignificantPeak { .. }) => info!("no significant angular peak at either pole"),
        Err(e) => entries.push(FitEntry::new("lorentzian/yz".into(), Err(e))),
    }

    let mut width_ratios = Vec::new();
    let width = |name: String| {
        entries
            .iter()
            .find(|e| e.name == name)
            .and_then(|e| e.result.as_ref())
            .and_then(|r| r.width)
    };
    for axis in [Axis::Z, Axis::Y] {
        let (num, den) = ("peaks", "sphere");
        if let (Some(a), Some(b)) = (
            width(format!("g2/{num}/{}", axis.name())),
            width(format!("g2/{den}/{}", axis.name())),
        ) {
            let ratio = a.value / b.value;
            let err = ratio * ((a.err / a.value).powi(2) + (b.err / b.value).powi(2)).sqrt();
            width_ratios.push(WidthRatio { numerator: num.into(), denominator: den.into(), axis, ratio, err });
        }
    }

    let summary = FitSummary {
        schema: FITS_SCHEMA.into(),
        scenario: analysis.scenario.clone(),
        seed: analysis.seed,
        config_sha: analysis.config_sha.clone(),
        background_reference: reference_analysis.map_or(analysis.scenario.clone(), |r| r.scenario),
        entries,
        width_ratios,
    };
    write_json(&run.join(FITS_FILE), &summary)?;
    if summary.entries.iter().all(|e| e.status == FitStatus::Failed) {
        return Err(CliError::Numerical(format!("{}: every fit failed", run.display())));
    }
    Ok(summary)
}

fn estimate(e: Option<endfire_core::fitshapes::Estimate>) -> String {
    e.map_or_else(|| "-".into(), |e| format!("{:.4} ± {:.4}", e.value, e.err))
}

impl std::fmt::Display for FitSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<20} {:<7} {:>22} {:>22} {:>9}", "fit", "status", "amplitude", "hwhm", "chi2/ndf")?;
        for e in &self.entries {
            match &e.result {
                Some(r) => writeln!(
                    f,
                    "{:<20} {:<7} {:>22} {:>22} {:>9.3}",
                    e.name,
                    "ok",
                    estimate(Some(r.amplitude)),
                    estimate(r.width),
                    r.reduced_chi2
                )?,
                None => writeln!(f, "{:<20} {:<7} {}", e.name, "failed", e.error.as_deref().unwrap_or(""))?,
            }
        }
        for r in &self.width_ratios {
            writeln!(f, "hwhm {}/{} along {}: {:.3} ± {:.3}", r.numerator, r.denominator, r.axis.name(), r.ratio, r.err)?;
        }
        Ok(())
    }
}
