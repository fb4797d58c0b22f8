use std::path::Path;

use endfire_core::corr::{
    angular_distribution, normalize_g2, pair_histogram_with, AngleHistogram, CorrError,
    CorrelationHistogram, PairCountOptions, Plane, VolumeCut, ESTIMATOR_VERSION,
};
use endfire_core::synth::Shot;
use endfire_core::Axis;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::{self, Overrides, Resolved};
use crate::error::{CliError, Result};
use crate::events::{find_in, read_events};
use crate::tables::Table;
use crate::{analysis_file, create_dir, write_json, ANALYSIS_DIR, CONFIG_FILE};

pub const ANALYSIS_SCHEMA: &str = "endfire-analysis v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisHistogram {
    pub axis: Axis,
    pub histogram: CorrelationHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeAnalysis {
    pub cut: VolumeCut,
    pub events: u64,
    pub correlations: Vec<AxisHistogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub estimator: String,
    pub scenario: String,
    pub seed: u64,
    pub config_sha: String,
    pub n_shots: u64,
    pub total_events: u64,
    pub shell: [f64; 2],
    pub shell_counts: u64,
    pub denominator_groups: usize,
    pub angular: Vec<AngleHistogram>,
    pub volumes: Vec<VolumeAnalysis>,
}

impl AnalysisReport {
    pub fn angular(&self, plane: Plane) -> Option<&AngleHistogram> {
        self.angular.iter().find(|h| h.plane == plane)
    }
}

fn corr_error(cut: &VolumeCut, axis: Axis, err: CorrError) -> CliError {
    let what = format!("volume `{}` along {}", cut.name, axis.name());
    match err {
        CorrError::EmptySelection(name) => {
            CliError::Data(format!("{what}: no events survive the `{name}` cut"))
        }
        CorrError::TooFewShots(n) => CliError::Data(format!("{what}: {n} shot(s) cannot form a cross-shot denominator")),
        CorrError::EmptyDenominator => CliError::Numerical(format!("{what}: every denominator bin is empty")),
        CorrError::InvalidParameter(why) => CliError::Config(format!("{what}: {why}")),
    }
}

/// Loads the run's configuration and events, checking that the event file
/// was written by this configuration.
pub(crate) fn load_run(run: &Path, config_path: Option<&Path>) -> Result<(Resolved, Vec<Shot>)> {
    let path = config_path.map_or_else(|| run.join(CONFIG_FILE), Path::to_path_buf);
    let mut cfg = config::resolve(config::load(&path)?, &Overrides::default())?;
    cfg.out = run.to_path_buf();
    let events = find_in(run)
        .ok_or_else(|| CliError::Data(format!("{}: no events.csv or events.bin", run.display())))?;
    let (header, shots) = read_events(&events, cfg.n_shots)?;
    let expected = cfg.digest();
    if header.config_sha != expected || header.seed != cfg.seed {
        return Err(CliError::Data(format!(
            "{}: config digest mismatch: events carry config_sha={} seed={}, {} gives config_sha={expected} seed={}",
            events.display(),
            header.config_sha,
            header.seed,
            path.display(),
            cfg.seed
        )));
    }
    Ok((cfg, shots))
}

fn angular_table(h: &AngleHistogram) -> Table {
    let values: Vec<Option<f64>> = h.values.iter().copied().map(Some).collect();
    let errs: Vec<Option<f64>> = h.err68.iter().copied().map(Some).collect();
    Table::histogram(
        &[
            ("quantity", "counts".into()),
            ("abscissa", format!("theta_{}", h.plane.name())),
            ("units", "rad".into()),
            ("slab", h.slab.to_string()),
            ("n_shots", h.n_shots.to_string()),
        ],
        &h.bin_centers(),
        &values,
        &errs,
    )
}

fn g2_table(volume: &str, axis: Axis, h: &CorrelationHistogram, sha: &str) -> Table {
    Table::histogram(
        &[
            ("quantity", "g2".into()),
            ("volume", volume.into()),
            ("abscissa", format!("dk_{}", axis.name())),
            ("units", "k_rec".into()),
            ("estimator", ESTIMATOR_VERSION.into()),
            ("config_sha", sha.into()),
        ],
        &h.bin_centers(),
        &h.g2,
        &h.err68,
    )
}

/// Angular histograms in both planes and g² along z and y for every
/// configured volume, written under `<run>/analysis/`.
pub fn analyze(run: &Path, config_path: Option<&Path>) -> Result<AnalysisReport> {
    let (cfg, shots) = load_run(run, config_path)?;
    let a = &cfg.analysis;
    let sha = cfg.digest();
    let dir = run.join(ANALYSIS_DIR);
    create_dir(&dir)?;

    let shell = a.shell_cut();
    let mut angular = Vec::new();
    for plane in [Plane::Yz, Plane::Xz] {
        let h = angular_distribution(&shots, plane, a.angle_slab, &shell, a.angle_bins);
        angular_table(&h).write(&dir.join(format!("angular_{}.csv", plane.name())))?;
        angular.push(h);
    }

    let groups = a.effective_groups(cfg.n_shots);
    let options = PairCountOptions { denominator_groups: groups };
    let mut volumes = Vec::new();
    for cut in &a.volumes {
        let events = shots
            .iter()
            .flat_map(|s| &s.events)
            .filter(|k| cut.contains(**k))
            .count() as u64;
        info!("volume `{}`: {events} events", cut.name);
        let mut correlations = Vec::new();
        for (axis, ax) in [(Axis::Z, &a.z), (Axis::Y, &a.y)] {
            let counts = pair_histogram_with(&shots, cut, &ax.window(axis), &ax.binning(), &options)
                .map_err(|e| corr_error(cut, axis, e))?;
            if counts.duplicate_pairs > 0 {
                warn!("volume `{}`: {} same-shot pairs at identical momenta", cut.name, counts.duplicate_pairs);
            }
            let histogram = normalize_g2(&counts).map_err(|e| corr_error(cut, axis, e))?;
            g2_table(&cut.name, axis, &histogram, &sha).write(&dir.join(format!("g2_{}_{}.csv", cut.name, axis.name())))?;
            correlations.push(AxisHistogram { axis, histogram });
        }
        volumes.push(VolumeAnalysis { cut: cut.clone(), events, correlations });
    }

    let report = AnalysisReport {
        schema: ANALYSIS_SCHEMA.into(),
        estimator: ESTIMATOR_VERSION.into(),
        scenario: cfg.scenario.name.clone(),
        seed: cfg.seed,
        config_sha: sha,
        n_shots: cfg.n_shots,
        total_events: shots.iter().map(|s| s.events.len() as u64).sum(),
        shell: a.shell,
        shell_counts: shots.iter().flat_map(|s| &s.events).filter(|k| shell.contains(**k)).count() as u64,
        denominator_groups: groups,
        angular,
        volumes,
    };
    write_json(&analysis_file(run), &report)?;
    Ok(report)
}

impl std::fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{}: {} events in {} shots, {} in the shell", self.scenario, self.total_events, self.n_shots, self.shell_counts)?;
        for v in &self.volumes {
            for c in &v.correlations {
                let g0 = c.histogram.g2.first().copied().flatten();
                let e0 = c.histogram.err68.first().copied().flatten();
                match (g0, e0) {
                    (Some(g), Some(e)) => writeln!(f, "{:>8} {}: {} events, g2(0) = {g:.3} ± {e:.3}", v.cut.name, c.axis.name(), v.events)?,
                    _ => writeln!(f, "{:>8} {}: {} events, g2(0) undefined", v.cut.name, c.axis.name(), v.events)?,
                }
            }
        }
        Ok(())
    }
}
