use std::f64::consts::{FRAC_PI_2, PI};

use endfire_core::corr::{Plane, VolumeCut};
use endfire_core::synth::{synthesize_run_tallied, Shot};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::Resolved;
use crate::error::{CliError, Result};
use crate::events::{write_events, EventHeader};
use crate::tables::{Table, COUNTS_SCHEMA};
use crate::{create_dir, write_json, CONFIG_FILE, COUNTS_FILE, SIMULATION_FILE};

/// Half-width in rad of the region around each pole.
const POLE_REGION: f64 = 0.5;

/// Counts near one pole of the y-z angular distribution beyond what a
/// sin²θ pattern matched to the counts away from both poles predicts.
/// `noise` is the shot-to-shot standard error, so diffuse speckle is
/// included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleExcess {
    pub pole: f64,
    pub excess: f64,
    pub noise: f64,
    pub background: f64,
}

/// ∫ sin²θ over |θ − π/2| < h.
fn sin2_integral(h: f64) -> f64 {
    h + (2.0 * h).sin() / 2.0
}

pub(crate) fn pole_excess(shots: &[Shot], slab: f64, shell: &VolumeCut) -> Vec<PoleExcess> {
    let near = sin2_integral(POLE_REGION);
    let scale = near / (PI - 2.0 * near);
    let m = shots.len() as f64;
    [FRAC_PI_2, -FRAC_PI_2]
        .into_iter()
        .map(|pole| {
            let per_shot: Vec<(f64, f64)> = shots
                .iter()
                .map(|shot| {
                    let (mut at_pole, mut away) = (0.0, 0.0);
                    for &k in &shot.events {
                        if Plane::Yz.normal(k).abs() < slab && shell.contains(k) {
                            let t = Plane::Yz.angle(k);
                            if (t - pole).abs() < POLE_REGION {
                                at_pole += 1.0;
                            } else if (t.abs() - FRAC_PI_2).abs() >= POLE_REGION {
                                away += 1.0;
                            }
                        }
                    }
                    (at_pole - scale * away, scale * away)
                })
                .collect();
            let excess: f64 = per_shot.iter().map(|p| p.0).sum();
            let mean = excess / m;
            let var = per_shot.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            PoleExcess {
                pole,
                excess,
                noise: (m * var).sqrt(),
                background: per_shot.iter().map(|p| p.1).sum(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub scenario: String,
    pub n_shots: u64,
    pub seed: u64,
    pub config_sha: String,
    pub generated: u64,
    pub detected: u64,
    /// Minimum, mean and maximum detected events per shot.
    pub detected_per_shot: [f64; 3],
    pub peak_detected: Vec<u64>,
    pub shell_counts: u64,
    pub pole_excess: Vec<PoleExcess>,
}

/// Synthesizes the run and writes the event file, the resolved config,
/// per-shot counts and a summary into `cfg.out`.
pub fn simulate(cfg: &Resolved) -> Result<SimulationSummary> {
    let sha = cfg.digest();
    info!("simulating {} shots of `{}` (seed {})", cfg.n_shots, cfg.scenario.name, cfg.seed);
    let run = synthesize_run_tallied(&cfg.scenario.scene, &cfg.scenario.detector, cfg.n_shots, cfg.seed)
        .map_err(|e| CliError::Config(format!("scenario: {e}")))?;

    create_dir(&cfg.out)?;
    let config_path = cfg.out.join(CONFIG_FILE);
    std::fs::write(&config_path, cfg.to_toml()).map_err(|e| CliError::io(&config_path, e))?;

    let n_peaks = cfg.scenario.scene.peaks.len();
    let peak_columns: Vec<String> = (0..n_peaks).map(|i| format!("peak{i}")).collect();
    let mut columns = vec!["shot_id", "detected", "diffuse"];
    columns.extend(peak_columns.iter().map(String::as_str));
    let mut counts = Table::new(
        COUNTS_SCHEMA,
        &[("seed", cfg.seed.to_string()), ("config_sha", sha.clone())],
        &columns,
    );
    let mut peak_detected = vec![0u64; n_peaks];
    let (mut generated, mut detected) = (0, 0);
    let (mut lo, mut hi) = (u64::MAX, 0);
    for (shot, tally) in &run {
        let mut row = vec![shot.shot_id as f64, tally.detected() as f64, tally.diffuse_detected as f64];
        row.extend(tally.peak_detected.iter().map(|&n| n as f64));
        counts.rows.push(row);
        for (sum, n) in peak_detected.iter_mut().zip(&tally.peak_detected) {
            *sum += n;
        }
        generated += tally.generated();
        detected += tally.detected();
        lo = lo.min(tally.detected());
        hi = hi.max(tally.detected());
    }
    counts.write(&cfg.out.join(COUNTS_FILE))?;

    let shots: Vec<_> = run.into_iter().map(|(shot, _)| shot).collect();
    let header = EventHeader { seed: cfg.seed, config_sha: sha.clone() };
    write_events(&cfg.out.join(cfg.format.file_name()), &header, &shots, cfg.format)?;

    let shell = cfg.analysis.shell_cut();
    let shell_counts = shots
        .iter()
        .flat_map(|s| &s.events)
        .filter(|k| shell.contains(**k))
        .count() as u64;
    let summary = SimulationSummary {
        scenario: cfg.scenario.name.clone(),
        n_shots: cfg.n_shots,
        seed: cfg.seed,
        config_sha: sha,
        generated,
        detected,
        detected_per_shot: [lo as f64, detected as f64 / cfg.n_shots as f64, hi as f64],
        peak_detected,
        shell_counts,
        pole_excess: pole_excess(&shots, cfg.analysis.angle_slab, &shell),
    };
    write_json(&cfg.out.join(SIMULATION_FILE), &summary)?;
    Ok(summary)
}

impl std::fmt::Display for SimulationSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [lo, mean, hi] = self.detected_per_shot;
        writeln!(f, "scenario {}  shots {}  seed {}", self.scenario, self.n_shots, self.seed)?;
        writeln!(f, "detected {} of {} generated; per shot min {lo} mean {mean:.1} max {hi}", self.detected, self.generated)?;
        for (i, n) in self.peak_detected.iter().enumerate() {
            writeln!(f, "peak{i}: {n} detected")?;
        }
        writeln!(f, "shell counts {}", self.shell_counts)?;
        for p in &self.pole_excess {
            let side = if p.pole > 0.0 { "+z" } else { "-z" };
            writeln!(
                f,
                "excess over sin²θ at {side}: {:.0} ± {:.0} ({:.1}σ, {:.1}% of the background)",
                p.excess,
                p.noise,
                p.excess / p.noise,
                100.0 * p.excess / p.background
            )?;
        }
        Ok(())
    }
}
