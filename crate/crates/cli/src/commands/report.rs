use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::analyze::AnalysisReport;
use crate::error::{CliError, Result};
use crate::{analysis_file, create_dir, read_json, write_json, ANALYSIS_DIR, CONFIG_FILE, FITS_FILE, REPORT_DIR};

pub const REPORT_SCHEMA: &str = "endfire-report v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeCount {
    pub name: String,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: String,
    pub scenario: String,
    pub seed: u64,
    pub config_sha: String,
    pub n_shots: u64,
    pub estimator: String,
    pub denominator_groups: usize,
    pub total_events: u64,
    pub shell_counts: u64,
    pub volumes: Vec<VolumeCount>,
    /// Contents of the run's fits.json, when it has been fitted.
    pub fits: Option<serde_json::Value>,
    pub tables: Vec<String>,
}

/// Ratio of total shell counts between two runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRatio {
    pub numerator: String,
    pub denominator: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub schema: String,
    pub runs: Vec<RunSummary>,
    pub shell_count_ratios: Vec<CountRatio>,
}

fn run_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| ".".into(), |n| n.to_string_lossy().into_owned())
}

/// Run directories: `dir` itself when it holds a config, otherwise its
/// immediate subdirectories that do, in name order.
fn discover(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(CONFIG_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut runs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.is_dir() && path.join(CONFIG_FILE).is_file() {
            runs.push(path);
        }
    }
    runs.sort();
    Ok(runs)
}

fn expected_artifacts(dir: &Path) -> String {
    format!(
        "{}: no analysed runs found; expected a run directory, or subdirectories, containing\n  {CONFIG_FILE}\n  events.csv or events.bin\n  {ANALYSIS_DIR}/analysis.json (from `endfire analyze`)\n  {FITS_FILE} (optional, from `endfire fit`)",
        dir.display()
    )
}

fn sorted_csvs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csvs: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    Ok(csvs)
}

/// Gathers every analysed run under `dir` into `<dir>/report/summary.json`
/// and copies their histogram tables to `<dir>/report/<run>/`.
pub fn report(dir: &Path) -> Result<ReportSummary> {
    let runs = discover(dir)?;
    if runs.is_empty() {
        return Err(CliError::Data(expected_artifacts(dir)));
    }
    let missing: Vec<String> = runs
        .iter()
        .map(|r| analysis_file(r))
        .filter(|p| !p.is_file())
        .map(|p| format!("  {}", p.display()))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::Data(format!("missing analysis outputs (run `endfire analyze`):\n{}", missing.join("\n"))));
    }

    let out = dir.join(REPORT_DIR);
    create_dir(&out)?;
    let mut summaries = Vec::new();
    for run in &runs {
        let name = run_name(run);
        let analysis: AnalysisReport = read_json(&analysis_file(run))?;
        let fits_path = run.join(FITS_FILE);
        let fits = if fits_path.is_file() { Some(read_json(&fits_path)?) } else { None };
        let bundle = out.join(&name);
        create_dir(&bundle)?;
        let mut tables = Vec::new();
        for csv in sorted_csvs(&run.join(ANALYSIS_DIR))? {
            let file = csv.file_name().expect("csv has a name").to_string_lossy().into_owned();
            let dest = bundle.join(&file);
            std::fs::copy(&csv, &dest).map_err(|e| CliError::io(&csv, e))?;
            tables.push(format!("{name}/{file}"));
        }
        summaries.push(RunSummary {
            run: name,
            scenario: analysis.scenario,
            seed: analysis.seed,
            config_sha: analysis.config_sha,
            n_shots: analysis.n_shots,
            estimator: analysis.estimator,
            denominator_groups: analysis.denominator_groups,
            total_events: analysis.total_events,
            shell_counts: analysis.shell_counts,
            volumes: analysis
                .volumes
                .iter()
                .map(|v| VolumeCount { name: v.cut.name.clone(), events: v.events })
                .collect(),
            fits,
            tables,
        });
    }

    let mut ratios = Vec::new();
    for a in &summaries {
        for b in &summaries {
            if a.run != b.run && b.shell_counts > 0 {
                ratios.push(CountRatio {
                    numerator: a.run.clone(),
                    denominator: b.run.clone(),
                    ratio: a.shell_counts as f64 / b.shell_counts as f64,
                });
            }
        }
    }
    let summary = ReportSummary {
        schema: REPORT_SCHEMA.into(),
        runs: summaries,
        shell_count_ratios: ratios,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

impl ReportSummary {
    pub fn ratio(&self, numerator: &str, denominator: &str) -> Option<f64> {
        self.shell_count_ratios
            .iter()
            .find(|r| r.numerator == numerator && r.denominator == denominator)
            .map(|r| r.ratio)
    }
}

impl std::fmt::Display for ReportSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in &self.runs {
            writeln!(f, "{:<12} {:<8} seed {:<6} shots {:<6} shell {}", r.run, r.scenario, r.seed, r.n_shots, r.shell_counts)?;
        }
        for r in &self.shell_count_ratios {
            writeln!(f, "shell counts {}/{}: {:.3}", r.numerator, r.denominator, r.ratio)?;
        }
        Ok(())
    }
}
