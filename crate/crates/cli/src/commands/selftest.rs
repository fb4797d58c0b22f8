use std::path::Path;

use endfire_core::corr::{brute_force_pair_histogram, pair_histogram, Binning, PairWindow, VolumeCut};

use super::{analyze, fit, report, simulate};
use crate::config::{resolve, Overrides, RunConfig};
use crate::error::{CliError, Result};
use crate::events::{read_events, write_events, EventFormat, EventHeader};
use crate::tables::Table;
use crate::{ANALYSIS_DIR, CONFIG_FILE, COUNTS_FILE, REPORT_DIR};

fn check(ok: bool, what: &str) -> Result<()> {
    if ok {
        println!("ok   {what}");
        Ok(())
    } else {
        Err(CliError::Data(format!("selftest failed: {what}")))
    }
}

fn parse_all_csvs(dir: &Path) -> Result<usize> {
    let mut n = 0;
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            Table::read(&path)?;
            n += 1;
        }
    }
    Ok(n)
}

/// Runs a small pipeline in a scratch directory and checks that every file
/// it writes parses under its documented schema.
pub fn selftest() -> Result<()> {
    let scratch = tempfile::tempdir().map_err(|e| CliError::Data(format!("scratch directory: {e}")))?;
    let run = scratch.path().join("tau0");
    let over = Overrides {
        preset: Some("tau0".into()),
        n_shots: Some(20),
        seed: Some(1),
        out: Some(run.clone()),
    };
    let cfg = resolve(RunConfig::default(), &over)?;
    simulate(&cfg)?;

    let events = run.join(EventFormat::Csv.file_name());
    let first = std::fs::read_to_string(&events).map_err(|e| CliError::io(&events, e))?;
    let mut lines = first.lines();
    check(
        lines.next().is_some_and(|l| EventHeader::parse(l).is_ok()) && lines.next() == Some("shot_id,kx,ky,kz"),
        "event CSV header and columns",
    )?;
    let (header, shots) = read_events(&events, cfg.n_shots)?;
    check(header.config_sha == cfg.digest(), "event header carries the config digest")?;
    let bin = scratch.path().join("events.bin");
    write_events(&bin, &header, &shots, EventFormat::Binary)?;
    check(read_events(&bin, cfg.n_shots)? == (header, shots.clone()), "binary events round-trip")?;

    let cut = VolumeCut::endfire_peaks();
    let fast = pair_histogram(&shots, &cut, &PairWindow::along_z(), &Binning::along_z())
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let slow = brute_force_pair_histogram(&shots, &cut, &PairWindow::along_z(), &Binning::along_z());
    check(fast == slow, "optimized pair counts equal brute force")?;

    analyze(&run, None)?;
    let tables = parse_all_csvs(&run.join(ANALYSIS_DIR))?;
    check(tables == 2 + 2 * cfg.analysis.volumes.len(), "analysis tables parse under the histogram schema")?;
    Table::read(&run.join(COUNTS_FILE))?;
    check(true, "counts table parses under the counts schema")?;

    let other = scratch.path().join("other.toml");
    let mut tampered = cfg.clone();
    tampered.seed += 1;
    std::fs::write(&other, tampered.to_toml()).map_err(|e| CliError::io(&other, e))?;
    check(
        matches!(analyze(&run, Some(&other)), Err(CliError::Data(m)) if m.contains("digest mismatch")),
        "mismatched config digest is rejected",
    )?;
    check(run.join(CONFIG_FILE).is_file(), "resolved config is stored with the run")?;

    fit(&run, None)?;
    report(scratch.path())?;
    let bundle = scratch.path().join(REPORT_DIR).join("tau0");
    check(parse_all_csvs(&bundle)? == tables, "report bundle tables parse")?;
    Ok(())
}
