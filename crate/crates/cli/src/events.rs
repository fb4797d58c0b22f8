//! Event files: one header line carrying the format version, seed, config
//! digest and unit convention, then one record per detected atom.
//!
//! The text form is
//!
//! ```text
//! # endfire-events v1; seed=42; config_sha=<hex>; units=k_rec
//! shot_id,kx,ky,kz
//! 0,0.0123,-0.41,0.98
//! ```
//!
//! The binary form starts with the magic `ENDFIREB`, a little-endian u32
//! length and the same header line, followed by 32-byte records
//! (u64 shot id, then k_x, k_y, k_z as f64), all little-endian.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use endfire_core::synth::Shot;
use endfire_core::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: &str = "v1";
pub const UNITS: &str = "k_rec";
pub const CSV_COLUMNS: &str = "shot_id,kx,ky,kz";
pub const BINARY_MAGIC: &[u8; 8] = b"ENDFIREB";
const RECORD_BYTES: usize = 32;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventFormat {
    #[default]
    Csv,
    Binary,
}

impl EventFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            EventFormat::Csv => "events.csv",
            EventFormat::Binary => "events.bin",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventHeader {
    pub seed: u64,
    pub config_sha: String,
}

impl EventHeader {
    pub fn line(&self) -> String {
        format!(
            "# endfire-events {FORMAT_VERSION}; seed={}; config_sha={}; units={UNITS}",
            self.seed, self.config_sha
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = |why: String| CliError::Data(format!("event header `{}`: {why}", line.trim_end()));
        let body = line
            .trim_end()
            .strip_prefix("# endfire-events ")
            .ok_or_else(|| bad("not an endfire event file".into()))?;
        let mut fields = body.split("; ");
        match fields.next() {
            Some(FORMAT_VERSION) => {}
            other => return Err(bad(format!("unsupported version {other:?}"))),
        }
        let (mut seed, mut sha, mut units) = (None, None, None);
        for field in fields {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed field `{field}`")))?;
            match key {
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(format!("seed: {e}")))?),
                "config_sha" => sha = Some(value.to_string()),
                "units" => units = Some(value.to_string()),
                _ => return Err(bad(format!("unknown field `{key}`"))),
            }
        }
        match units.as_deref() {
            Some(UNITS) => {}
            other => return Err(bad(format!("units must be {UNITS}, found {other:?}"))),
        }
        Ok(Self {
            seed: seed.ok_or_else(|| bad("missing seed".into()))?,
            config_sha: sha.ok_or_else(|| bad("missing config_sha".into()))?,
        })
    }
}

pub fn write_events(path: &Path, header: &EventHeader, shots: &[Shot], format: EventFormat) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    match format {
        EventFormat::Csv => {
            writeln!(w, "{}", header.line()).map_err(io)?;
            writeln!(w, "{CSV_COLUMNS}").map_err(io)?;
            for shot in shots {
                for k in &shot.events {
                    writeln!(w, "{},{},{},{}", shot.shot_id, k.x, k.y, k.z).map_err(io)?;
                }
            }
        }
        EventFormat::Binary => {
            let line = header.line();
            w.write_all(BINARY_MAGIC).map_err(io)?;
            w.write_all(&(line.len() as u32).to_le_bytes()).map_err(io)?;
            w.write_all(line.as_bytes()).map_err(io)?;
            for shot in shots {
                for k in &shot.events {
                    w.write_all(&shot.shot_id.to_le_bytes()).map_err(io)?;
                    for c in [k.x, k.y, k.z] {
                        w.write_all(&c.to_le_bytes()).map_err(io)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(io)
}

/// Reads an event file of either format into `n_shots` shots, including
/// shots without any detected event.
pub fn read_events(path: &Path, n_shots: u64) -> Result<(EventHeader, Vec<Shot>)> {
    let io = |e| CliError::io(path, e);
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut shots: Vec<Shot> = (0..n_shots).map(|shot_id| Shot { shot_id, events: Vec::new() }).collect();
    let mut last = 0u64;
    let mut push = |id: u64, k: Vec3, at: &dyn Fn() -> String| -> Result<()> {
        if id < last {
            return Err(CliError::Data(format!("{}: shot {id} after shot {last}; records must be grouped by ascending shot_id", at())));
        }
        let shot = shots
            .get_mut(id as usize)
            .ok_or_else(|| CliError::Data(format!("{}: shot_id {id} outside the configured {n_shots} shots", at())))?;
        shot.events.push(k);
        last = id;
        Ok(())
    };

    let is_binary = r.fill_buf().map_err(io)?.starts_with(BINARY_MAGIC);
    let header = if is_binary {
        let mut head = [0u8; 12];
        r.read_exact(&mut head).map_err(io)?;
        let len = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
        let mut line = vec![0u8; len];
        r.read_exact(&mut line).map_err(io)?;
        let line = String::from_utf8(line).map_err(|_| CliError::Data(format!("{}: header is not UTF-8", path.display())))?;
        let header = EventHeader::parse(&line)?;
        let mut rec = [0u8; RECORD_BYTES];
        let mut index = 0u64;
        loop {
            match read_record(&mut r, &mut rec) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => return Err(CliError::Data(format!("{} record {index}: {e}", path.display()))),
            }
            let word = |i: usize| u64::from_le_bytes(rec[8 * i..8 * i + 8].try_into().unwrap());
            let k = Vec3::new(f64::from_bits(word(1)), f64::from_bits(word(2)), f64::from_bits(word(3)));
            push(word(0), k, &|| format!("{} record {index}", path.display()))?;
            index += 1;
        }
        header
    } else {
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| CliError::Data(format!("{}: missing {what}", path.display())))?
                .map_err(io)
        };
        let header = EventHeader::parse(&next("header")?)?;
        let columns = next("column line")?;
        if columns.trim_end() != CSV_COLUMNS {
            return Err(CliError::Data(format!("{}: expected columns `{CSV_COLUMNS}`, found `{columns}`", path.display())));
        }
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io)?;
            let at = || format!("{}:{}", path.display(), i + 3);
            let mut parts = line.split(',');
            let id: u64 = parse_field(parts.next(), &at)?;
            let kx: f64 = parse_field(parts.next(), &at)?;
            let ky: f64 = parse_field(parts.next(), &at)?;
            let kz: f64 = parse_field(parts.next(), &at)?;
            if parts.next().is_some() {
                return Err(CliError::Data(format!("{}: too many fields", at())));
            }
            push(id, Vec3::new(kx, ky, kz), &at)?;
        }
        header
    };
    Ok((header, shots))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, at: &dyn Fn() -> String) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let field = field.ok_or_else(|| CliError::Data(format!("{}: too few fields", at())))?;
    field
        .trim()
        .parse()
        .map_err(|e| CliError::Data(format!("{}: `{field}`: {e}", at())))
}

/// Fills `rec`; false at a clean end of file.
fn read_record(r: &mut impl Read, rec: &mut [u8; RECORD_BYTES]) -> std::io::Result<bool> {
    let mut filled = 0;
    while filled < RECORD_BYTES {
        match r.read(&mut rec[filled..])? {
            0 if filled == 0 => return Ok(false),
            0 => return Err(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated record")),
            n => filled += n,
        }
    }
    Ok(true)
}

/// Locates the event file in a run directory.
pub fn find_in(dir: &Path) -> Option<std::path::PathBuf> {
    [EventFormat::Csv, EventFormat::Binary]
        .iter()
        .map(|f| dir.join(f.file_name()))
        .find(|p| p.is_file())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Vec<Shot> {
        vec![
            Shot { shot_id: 0, events: vec![Vec3::new(0.1, -0.2, 0.3), Vec3::new(1.0 / 3.0, 2e-17, -0.0)] },
            Shot { shot_id: 1, events: Vec::new() },
            Shot { shot_id: 2, events: vec![Vec3::new(-0.95, 5e300, 1e-300)] },
        ]
    }

    fn header() -> EventHeader {
        EventHeader { seed: 9, config_sha: "ab12".into() }
    }

    #[test]
    fn both_formats_round_trip_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for format in [EventFormat::Csv, EventFormat::Binary] {
            let path = dir.path().join(format.file_name());
            write_events(&path, &header(), &sample(), format).unwrap();
            let (h, shots) = read_events(&path, 3).unwrap();
            assert_eq!(h, header());
            assert_eq!(shots.len(), 3);
            for (a, b) in shots.iter().zip(sample()) {
                assert_eq!(a.shot_id, b.shot_id);
                let bits = |s: &[Vec3]| s.iter().map(|k| [k.x.to_bits(), k.y.to_bits(), k.z.to_bits()]).collect::<Vec<_>>();
                assert_eq!(bits(&a.events), bits(&b.events));
            }
        }
    }

    #[test]
    fn header_line_format() {
        assert_eq!(header().line(), "# endfire-events v1; seed=9; config_sha=ab12; units=k_rec");
        assert!(EventHeader::parse("# endfire-events v1; seed=9; config_sha=ab; units=mm").is_err());
        assert!(EventHeader::parse("# endfire-events v2; seed=9; config_sha=ab; units=k_rec").is_err());
    }

    #[test]
    fn unordered_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        std::fs::write(&path, format!("{}\n{CSV_COLUMNS}\n1,0,0,0\n0,0,0,0\n", header().line())).unwrap();
        let err = read_events(&path, 2).unwrap_err();
        assert!(err.to_string().contains("ascending"), "{err}");
        assert!(read_events(&path, 1).is_err());
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.bin");
        write_events(&path, &header(), &sample(), EventFormat::Binary).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(read_events(&path, 3).is_err());
    }
}
