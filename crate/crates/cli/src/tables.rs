//! Plot-ready CSV tables.
//!
//! Every table starts with a `#` line naming its schema and carrying
//! `key=value` metadata, followed by a column line and numeric rows.
//! Undefined values are written as `nan`.
//!
//! | schema | columns |
//! |---|---|
//! | `endfire-histogram v1` | `bin_center,value,err68` |
//! | `endfire-counts v1` | `shot_id,detected,diffuse,peak0,…` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

pub const HISTOGRAM_SCHEMA: &str = "endfire-histogram v1";
pub const HISTOGRAM_COLUMNS: [&str; 3] = ["bin_center", "value", "err68"];
pub const COUNTS_SCHEMA: &str = "endfire-counts v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub meta: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        v.to_string()
    }
}

impl Table {
    pub fn new(schema: &str, meta: &[(&str, String)], columns: &[&str]) -> Self {
        Self {
            schema: schema.into(),
            meta: meta.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Histogram table; `None` values become `nan`.
    pub fn histogram(meta: &[(&str, String)], centers: &[f64], values: &[Option<f64>], err68: &[Option<f64>]) -> Self {
        let mut t = Self::new(HISTOGRAM_SCHEMA, meta, &HISTOGRAM_COLUMNS);
        for ((&c, v), e) in centers.iter().zip(values).zip(err68) {
            t.rows.push(vec![c, v.unwrap_or(f64::NAN), e.unwrap_or(f64::NAN)]);
        }
        t
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {}", self.schema);
        for (k, v) in &self.meta {
            let _ = write!(s, "; {k}={v}");
        }
        s.push('\n');
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| number(v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, why: String| CliError::Data(format!("line {line}: {why}"));
        let mut lines = text.lines();
        let head = lines
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .ok_or_else(|| bad(1, "missing `# <schema>` header".into()))?;
        let mut fields = head.split("; ");
        let schema = fields.next().unwrap_or_default().to_string();
        let mut meta = BTreeMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| bad(1, format!("malformed field `{f}`")))?;
            meta.insert(k.to_string(), v.to_string());
        }
        let columns: Vec<String> = lines
            .next()
            .ok_or_else(|| bad(2, "missing column line".into()))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>().map_err(|e| bad(i + 3, format!("`{c}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(bad(i + 3, format!("{} fields for {} columns", row.len(), columns.len())));
            }
            rows.push(row);
        }
        let table = Self { schema, meta, columns, rows };
        table.check_schema()?;
        Ok(table)
    }

    fn check_schema(&self) -> Result<()> {
        let ok = match self.schema.as_str() {
            HISTOGRAM_SCHEMA => self.columns == HISTOGRAM_COLUMNS,
            COUNTS_SCHEMA => {
                self.columns.len() >= 3
                    && self.columns[..3] == ["shot_id", "detected", "diffuse"]
                    && self.columns[3..].iter().enumerate().all(|(i, c)| *c == format!("peak{i}"))
            }
            other => return Err(CliError::Data(format!("unknown table schema `{other}`"))),
        };
        if ok {
            Ok(())
        } else {
            Err(CliError::Data(format!("columns {:?} do not match schema `{}`", self.columns, self.schema)))
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
