//! File formats: sample CSV (`t,y,x1,...,xp`), statistic path CSV
//! (`k,value`) and JSON documents.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::break_tests::TestOutcome;
use crate::dgp::Sample;
use crate::error::{BreakError, Result};
use crate::limit_lab::CriticalValueTable;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BreakError + '_ {
    move |source| BreakError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, message: impl Into<String>) -> BreakError {
    BreakError::Parse {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn sample_to_csv(sample: &Sample) -> String {
    let p = sample.dim();
    let mut out = String::from("t,y");
    for j in 1..=p {
        let _ = write!(out, ",x{j}");
    }
    out.push('\n');
    for (i, y) in sample.y.iter().enumerate() {
        let _ = write!(out, "{},{}", i + 1, y);
        for j in 0..p {
            let _ = write!(out, ",{}", sample.x[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn write_sample_csv(sample: &Sample, path: &Path) -> Result<()> {
    write_text(path, &sample_to_csv(sample))
}

/// Reads a sample CSV. Columns `x1..xp` form the design in header order;
/// without any x column the design is a single intercept column. A `t`
/// column is optional and ignored.
pub fn read_sample_csv(path: &Path) -> Result<Sample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => BreakError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => parse_err(path, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(path, e.to_string()))?
        .clone();
    let y_col = headers
        .iter()
        .position(|h| h == "y")
        .ok_or_else(|| parse_err(path, "missing `y` column"))?;
    let x_cols: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| {
            h.len() > 1 && h.starts_with('x') && h[1..].chars().all(|c| c.is_ascii_digit())
        })
        .map(|(i, _)| i)
        .collect();
    let mut y = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        let field = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                parse_err(
                    path,
                    format!(
                        "row {}: column `{}` is not a number: {raw:?}",
                        line + 2,
                        &headers[col]
                    ),
                )
            })
        };
        y.push(field(y_col)?);
        for &c in &x_cols {
            xs.push(field(c)?);
        }
    }
    if y.is_empty() {
        return Err(parse_err(path, "no data rows"));
    }
    let x = if x_cols.is_empty() {
        DMatrix::from_element(y.len(), 1, 1.0)
    } else {
        DMatrix::from_row_slice(y.len(), x_cols.len(), &xs)
    };
    Sample::new(y, x)
}

pub fn path_to_csv(outcome: &TestOutcome) -> String {
    let mut out = String::from("k,value\n");
    for (k, v) in outcome.ks().zip(&outcome.path) {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_text(path, &to_json_pretty(value))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_table(path: &Path) -> Result<CriticalValueTable> {
    read_json(path)
}
