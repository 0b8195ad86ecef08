//! Plain-text output. Every float is written with 17 significant digits in
//! exponent form, independent of locale, so files round-trip bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::analysis::EnvelopeSeries;
use crate::integrate::TimeSeries;
use crate::model_continuum::FieldState;
use crate::{Result, C64};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with a header row; each row must have as many values as the header.
pub fn csv_table<'a>(header: &[&str], rows: impl IntoIterator<Item = &'a [f64]>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.16e}");
        }
        s.push('\n');
    }
    s
}

/// Columns `x, re, im`.
pub fn field_csv(field: &FieldState) -> String {
    let rows: Vec<[f64; 3]> = field
        .psi
        .iter()
        .enumerate()
        .map(|(j, z)| [field.grid.x(j), z.re, z.im])
        .collect();
    csv_table(&["x", "re", "im"], rows.iter().map(|r| r.as_slice()))
}

/// Columns `n, re, im` for lattice amplitudes.
pub fn lattice_csv(b: &[C64]) -> String {
    let rows: Vec<[f64; 3]> = b.iter().enumerate().map(|(n, z)| [n as f64, z.re, z.im]).collect();
    csv_table(&["n", "re", "im"], rows.iter().map(|r| r.as_slice()))
}

/// Columns `t, <names…>` for a series of fixed-size records.
pub fn series_csv(names: &[&str], series: &TimeSeries<Vec<f64>>) -> String {
    let mut header = vec!["t"];
    header.extend_from_slice(names);
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|(t, r)| std::iter::once(t).chain(r.iter().copied()).collect())
        .collect();
    csv_table(&header, rows.iter().map(Vec::as_slice))
}

pub fn envelope_csv(env: &EnvelopeSeries) -> String {
    env.to_csv()
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

/// Reads a field written by [`field_csv`] back onto `grid`.
pub fn parse_field_csv(text: &str, grid: crate::model_continuum::Grid) -> Result<FieldState> {
    let mut psi = Vec::new();
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let parse = |k: usize| -> Result<f64> {
            cols.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| crate::Error::Parse(format!("line {}: bad column {k}", line_no + 1)))
        };
        psi.push(C64::new(parse(1)?, parse(2)?));
    }
    FieldState::new(grid, psi)
}
