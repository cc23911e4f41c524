//! CSV triangle format.
//!
//! One row per cohort in ascending order, an optional `dev_0,...,dev_m`
//! header, empty fields for unobserved cells. Values are written with six
//! decimals.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triangle::{Mode, RunOffTriangle};

/// How the values in a triangle file are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TriangleKind {
    #[default]
    Cumulative,
    Incremental,
}

pub fn parse_triangle(text: &str, kind: TriangleKind, mode: Mode) -> Result<RunOffTriangle> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut matrix: Vec<Vec<Option<f64>>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 0 && record.iter().any(|f| f.starts_with("dev")) {
            continue;
        }
        let row = record
            .iter()
            .map(|field| {
                if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    Ok(None)
                } else {
                    field.parse::<f64>().map(Some).map_err(|_| {
                        Error::Parse(format!("line {}: bad number {field:?}", line + 1))
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        matrix.push(row);
    }
    match kind {
        TriangleKind::Cumulative => RunOffTriangle::from_cumulative(&matrix, mode),
        TriangleKind::Incremental => RunOffTriangle::from_incremental(&matrix, mode),
    }
}

pub fn read_triangle(path: &Path, kind: TriangleKind, mode: Mode) -> Result<RunOffTriangle> {
    let text = fs::read_to_string(path)?;
    parse_triangle(&text, kind, mode)
}

/// Renders a masked square matrix in the triangle CSV format.
pub fn format_matrix(matrix: &[Vec<Option<f64>>]) -> String {
    let width = matrix.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = String::new();
    let header: Vec<String> = (0..width).map(|j| format!("dev_{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in matrix {
        let fields: Vec<String> = (0..width)
            .map(|j| match row.get(j).copied().flatten() {
                Some(v) => format!("{v:.6}"),
                None => String::new(),
            })
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn format_triangle(tri: &RunOffTriangle, kind: TriangleKind) -> String {
    match kind {
        TriangleKind::Cumulative => format_matrix(&tri.cumulative_matrix()),
        TriangleKind::Incremental => format_matrix(&tri.incremental_matrix()),
    }
}

/// Writes `contents` to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", name.to_string_lossy())),
        None => Path::new(&format!(".{}.tmp", name.to_string_lossy())).to_path_buf(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
