//! Instance ingestion: matrices as CSV or JSON, joints as JSON, atomic
//! output writing.

use std::io::Write;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::numerics::DenseMatrix;
use crate::pinning::DiscreteJoint;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("json: {0}")]
    Json(String),
    #[error("matrix: {0}")]
    Shape(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parse a matrix from UTF-8 CSV (one row per line, decimal reals) or,
/// when the content starts with '{', from JSON {rows, cols, entries}.
pub fn parse_matrix(bytes: &[u8]) -> Result<DenseMatrix, IoError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| IoError::Csv { line: 0, message: format!("not UTF-8: {e}") })?;
    if text.trim_start().starts_with('{') {
        return parse_matrix_json(text);
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for field in trimmed.split(',') {
            let v: f64 = field.trim().parse().map_err(|e| IoError::Csv {
                line: lineno + 1,
                message: format!("bad number '{}': {e}", field.trim()),
            })?;
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(IoError::Csv {
                    line: lineno + 1,
                    message: format!("row has {} fields, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(IoError::Csv { line: 0, message: "empty matrix".into() });
    }
    let r = rows.len();
    let c = rows[0].len();
    DenseMatrix::new(r, c, rows.into_iter().flatten().collect())
        .map_err(|e| IoError::Shape(e.to_string()))
}

#[derive(Deserialize)]
struct MatrixJson {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

fn parse_matrix_json(text: &str) -> Result<DenseMatrix, IoError> {
    let m: MatrixJson = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    DenseMatrix::new(m.rows, m.cols, m.entries).map_err(|e| IoError::Shape(e.to_string()))
}

pub fn matrix_to_csv(a: &DenseMatrix) -> String {
    let mut s = String::new();
    for i in 0..a.rows() {
        let row: Vec<String> = a.row(i).iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[derive(Deserialize)]
struct JointJson {
    n: usize,
    support: Vec<(Vec<f64>, f64)>,
}

pub fn parse_joint(bytes: &[u8]) -> Result<DiscreteJoint, IoError> {
    let j: JointJson = serde_json::from_slice(bytes).map_err(|e| IoError::Json(e.to_string()))?;
    DiscreteJoint::new(j.n, j.support).map_err(|e| IoError::Json(e.to_string()))
}

/// Write via a temp file in the same directory plus rename, so partially
/// written outputs are never observed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into())
    ));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
