//! Text vector files: one whitespace-separated float vector per line.
//! Blank lines are ignored. Written values use the shortest round-trip
//! representation, so a write/read cycle reproduces them exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use recipe_retrieval::{Error, Matrix, Result};

pub fn read_vector_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for token in line.split_whitespace() {
            let value: f64 = token.parse().map_err(|_| {
                Error::Format(format!(
                    "{name}: line {}: {token:?} is not a number",
                    lineno + 1
                ))
            })?;
            if !value.is_finite() {
                return Err(Error::Format(format!(
                    "{name}: line {}: non-finite value {token:?}",
                    lineno + 1
                )));
            }
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a feature/embedding matrix; all rows must share one width.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let rows = read_vector_rows(path)?;
    if rows.is_empty() {
        return Err(Error::Format(format!(
            "{}: no vectors found",
            path.display()
        )));
    }
    let cols = rows[0].len();
    Matrix::from_rows(&rows, cols).map_err(|_| {
        Error::Format(format!(
            "{}: rows have inconsistent lengths",
            path.display()
        ))
    })
}

/// Reads a file that must contain exactly one vector.
pub fn read_single_vector(path: &Path) -> Result<Vec<f64>> {
    let rows = read_vector_rows(path)?;
    match rows.len() {
        1 => Ok(rows.into_iter().next().unwrap()),
        n => Err(Error::Format(format!(
            "{}: expected exactly one vector, found {n}",
            path.display()
        ))),
    }
}

pub fn matrix_to_text(matrix: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..matrix.rows() {
        let mut first = true;
        for v in matrix.row(r) {
            if !first {
                out.push(' ');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    out
}

pub fn read_id_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}
