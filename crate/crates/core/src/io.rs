//! Plain-text matrix format.
//!
//! ```text
//! # comment lines start with '#'
//! d n            (frames)   or   data d n   (raw data, no spanning check)
//! v11 v12 ... v1n
//! ...
//! vd1 vd2 ... vdn
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Header flavour of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Frame,
    Data,
}

/// Parse a matrix file, returning its header kind and entries.
pub fn parse_matrix(text: &str) -> Result<(MatrixKind, DMatrix<f64>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 0,
        message: "missing header".into(),
    })?;
    let mut tokens: Vec<&str> = header.split_whitespace().collect();
    let kind = if tokens.first() == Some(&"data") {
        tokens.remove(0);
        MatrixKind::Data
    } else {
        MatrixKind::Frame
    };
    let parse_dim = |tok: Option<&&str>| -> Result<usize> {
        tok.and_then(|t| t.parse::<usize>().ok())
            .filter(|&v| v > 0)
            .ok_or(Error::Parse {
                line: header_line,
                message: format!("expected header \"d n\", got {header:?}"),
            })
    };
    if tokens.len() != 2 {
        return Err(Error::Parse {
            line: header_line,
            message: format!("expected header \"d n\", got {header:?}"),
        });
    }
    let d = parse_dim(tokens.first())?;
    let n = parse_dim(tokens.get(1))?;

    let mut m = DMatrix::zeros(d, n);
    for row in 0..d {
        let (line_no, line) = lines.next().ok_or(Error::Parse {
            line: 0,
            message: format!("expected {d} rows, found {row}"),
        })?;
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != n {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {n} values, found {}", values.len()),
            });
        }
        for (col, tok) in values.iter().enumerate() {
            m[(row, col)] = tok.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("{tok:?}: {e}"),
            })?;
        }
    }
    if let Some((line_no, _)) = lines.next() {
        return Err(Error::Parse {
            line: line_no,
            message: "trailing content after matrix rows".into(),
        });
    }
    Ok((kind, m))
}

/// Render a matrix with 17 significant digits per entry.
pub fn format_matrix(m: &DMatrix<f64>, kind: MatrixKind) -> String {
    let mut out = String::new();
    if kind == MatrixKind::Data {
        out.push_str("data ");
    }
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_f64(m[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// 17 significant digits, scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Read a frame file; data-headed files are accepted but still validated as frames.
pub fn read_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let text = std::fs::read_to_string(path)?;
    let (_, m) = parse_matrix(&text)?;
    Frame::new(m)
}

/// Read a raw data file (either header flavour; no spanning check).
pub fn read_data(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let (_, m) = parse_matrix(&text)?;
    crate::linalg::ensure_finite(&m)?;
    Ok(m)
}

pub fn write_frame(path: impl AsRef<Path>, frame: &Frame) -> Result<()> {
    std::fs::write(path, format_matrix(frame.matrix(), MatrixKind::Frame))?;
    Ok(())
}

pub fn write_data(path: impl AsRef<Path>, data: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix(data, MatrixKind::Data))?;
    Ok(())
}
