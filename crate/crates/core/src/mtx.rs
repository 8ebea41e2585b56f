//! MatrixMarket array format (`%%MatrixMarket matrix array real general`).
//!
//! Values are stored column-major, one per line. Vectors are `m × 1` arrays.
//! The reader is tolerant of comment lines, blank lines, case in the banner
//! and several values per line; it rejects everything else.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const BANNER: &str = "%%MatrixMarket matrix array real general";

/// Parsed array payload, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ArrayData {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ArrayData {
    pub fn into_matrix(self) -> Result<DenseMatrix> {
        DenseMatrix::from_col_major(self.rows, self.cols, self.values)
    }

    pub fn into_vector(self) -> Result<Vec<f64>> {
        if self.cols != 1 {
            return Err(Error::parse(
                2,
                format!("expected a column vector, found {} columns", self.cols),
            ));
        }
        Ok(self.values)
    }
}

fn check_banner(line: &str) -> Result<()> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    match tokens.as_slice() {
        [mm, obj, fmt, field, sym] if mm == "%%matrixmarket" => {
            if obj != "matrix" {
                return Err(Error::parse(1, format!("unsupported object '{obj}'")));
            }
            if fmt != "array" {
                return Err(Error::parse(1, format!("unsupported format '{fmt}', only 'array'")));
            }
            if field != "real" && field != "integer" {
                return Err(Error::parse(1, format!("unsupported field '{field}'")));
            }
            if sym != "general" {
                return Err(Error::parse(1, format!("unsupported symmetry '{sym}'")));
            }
            Ok(())
        }
        _ => Err(Error::parse(1, "missing '%%MatrixMarket matrix array real general' banner")),
    }
}

/// Parses an array-format document.
pub fn parse_array(text: &str) -> Result<ArrayData> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, banner) = lines.next().ok_or_else(|| Error::parse(1, "empty input"))?;
    check_banner(banner)?;

    let mut body = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });

    let (dim_line, dims) = body.next().ok_or_else(|| Error::parse(2, "missing size line"))?;
    let mut it = dims.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::parse(dim_line, format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| Error::parse(dim_line, format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    if it.next().is_some() {
        return Err(Error::parse(dim_line, "size line of an array has exactly two fields"));
    }
    if rows == 0 || cols == 0 {
        return Err(Error::parse(dim_line, "dimensions must be positive"));
    }
    let expected = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(dim_line, "dimensions overflow"))?;

    let mut values = Vec::new();
    for (line, content) in body {
        for tok in content.split_whitespace() {
            if values.len() == expected {
                return Err(Error::parse(line, format!("more than {expected} values")));
            }
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid number '{tok}'")))?;
            if !v.is_finite() {
                return Err(Error::parse(line, format!("non-finite value '{tok}'")));
            }
            values.push(v);
        }
    }
    if values.len() != expected {
        return Err(Error::parse(
            dim_line,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(ArrayData { rows, cols, values })
}

pub fn read_array<R: Read>(reader: R) -> Result<ArrayData> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;
    parse_array(&text)
}

pub fn read_matrix<R: Read>(reader: R) -> Result<DenseMatrix> {
    read_array(reader)?.into_matrix()
}

pub fn read_vector<R: Read>(reader: R) -> Result<Vec<f64>> {
    read_array(reader)?.into_vector()
}

fn write_array<W: Write>(mut w: W, rows: usize, cols: usize, col_major: &[f64]) -> Result<()> {
    writeln!(w, "{BANNER}")?;
    writeln!(w, "{rows} {cols}")?;
    for v in col_major {
        writeln!(w, "{v:e}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matrix<W: Write>(w: W, a: &DenseMatrix) -> Result<()> {
    write_array(w, a.nrows(), a.ncols(), a.col_major())
}

pub fn write_vector<W: Write>(w: W, v: &[f64]) -> Result<()> {
    write_array(w, v.len(), 1, v)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    read_matrix(File::open(path)?)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_vector(File::open(path)?)
}

pub fn save_matrix(path: impl AsRef<Path>, a: &DenseMatrix) -> Result<()> {
    write_matrix(BufWriter::new(File::create(path)?), a)
}

pub fn save_vector(path: impl AsRef<Path>, v: &[f64]) -> Result<()> {
    write_vector(BufWriter::new(File::create(path)?), v)
}
