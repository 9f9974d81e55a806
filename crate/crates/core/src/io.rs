//! CSV ingestion and emission.
//!
//! Input matrices are rectangular numeric CSV files, rows are samples and
//! columns are covariates. Positions in error messages are 1-based data rows
//! and columns (a header line is not counted). Output floats use
//! [`fmt_f64`]: scientific notation with 17 significant digits, so values
//! round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn load_matrix_csv(path: &Path, has_header: bool) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_matrix_csv(file, has_header)
}

pub fn read_matrix_csv<R: std::io::Read>(reader: R, has_header: bool) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let expected = *cols.get_or_insert(rec.len());
        if rec.len() != expected {
            return Err(Error::RaggedRows {
                row,
                found: rec.len(),
                expected,
            });
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                col: j + 1,
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col: j + 1 });
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::Parse {
            row: 0,
            col: 0,
            message: "no data rows".into(),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

/// A single-column response file.
pub fn load_vector_csv(path: &Path, has_header: bool) -> Result<DVector<f64>> {
    let m = load_matrix_csv(path, has_header)?;
    if m.ncols() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} must have exactly one column, found {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(m.column(0).into_owned())
}

/// Scientific notation with 17 significant digits; `NA` for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), fmt_f64)
}

/// Writes `header` and `rows` as comma-separated lines.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
