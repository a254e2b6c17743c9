//! CSV ingestion into tensors (with an observation mask for missing cells)
//! and CSV export.

use std::path::Path;

use thiserror::Error;
use tidt_core::DenseTensor;

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("row {row}, column {col}: cannot parse {value:?} as a number")]
    NotNumeric { row: usize, col: usize, value: String },
    #[error("non-finite value {value:?} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: String },
    #[error("empty CSV")]
    Empty,
    #[error("{0}")]
    Shape(#[from] tidt_core::TidtError),
}

/// Tensor read from CSV plus its observation mask (0 where a cell was NaN or
/// empty).
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub tensor: DenseTensor,
    pub mask: DenseTensor,
}

impl Ingested {
    pub fn missing_count(&self) -> usize {
        self.mask.data().iter().filter(|&&v| v == 0.0).count()
    }
}

fn parse_grid(text: &str) -> Result<(usize, usize, Vec<Option<f64>>), CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut cells = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CsvError::Ragged { row: row + 1, found: record.len(), expected });
        }
        for (col, cell) in record.iter().enumerate() {
            let value = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                None
            } else {
                let v: f64 = cell.parse().map_err(|_| CsvError::NotNumeric {
                    row: row + 1,
                    col: col + 1,
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(CsvError::NonFinite { row: row + 1, col: col + 1, value: cell.to_string() });
                }
                Some(v)
            };
            cells.push(value);
        }
        rows += 1;
    }
    match cols {
        Some(c) if rows > 0 && c > 0 => Ok((rows, c, cells)),
        _ => Err(CsvError::Empty),
    }
}

/// Parses a rectangular CSV. With `time_major` each row is one time step;
/// otherwise each column is. `shape`, if given, reshapes the time-major
/// matrix (time extent first).
pub fn ingest_str(text: &str, time_major: bool, shape: Option<&[usize]>) -> Result<Ingested, CsvError> {
    let (rows, cols, cells) = parse_grid(text)?;
    let (t, width) = if time_major { (rows, cols) } else { (cols, rows) };
    let at = |i: usize, s: usize| if time_major { cells[i * cols + s] } else { cells[s * cols + i] };
    let mut values = Vec::with_capacity(rows * cols);
    let mut mask = Vec::with_capacity(rows * cols);
    for i in 0..t {
        for s in 0..width {
            let v = at(i, s);
            values.push(v.unwrap_or(0.0));
            mask.push(if v.is_some() { 1.0 } else { 0.0 });
        }
    }
    let shape = shape.map(<[usize]>::to_vec).unwrap_or_else(|| vec![t, width]);
    Ok(Ingested { tensor: DenseTensor::from_vec(&shape, values)?, mask: DenseTensor::from_vec(&shape, mask)? })
}

pub fn ingest(path: &Path, time_major: bool, shape: Option<&[usize]>) -> anyhow::Result<Ingested> {
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    Ok(ingest_str(&text, time_major, shape)?)
}

/// Renders a tensor as a `t × (∏ other extents)` CSV with 17 significant
/// digits, so every finite value reads back exactly.
pub fn export_str(t: &DenseTensor, time_major: bool) -> String {
    let rows = t.shape()[0];
    let width = t.len() / rows;
    let cell = |i: usize, s: usize| format!("{:.16e}", t.data()[i * width + s]);
    let mut out = String::new();
    let (outer, inner) = if time_major { (rows, width) } else { (width, rows) };
    for a in 0..outer {
        let line: Vec<String> =
            (0..inner).map(|b| if time_major { cell(a, b) } else { cell(b, a) }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orientation_and_missing_cells() {
        let got = ingest_str("1,2\n3,NaN\n5,\n", true, None).unwrap();
        assert_eq!(got.tensor.shape(), &[3, 2]);
        assert_eq!(got.tensor.data(), &[1.0, 2.0, 3.0, 0.0, 5.0, 0.0]);
        assert_eq!(got.mask.data(), &[1.0, 1.0, 1.0, 0.0, 1.0, 0.0]);
        let sideways = ingest_str("1,3,5\n2,4,6\n", false, None).unwrap();
        assert_eq!(sideways.tensor.shape(), &[3, 2]);
        assert_eq!(sideways.tensor.data(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn reshape_and_errors() {
        let got = ingest_str("1,2,3,4\n5,6,7,8\n", true, Some(&[2, 2, 2])).unwrap();
        assert_eq!(got.tensor.get(&[1, 0, 1]).unwrap(), 6.0);
        assert!(ingest_str("1,2\n3\n", true, None).is_err());
        assert!(ingest_str("1,x\n", true, None).is_err());
        assert!(ingest_str("1,inf\n", true, None).is_err());
        assert!(ingest_str("", true, None).is_err());
        assert!(ingest_str("1,2\n", true, Some(&[3])).is_err());
    }

    #[test]
    fn export_round_trips() {
        let t = DenseTensor::from_vec(&[2, 3], vec![0.1, -1e-300, 2.0 / 3.0, 1e300, 5.0, -0.0]).unwrap();
        for time_major in [true, false] {
            let back = ingest_str(&export_str(&t, time_major), time_major, None).unwrap();
            let bits = |x: &DenseTensor| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&back.tensor), bits(&t));
        }
    }
}
