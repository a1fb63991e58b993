//! CSV readers.
//!
//! Paired samples: a header row naming columns `x_1..x_p` and `y_1..y_q`
//! (any order), one observation per row. Distance matrices: a square numeric
//! matrix, no header, comma-separated, row-major. Every parse error names
//! the offending row and column (1-based, as a spreadsheet would show them).

use std::io::Read;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::PairedSample;
use crate::kernel_metric::PointSet;

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("row {row}, column {col}: `{raw}` is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!(
            "row {row}, column {col}: `{raw}` is not finite"
        )));
    }
    Ok(v)
}

/// `(side, index)` per column, side 0 for x and 1 for y.
type ColumnSlots = Vec<(usize, usize)>;

/// Maps header names to column slots; also returns the x and y dimensions.
fn header_slots(headers: &csv::StringRecord) -> Result<(ColumnSlots, usize, usize)> {
    let mut slots = Vec::with_capacity(headers.len());
    let mut counts = [0usize; 2];
    for (col, name) in headers.iter().enumerate() {
        let name = name.trim();
        let (side, rest) = if let Some(r) = name.strip_prefix("x_") {
            (0, r)
        } else if let Some(r) = name.strip_prefix("y_") {
            (1, r)
        } else {
            return Err(Error::Parse(format!(
                "header column {}: `{name}` is not of the form x_<i> or y_<j>",
                col + 1
            )));
        };
        let idx: usize = rest.parse().ok().filter(|&i| i >= 1).ok_or_else(|| {
            Error::Parse(format!("header column {}: bad index in `{name}`", col + 1))
        })?;
        slots.push((side, idx - 1));
        counts[side] += 1;
    }
    for (side, label) in [(0, "x"), (1, "y")] {
        if counts[side] == 0 {
            return Err(Error::Parse(format!("header has no {label}_<i> columns")));
        }
        let mut seen = vec![false; counts[side]];
        for &(s, i) in &slots {
            if s == side {
                if i >= counts[side] || seen[i] {
                    return Err(Error::Parse(format!(
                        "header columns {label}_1..{label}_{} must each appear exactly once",
                        counts[side]
                    )));
                }
                seen[i] = true;
            }
        }
    }
    Ok((slots, counts[0], counts[1]))
}

/// Reads a paired sample; see the module docs for the layout.
pub fn read_paired_csv<R: Read>(reader: R) -> Result<PairedSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let (slots, p, q) = header_slots(&headers)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        if record.len() != slots.len() {
            return Err(Error::Parse(format!(
                "row {row}: expected {} columns, found {}",
                slots.len(),
                record.len()
            )));
        }
        let mut x = vec![0.0; p];
        let mut y = vec![0.0; q];
        for (c, raw) in record.iter().enumerate() {
            let v = parse_cell(raw, row, c + 1)?;
            match slots[c] {
                (0, i) => x[i] = v,
                (_, i) => y[i] = v,
            }
        }
        xs.extend(x);
        ys.extend(y);
    }
    if xs.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    PairedSample::new(PointSet::new(p, xs)?, PointSet::new(q, ys)?)
}

/// Reads a square matrix with no header.
pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if let Some(first) = rows.first() {
            if record.len() != first.len() {
                return Err(Error::Parse(format!(
                    "row {row}: expected {} columns, found {}",
                    first.len(),
                    record.len()
                )));
            }
        }
        rows.push(
            record
                .iter()
                .enumerate()
                .map(|(c, raw)| parse_cell(raw, row, c + 1))
                .collect::<Result<_>>()?,
        );
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Parse("matrix file is empty".into()));
    }
    if rows[0].len() != n {
        return Err(Error::Parse(format!(
            "matrix is not square: {n} rows, {} columns",
            rows[0].len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_csv_any_column_order() {
        let s = read_paired_csv("y_1,x_2,x_1\n5,2,1\n6,4,3\n".as_bytes()).unwrap();
        assert_eq!(s.x().as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.y().as_slice(), &[5.0, 6.0]);
        assert_eq!(s.x().dim(), 2);
    }

    #[test]
    fn paired_csv_errors_name_location() {
        let err = read_paired_csv("x_1,y_1\n1,2\n3,oops\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 3, column 2"), "{err}");
        let err = read_paired_csv("x_1,y_1\n1,2\n3\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 3"), "{err}");
        assert!(read_paired_csv("x_1,z_1\n1,2\n".as_bytes()).is_err());
        assert!(read_paired_csv("x_1,x_3,y_1\n1,2,3\n".as_bytes()).is_err());
        assert!(read_paired_csv("x_1,y_1\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_csv() {
        let m = read_matrix_csv("0,1\n1,0\n".as_bytes()).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let err = read_matrix_csv("0,1\n1\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(read_matrix_csv("0,1,2\n1,0,2\n".as_bytes()).is_err());
        let err = read_matrix_csv("0,x\n1,0\n".as_bytes())
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 1, column 2"), "{err}");
    }
}
