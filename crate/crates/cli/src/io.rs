//! Numeric CSV input. Comma-separated, `.` decimal point, and an optional
//! header row recognized by having at least one non-numeric cell.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::CliError;

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok()
}

/// Reads a rectangular numeric table.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let file = File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    read_matrix_from(file, &path.display().to_string())
}

pub fn read_matrix_from<R: std::io::Read>(reader: R, label: &str) -> Result<DMatrix<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CliError::Input(format!("{label}: {e}")))?;
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            // header row
            continue;
        }
        let mut row = Vec::with_capacity(parsed.len());
        for (col, v) in parsed.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => row.push(v),
                Some(_) => {
                    return Err(CliError::Input(format!("{label}: non-finite value at row {}, column {}", line + 1, col + 1)))
                }
                None => {
                    return Err(CliError::Input(format!(
                        "{label}: non-numeric cell {:?} at row {}, column {}",
                        &record[col],
                        line + 1,
                        col + 1
                    )))
                }
            }
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::Input(format!(
                    "{label}: row {} has {} columns, expected {}",
                    line + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{label}: no data rows")));
    }
    let (n, p) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
}

/// Reads a single-column table.
pub fn read_vector(path: &Path) -> Result<DVector<f64>, CliError> {
    let m = read_matrix(path)?;
    if m.ncols() != 1 {
        return Err(CliError::Input(format!("{}: expected one column, found {}", path.display(), m.ncols())));
    }
    Ok(m.column(0).clone_owned())
}

/// Parses `"1,3,5"` as 1-based indices into 0-based ones.
pub fn parse_indices(s: &str, p: usize) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let i: usize = t.trim().parse().map_err(|_| CliError::Input(format!("bad index {t:?}")))?;
            if i == 0 || i > p {
                return Err(CliError::Input(format!("index {i} outside 1..={p}")));
            }
            Ok(i - 1)
        })
        .collect()
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            match t {
                "+" => Ok(1.0),
                "-" => Ok(-1.0),
                _ => t.parse::<f64>().map_err(|_| CliError::Input(format!("bad number {t:?}"))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_detected() {
        let m = read_matrix_from("a,b\n1,2\n3,4\n".as_bytes(), "t").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let m = read_matrix_from("1,2\n3,4\n".as_bytes(), "t").unwrap();
        assert_eq!(m.nrows(), 2);
        let m = read_matrix_from("1.5e-3, -2\n".as_bytes(), "t").unwrap();
        assert_eq!(m[(0, 0)], 1.5e-3);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(read_matrix_from("1,2\n3,x\n".as_bytes(), "t").is_err());
        assert!(read_matrix_from("1,2\n3\n".as_bytes(), "t").is_err());
        assert!(read_matrix_from("1,NaN\n".as_bytes(), "t").is_err());
        assert!(read_matrix_from("1,inf\n".as_bytes(), "t").is_err());
        assert!(read_matrix_from("a,b\n".as_bytes(), "t").is_err());
        assert!(read_matrix_from("1,\n".as_bytes(), "t").is_err());
    }

    #[test]
    fn index_lists() {
        assert_eq!(parse_indices("1, 3,5", 5).unwrap(), vec![0, 2, 4]);
        assert!(parse_indices("0", 5).is_err());
        assert!(parse_indices("6", 5).is_err());
        assert_eq!(parse_reals("+,-,0.5").unwrap(), vec![1.0, -1.0, 0.5]);
    }
}
