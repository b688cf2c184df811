//! Numeric CSV ingestion and column standardisation.
//!
//! Files are comma separated, UTF-8, with a mandatory header row. An
//! identifier column is optional: it is either named explicitly or detected
//! when the first header cell is `id`. Lines starting with `#` are skipped.

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("input has no header or no data rows")]
    Empty,

    #[error("input has no numeric columns")]
    NoColumns,

    #[error("id column {0:?} not found in header")]
    MissingIdColumn(String),

    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}, column {column:?}: cannot parse {value:?} as a number")]
    NotNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column {column:?}: value is not finite")]
    NonFinite { row: usize, column: String },
}

/// A numeric table with row identifiers and column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Array2<f64>,
}

/// Parse a dataset. Row numbers in errors are 1-based data rows (the header
/// is not counted).
pub fn read_csv<R: Read>(reader: R, id_column: Option<&str>) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DataError::Empty);
    }
    let id_idx = match id_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingIdColumn(name.to_owned()))?,
        ),
        None => header
            .first()
            .filter(|h| h.eq_ignore_ascii_case("id"))
            .map(|_| 0),
    };
    let value_cols: Vec<usize> = (0..header.len()).filter(|&c| Some(c) != id_idx).collect();
    if value_cols.is_empty() {
        return Err(DataError::NoColumns);
    }

    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(DataError::Ragged {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        ids.push(match id_idx {
            Some(c) => record[c].to_owned(),
            None => row.to_string(),
        });
        for &c in &value_cols {
            let cell = &record[c];
            let v: f64 = cell.parse().map_err(|_| DataError::NotNumeric {
                row,
                column: header[c].clone(),
                value: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: header[c].clone(),
                });
            }
            values.push(v);
        }
    }
    if ids.is_empty() {
        return Err(DataError::Empty);
    }
    let columns: Vec<String> = value_cols.iter().map(|&c| header[c].clone()).collect();
    let values = Array2::from_shape_vec((ids.len(), columns.len()), values)
        .expect("row lengths checked above");
    Ok(Dataset {
        ids,
        columns,
        values,
    })
}

/// Write a dataset with a leading `id` column.
pub fn write_csv<W: Write>(w: W, dataset: &Dataset) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_owned()];
    header.extend(dataset.columns.iter().cloned());
    wtr.write_record(&header)?;
    for (id, row) in dataset.ids.iter().zip(dataset.values.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| v.to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Centre every column and scale it to unit sample variance (`n - 1`
/// denominator). Constant columns are only centred.
pub fn standardize(values: &mut Array2<f64>) {
    let n = values.nrows();
    for mut col in values.columns_mut() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
        if n < 2 {
            continue;
        }
        let var = col.iter().map(|v| v * v).sum::<f64>() / (n - 1) as f64;
        if var > 0.0 {
            let sd = var.sqrt();
            col.mapv_inplace(|v| v / sd);
        }
    }
}
