use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::schema::Schema;
use crate::error::{Error, Result};

/// Sampling period of the plant historian export, in seconds.
pub const DEFAULT_SAMPLE_PERIOD: f64 = 10.0;

/// Uniformly sampled multivariate record, stored column-major in schema order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesTable {
    schema: Schema,
    columns: Vec<Vec<f64>>,
    sample_period: f64,
}

impl TimeSeriesTable {
    pub fn new(schema: Schema, columns: Vec<Vec<f64>>, sample_period: f64) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Dimension {
                expected: schema.len(),
                got: columns.len(),
            });
        }
        let rows = columns.first().map_or(0, Vec::len);
        if let Some(c) = columns.iter().find(|c| c.len() != rows) {
            return Err(Error::Dimension {
                expected: rows,
                got: c.len(),
            });
        }
        if !(sample_period > 0.0) {
            return Err(Error::invalid("sample period must be positive"));
        }
        Ok(Self {
            schema,
            columns,
            sample_period,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, label: &str) -> Result<&[f64]> {
        self.schema
            .index_of(label)
            .map(|i| self.columns[i].as_slice())
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn target(&self) -> &[f64] {
        let i = self.schema.index_of(self.schema.target()).expect("schema has target");
        &self.columns[i]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    /// Same schema, new column data.
    pub fn with_columns(&self, columns: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.schema.clone(), columns, self.sample_period)
    }

    pub fn with_column(&self, label: &str, values: Vec<f64>) -> Result<Self> {
        let i = self
            .schema
            .index_of(label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        let mut columns = self.columns.clone();
        columns[i] = values;
        self.with_columns(columns)
    }

    /// Rows `[start, end)`.
    pub fn slice_rows(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.n_rows(), "row slice out of range");
        Self {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
            sample_period: self.sample_period,
        }
    }

    /// Appends the rows of `other`, which must share the schema.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.schema != other.schema {
            return Err(Error::Schema("cannot concatenate tables with different schemas".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        self.with_columns(columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.labels())?;
        for t in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| format_value(c[t])))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest representation that parses back to the same bits.
pub(crate) fn format_value(v: f64) -> String {
    format!("{v:?}")
}

/// Reads a CSV whose header carries the schema labels in any order. A leading
/// column that is not a schema label is taken as a timestamp and ignored.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<TimeSeriesTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_table(file, schema)
}

pub fn read_table<R: Read>(reader: R, schema: &Schema) -> Result<TimeSeriesTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let positions = header_positions(&header, schema)?;

    let mut columns = vec![Vec::new(); schema.len()];
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for (col, &pos) in positions.iter().enumerate() {
            let cell = record.get(pos).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[pos].clone(),
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[pos].clone(),
                    value: cell.to_string(),
                });
            }
            columns[col].push(v);
        }
    }
    if columns.first().is_none_or(Vec::is_empty) {
        return Err(Error::NoRows);
    }
    TimeSeriesTable::new(schema.clone(), columns, DEFAULT_SAMPLE_PERIOD)
}

/// Raw header labels of a CSV file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

fn header_positions(header: &[String], schema: &Schema) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = header
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();
    let positions = schema
        .labels()
        .map(|l| index.get(l).copied().ok_or_else(|| Error::MissingColumn(l.to_string())))
        .collect::<Result<Vec<_>>>()?;
    for (i, h) in header.iter().enumerate() {
        if schema.index_of(h).is_none() && i != 0 {
            return Err(Error::Schema(format!("unexpected column {h:?}")));
        }
    }
    Ok(positions)
}

/// Chronological split: the first `n_train` rows train, the rest test.
pub fn split(table: &TimeSeriesTable, n_train: usize) -> Result<(TimeSeriesTable, TimeSeriesTable)> {
    let n = table.n_rows();
    if n_train == 0 || n_train >= n {
        return Err(Error::invalid(format!(
            "n_train must satisfy 0 < n_train < {n}, got {n_train}"
        )));
    }
    Ok((table.slice_rows(0, n_train), table.slice_rows(n_train, n)))
}
