//! Trajectory tables and their CSV form `time_s,<columns...>`.
//!
//! Values are written with the shortest representation that parses back
//! to the same `f64`, so a write/read round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::units::Seconds;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryTable {
    /// Column names after `time_s`.
    pub columns: Vec<String>,
    pub times: Vec<Seconds>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            times: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, t: Seconds, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.times.push(t);
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of one column; `time_s` is accepted too.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        if name == "time_s" {
            return Some(self.times.clone());
        }
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn write_to(&self, writer: impl Write, origin: &str) -> Result<()> {
        let err = |e: csv::Error| Error::Csv {
            path: origin.to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(std::iter::once("time_s").chain(self.columns.iter().map(String::as_str)))
            .map_err(err)?;
        let mut record = Vec::with_capacity(self.columns.len() + 1);
        for (t, row) in self.times.iter().zip(&self.rows) {
            record.clear();
            record.push(t.to_string());
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: origin.to_string(),
            source,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_to(std::io::BufWriter::new(file), &path.display().to_string())
    }

    pub fn read_from(reader: impl Read, origin: &str) -> Result<Self> {
        let err = |message: String| Error::Csv {
            path: origin.to_string(),
            message,
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        let mut names = headers.iter();
        if names.next() != Some("time_s") {
            return Err(err("first column must be `time_s`".into()));
        }
        let mut table = Self::new(names.map(str::to_string).collect());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(format!("row {}: {e}", line + 2)))?;
            let mut values = rec.iter().map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| err(format!("row {}: `{f}`: {e}", line + 2)))
            });
            let t = values.next().ok_or_else(|| err(format!("row {}: empty", line + 2)))??;
            let row = values.collect::<Result<Vec<f64>>>()?;
            table.push(t, row);
        }
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_from(file, &path.display().to_string())
    }
}
