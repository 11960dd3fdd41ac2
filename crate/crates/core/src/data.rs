//! Rectangular numeric datasets: CSV ingestion, standardization, summaries.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Columns whose sample sd falls below this are treated as constant.
pub const ZERO_VARIANCE_SD: f64 = 1e-12;

/// Named numeric columns with row-aligned observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    variables: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(variables: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        check_names(&variables)?;
        if columns.len() != variables.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                variables.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n) {
            return Err(Error::DimensionMismatch("columns differ in length".into()));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "dataset entries must be finite".into(),
            ));
        }
        if n < 3 {
            return Err(Error::TooFewRows(n));
        }
        Ok(Self { variables, columns })
    }

    pub fn from_rows(variables: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let k = variables.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch(format!(
                "every row must have {k} entries"
            )));
        }
        let columns = (0..k)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::new(variables, columns)
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n(&self) -> usize {
        self.columns[0].len()
    }

    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.index_of(name).map(|i| self.columns[i].as_slice())
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Keeps only the named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let columns = names
            .iter()
            .map(|name| {
                self.column(name)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::VariableMissing(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(names.to_vec(), columns)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(&self.variables).map_err(io)?;
        for i in 0..self.n() {
            w.write_record(self.columns.iter().map(|c| c[i].to_string()))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn check_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for name in names {
        if name.trim().is_empty() {
            return Err(Error::Parse("empty variable name in header".into()));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::Parse(format!(
                "duplicate variable name '{name}' in header"
            )));
        }
    }
    if names.is_empty() {
        return Err(Error::Parse("header has no columns".into()));
    }
    Ok(())
}

/// Result of reading a dataset CSV.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    /// Rows removed by listwise deletion.
    pub dropped_rows: usize,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<LoadedDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

/// Reads a headed CSV; rows with a missing or unparseable cell are dropped.
pub fn read_csv<R: Read>(reader: R) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(format!("malformed header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    check_names(&header)?;

    let k = header.len();
    let mut columns = vec![Vec::new(); k];
    let mut dropped = 0;
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        let parsed: Option<Vec<f64>> = if record.len() == k {
            record
                .iter()
                .map(|cell| cell.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        } else {
            None
        };
        match parsed {
            Some(values) => {
                for (col, v) in columns.iter_mut().zip(values) {
                    col.push(v);
                }
            }
            None => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("listwise deletion removed {dropped} row(s) with missing or unparseable cells");
    }
    let n = columns[0].len();
    if n < 3 {
        return Err(Error::TooFewRows(n));
    }
    Ok(LoadedDataset {
        dataset: Dataset::new(header, columns)?,
        dropped_rows: dropped,
    })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

/// Rescales every column to mean 0 and sample sd 1.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    let columns = d
        .variables
        .iter()
        .zip(&d.columns)
        .map(|(name, col)| {
            let m = mean(col);
            let sd = sample_sd(col);
            if sd < ZERO_VARIANCE_SD {
                return Err(Error::ZeroVariance(name.clone()));
            }
            Ok(col.iter().map(|v| (v - m) / sd).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(d.variables.clone(), columns)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub zero_variance: bool,
}

pub fn summarize(d: &Dataset) -> Vec<VariableSummary> {
    d.variables
        .iter()
        .zip(&d.columns)
        .map(|(name, col)| {
            let sd = sample_sd(col);
            VariableSummary {
                name: name.clone(),
                mean: mean(col),
                sd,
                min: col.iter().copied().fold(f64::INFINITY, f64::min),
                max: col.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                zero_variance: sd < ZERO_VARIANCE_SD,
            }
        })
        .collect()
}
