//! Observed Pearson correlations, their significance, and Cohen strength labels.

use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::data::{mean, Dataset, ZERO_VARIANCE_SD};
use crate::error::{Error, Result};
use crate::numeric::{t_sf_two_sided, SquareMatrix};

const ASYMMETRY_LIMIT: f64 = 1e-6;
const DIAGONAL_TOLERANCE: f64 = 1e-9;
const PSD_TOLERANCE: f64 = 1e-8;

/// Symmetric unit-diagonal correlation matrix with per-cell p-values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    variables: Vec<String>,
    r: SquareMatrix,
    p: SquareMatrix,
    n: usize,
}

impl CorrelationMatrix {
    /// Builds a matrix from raw entries; symmetry is enforced by averaging.
    pub fn from_entries(variables: Vec<String>, rows: Vec<Vec<f64>>, n: usize) -> Result<Self> {
        let k = variables.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::NotSquare(format!("expected {k}×{k} entries")));
        }
        if n < 3 {
            return Err(Error::TooFewRows(n));
        }
        let mut r = SquareMatrix::from_rows(&rows)?;
        for i in 0..k {
            if (r[(i, i)] - 1.0).abs() > DIAGONAL_TOLERANCE {
                return Err(Error::DiagonalNotOne {
                    name: variables[i].clone(),
                    value: r[(i, i)],
                });
            }
            r[(i, i)] = 1.0;
            for j in i + 1..k {
                let diff = (r[(i, j)] - r[(j, i)]).abs();
                if diff > ASYMMETRY_LIMIT {
                    return Err(Error::AsymmetryTooLarge {
                        row: variables[i].clone(),
                        col: variables[j].clone(),
                        difference: diff,
                    });
                }
                let avg = 0.5 * (r[(i, j)] + r[(j, i)]);
                if avg.abs() > 1.0 {
                    return Err(Error::OutOfRange(avg));
                }
                r[(i, j)] = avg;
                r[(j, i)] = avg;
            }
        }
        if !is_positive_semidefinite(&r) {
            return Err(Error::NotPositiveSemidefinite);
        }
        let p = p_value_matrix(&r, n);
        Ok(Self { variables, r, p, n })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.variables.len()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.r
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == name)
    }

    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r[(i, j)]
    }

    /// Two-sided p-value; the diagonal holds the sentinel 1.
    pub fn p(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        let i = self
            .index_of(a)
            .ok_or_else(|| Error::VariableMissing(a.into()))?;
        let j = self
            .index_of(b)
            .ok_or_else(|| Error::VariableMissing(b.into()))?;
        Ok(self.r[(i, j)])
    }

    /// Restricts the matrix to `names`, in that order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .ok_or_else(|| Error::VariableMissing(n.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            variables: names.to_vec(),
            r: self.r.submatrix(&idx)?,
            p: self.p.submatrix(&idx)?,
            n: self.n,
        })
    }
}

fn pearson_p(r: f64, n: usize) -> f64 {
    let df = n - 2;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * ((df as f64) / (1.0 - r * r)).sqrt();
    t_sf_two_sided(t, df)
}

fn p_value_matrix(r: &SquareMatrix, n: usize) -> SquareMatrix {
    let k = r.order();
    let mut p = SquareMatrix::identity(k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                p[(i, j)] = pearson_p(r[(i, j)], n);
            }
        }
    }
    p
}

// Cholesky of R + tol·I; succeeds iff the smallest eigenvalue exceeds −tol.
fn is_positive_semidefinite(r: &SquareMatrix) -> bool {
    let k = r.order();
    let mut l = SquareMatrix::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let mut s = r[(i, j)] + if i == j { PSD_TOLERANCE } else { 0.0 };
            for m in 0..j {
                s -= l[(i, m)] * l[(j, m)];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    true
}

/// Sample Pearson correlations of every column pair.
pub fn pearson_matrix(d: &Dataset) -> Result<CorrelationMatrix> {
    let k = d.k();
    if k < 2 {
        return Err(Error::InvalidArgument("need at least two variables".into()));
    }
    let n = d.n();
    let centered: Vec<Vec<f64>> = d
        .columns()
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    for (name, (norm, col)) in d.variables().iter().zip(norms.iter().zip(d.columns())) {
        if norm / ((col.len() as f64 - 1.0).sqrt()) < ZERO_VARIANCE_SD {
            return Err(Error::ZeroVariance(name.clone()));
        }
    }
    let mut r = SquareMatrix::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let dot: f64 = centered[i]
                .iter()
                .zip(&centered[j])
                .map(|(a, b)| a * b)
                .sum();
            let v = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let p = p_value_matrix(&r, n);
    Ok(CorrelationMatrix {
        variables: d.variables().to_vec(),
        r,
        p,
        n,
    })
}

pub fn load_correlation_csv(path: impl AsRef<Path>, n: usize) -> Result<CorrelationMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_correlation_csv(file, n)
}

/// Reads a labeled square matrix: a header of names (optionally preceded by
/// a corner cell), then one row per variable whose first cell is its name.
pub fn read_correlation_csv<R: Read>(reader: R, n: usize) -> Result<CorrelationMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }
    let Some((header, body)) = records.split_first() else {
        return Err(Error::Parse("correlation file is empty".into()));
    };
    let k = body.len();
    let names: Vec<String> = if header.len() == k + 1 {
        header[1..].to_vec()
    } else if header.len() == k {
        header.clone()
    } else {
        return Err(Error::NotSquare(format!(
            "header names {} variables but {k} rows follow",
            header.len()
        )));
    };

    let mut rows = vec![Vec::new(); k];
    for (line, rec) in body.iter().enumerate() {
        if rec.len() != k + 1 {
            return Err(Error::NotSquare(format!(
                "row {} has {} numeric cells, expected {k}",
                line + 2,
                rec.len().saturating_sub(1)
            )));
        }
        let idx = names
            .iter()
            .position(|n| *n == rec[0])
            .ok_or_else(|| Error::UnknownVariable(rec[0].clone()))?;
        if !rows[idx].is_empty() {
            return Err(Error::DuplicateVariable(rec[0].clone()));
        }
        rows[idx] = rec[1..]
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row '{}': cannot parse '{c}'", rec[0])))
            })
            .collect::<Result<Vec<_>>>()?;
    }
    let mut seen = std::collections::HashSet::new();
    for name in &names {
        if !seen.insert(name) {
            return Err(Error::DuplicateVariable(name.clone()));
        }
    }
    CorrelationMatrix::from_entries(names, rows, n)
}

/// Cohen's guideline buckets for |r|.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrengthLabel {
    Negligible,
    Small,
    Medium,
    Large,
}

impl std::fmt::Display for StrengthLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrengthLabel::Negligible => "negligible",
            StrengthLabel::Small => "small",
            StrengthLabel::Medium => "medium",
            StrengthLabel::Large => "large",
        })
    }
}

pub fn classify_strength(r: f64) -> Result<StrengthLabel> {
    let a = r.abs();
    if a.is_nan() || a > 1.0 {
        return Err(Error::OutOfRange(r));
    }
    Ok(if a < 0.1 {
        StrengthLabel::Negligible
    } else if a < 0.3 {
        StrengthLabel::Small
    } else if a < 0.5 {
        StrengthLabel::Medium
    } else {
        StrengthLabel::Large
    })
}

/// Renders a p-value the way statistical tables do.
pub fn format_p(p: f64) -> String {
    if p < 5e-4 {
        "<.001".to_owned()
    } else {
        format!("{p:.3}")
    }
}

/// `**` below .01, `*` below .05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}
