//! Pre-analysis assumption checks: range restriction, multivariate outliers,
//! univariate normality, multicollinearity, and residual-plot data.

use std::io::Write;

use serde::Serialize;

use crate::correlation::{pearson_matrix, CorrelationMatrix};
use crate::data::{
    mean, sample_sd, standardize, summarize, Dataset, VariableSummary, ZERO_VARIANCE_SD,
};
use crate::error::{Error, Result};
use crate::estimation::{fit_standardized, FittedModel};
use crate::numeric::{chisq_sf, invert, kolmogorov_sf, normal_cdf, SquareMatrix};
use crate::pathspec::PathModel;

pub const DEFAULT_OUTLIER_CUTOFF: f64 = 0.001;
pub const VIF_WARN: f64 = 5.0;
pub const VIF_FLAG: f64 = 10.0;

pub const LILLIEFORS_CAVEAT: &str =
    "Kolmogorov-Smirnov p-values use mean and sd estimated from the same sample; \
     they are anti-conservative (Lilliefors effect) and understate non-normality.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutlierRow {
    /// Zero-based row in the (post-deletion) dataset.
    pub row: usize,
    pub d_squared: f64,
    pub p: f64,
    pub flagged: bool,
}

/// Squared Mahalanobis distances of raw columns, largest first.
pub fn mahalanobis_columns(columns: &[Vec<f64>], cutoff: f64) -> Result<Vec<OutlierRow>> {
    let k = columns.len();
    let n = columns.first().map_or(0, Vec::len);
    if k == 0 || n <= k {
        return Err(Error::InvalidArgument(format!(
            "need more rows than columns (n = {n}, k = {k})"
        )));
    }
    let z: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = mean(c);
            let sd = sample_sd(c);
            if sd < ZERO_VARIANCE_SD {
                return Err(Error::SingularCovariance);
            }
            Ok(c.iter().map(|v| (v - m) / sd).collect())
        })
        .collect::<Result<_>>()?;
    // Distances are scale-invariant, so work with the correlation matrix.
    let mut r = SquareMatrix::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let v = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum::<f64>() / (n as f64 - 1.0);
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    let inv = invert(&r).map_err(|_| Error::SingularCovariance)?;
    let mut rows: Vec<OutlierRow> = (0..n)
        .map(|row| {
            let x: Vec<f64> = z.iter().map(|c| c[row]).collect();
            let d_squared = inv
                .mul_vec(&x)
                .iter()
                .zip(&x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .max(0.0);
            let p = chisq_sf(d_squared, k);
            OutlierRow {
                row,
                d_squared,
                p,
                flagged: p < cutoff,
            }
        })
        .collect();
    rows.sort_by(|a, b| b.d_squared.total_cmp(&a.d_squared).then(a.row.cmp(&b.row)));
    Ok(rows)
}

pub fn mahalanobis(d: &Dataset, cutoff: f64) -> Result<Vec<OutlierRow>> {
    mahalanobis_columns(d.columns(), cutoff)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityTest {
    pub variable: String,
    pub statistic: f64,
    pub p: f64,
    pub non_normal: bool,
}

/// One-sample KS statistic against a normal with plug-in mean and sd.
pub fn ks_statistic(column: &[f64]) -> Result<f64> {
    if column.len() < 2 {
        return Err(Error::InvalidArgument(
            "KS statistic needs at least 2 observations".into(),
        ));
    }
    let m = mean(column);
    let sd = sample_sd(column);
    if sd < ZERO_VARIANCE_SD {
        return Err(Error::ZeroVariance("column".into()));
    }
    Ok(ks_against_fitted_normal(column, m, sd))
}

fn ks_against_fitted_normal(column: &[f64], m: f64, sd: f64) -> f64 {
    let mut sorted = column.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        // F̂(x⁻) counts values strictly below x; F̂(x) includes all ties.
        let x = sorted[i];
        let below = i as f64 / n;
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
        let at = i as f64 / n;
        let phi = normal_cdf((x - m) / sd);
        d = d.max((at - phi).abs()).max((below - phi).abs());
    }
    d
}

/// Returns (D, p, non-normal at `alpha`).
pub fn ks_normality(column: &[f64], alpha: f64) -> Result<(f64, f64, bool)> {
    let n = column.len();
    if n < 5 {
        return Err(Error::InvalidArgument(format!(
            "KS test needs at least 5 observations, got {n}"
        )));
    }
    let d = ks_statistic(column)?;
    let p = kolmogorov_sf((column.len() as f64).sqrt() * d);
    Ok((d, p, p < alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VifLevel {
    Ok,
    Warn,
    Flag,
}

impl VifLevel {
    pub fn of(vif: f64) -> Self {
        if vif >= VIF_FLAG {
            VifLevel::Flag
        } else if vif >= VIF_WARN {
            VifLevel::Warn
        } else {
            VifLevel::Ok
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VifEntry {
    /// Equation the block belongs to, if screened against a model.
    pub equation: Option<String>,
    pub predictor: String,
    pub vif: f64,
    pub level: VifLevel,
}

/// Diagonal of the inverse predictor correlation block.
pub fn vif(corr: &CorrelationMatrix, predictors: &[String]) -> Result<Vec<f64>> {
    let idx = predictors
        .iter()
        .map(|p| {
            corr.index_of(p)
                .ok_or_else(|| Error::VariableMissing(p.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let inv = invert(&corr.matrix().submatrix(&idx)?)?;
    Ok((0..idx.len()).map(|j| inv[(j, j)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub fitted: f64,
    pub std_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquationResiduals {
    pub equation: String,
    /// Sample sd of raw residuals on the standardized scale.
    pub residual_sd: f64,
    pub points: Vec<ResidualPoint>,
}

/// (fitted, standardized residual) pairs per endogenous equation.
pub fn residual_diagnostics(fitted: &FittedModel, d: &Dataset) -> Result<Vec<EquationResiduals>> {
    let m = &fitted.model;
    let data = standardize(&d.select(&m.names())?)?;
    let n = data.n();
    fitted
        .equations
        .iter()
        .map(|eq| {
            let y = &data.columns()[eq.target];
            let fitted_values: Vec<f64> = (0..n)
                .map(|row| {
                    eq.parents
                        .iter()
                        .zip(&eq.coefficients)
                        .map(|(&p, &b)| b * data.columns()[p][row])
                        .sum()
                })
                .collect();
            let residuals: Vec<f64> = y.iter().zip(&fitted_values).map(|(a, b)| a - b).collect();
            let sd = sample_sd(&residuals);
            let points = fitted_values
                .iter()
                .zip(&residuals)
                .map(|(&f, &r)| ResidualPoint {
                    fitted: f,
                    std_residual: if sd < ZERO_VARIANCE_SD { 0.0 } else { r / sd },
                })
                .collect();
            Ok(EquationResiduals {
                equation: m.name(eq.target).to_owned(),
                residual_sd: sd,
                points,
            })
        })
        .collect()
}

pub fn write_residuals_csv<W: Write>(residuals: &[EquationResiduals], writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["equation", "fitted", "std_residual"])
        .map_err(err)?;
    for eq in residuals {
        for p in &eq.points {
            w.write_record([
                eq.equation.clone(),
                p.fitted.to_string(),
                p.std_residual.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreeningOptions {
    pub alpha: f64,
    pub outlier_cutoff: f64,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            outlier_cutoff: DEFAULT_OUTLIER_CUTOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub n: usize,
    pub summaries: Vec<VariableSummary>,
    pub outliers: Vec<OutlierRow>,
    pub normality: Vec<NormalityTest>,
    pub vif: Vec<VifEntry>,
    pub residuals: Vec<EquationResiduals>,
    /// Assumption problems found in the data.
    pub warnings: Vec<String>,
    /// Method caveats; not counted as warnings.
    pub notes: Vec<String>,
}

impl ScreeningReport {
    pub fn flagged_outliers(&self) -> impl Iterator<Item = &OutlierRow> {
        self.outliers.iter().filter(|o| o.flagged)
    }
}

/// Runs the full battery. With a model, VIF is computed per equation and
/// residual points are produced; without one, all columns form one block.
pub fn screen(
    d: &Dataset,
    model: Option<&PathModel>,
    opts: ScreeningOptions,
) -> Result<ScreeningReport> {
    let data = match model {
        Some(m) => d.select(&m.names())?,
        None => d.clone(),
    };
    let summaries = summarize(&data);
    let mut warnings = Vec::new();
    let notes = vec![LILLIEFORS_CAVEAT.to_owned()];

    let degenerate: Vec<&str> = summaries
        .iter()
        .filter(|s| s.zero_variance)
        .map(|s| s.name.as_str())
        .collect();
    if !degenerate.is_empty() {
        return Err(Error::ZeroVariance(degenerate.join(", ")));
    }

    let outliers = mahalanobis(&data, opts.outlier_cutoff)?;
    for o in outliers.iter().filter(|o| o.flagged) {
        warnings.push(format!(
            "row {} is a multivariate outlier (D² = {:.3}, p = {:.2e})",
            o.row + 1,
            o.d_squared,
            o.p
        ));
    }

    let mut normality = Vec::new();
    if data.n() >= 5 {
        for (name, col) in data.variables().iter().zip(data.columns()) {
            let (statistic, p, non_normal) = ks_normality(col, opts.alpha)?;
            if non_normal {
                warnings.push(format!(
                    "{name} departs from normality (KS D = {statistic:.3}, p = {p:.3})"
                ));
            }
            normality.push(NormalityTest {
                variable: name.clone(),
                statistic,
                p,
                non_normal,
            });
        }
    } else {
        warnings.push("fewer than 5 observations; normality not tested".into());
    }

    let corr = pearson_matrix(&data)?;
    let blocks: Vec<(Option<String>, Vec<String>)> = match model {
        Some(m) => m
            .endogenous()
            .into_iter()
            .map(|y| {
                let parents = m
                    .parents(y)
                    .into_iter()
                    .map(|p| m.name(p).to_owned())
                    .collect();
                (Some(m.name(y).to_owned()), parents)
            })
            .filter(|(_, p): &(_, Vec<String>)| p.len() >= 2)
            .collect(),
        None => vec![(None, data.variables().to_vec())],
    };
    let mut vifs = Vec::new();
    for (equation, predictors) in blocks {
        let values = vif(&corr, &predictors)?;
        for (predictor, v) in predictors.into_iter().zip(values) {
            let level = VifLevel::of(v);
            if level != VifLevel::Ok {
                warnings.push(format!(
                    "{predictor}{} has VIF {v:.2} ({})",
                    equation
                        .as_deref()
                        .map(|e| format!(" (equation {e})"))
                        .unwrap_or_default(),
                    if level == VifLevel::Flag {
                        "severe multicollinearity"
                    } else {
                        "moderate multicollinearity"
                    }
                ));
            }
            vifs.push(VifEntry {
                equation: equation.clone(),
                predictor,
                vif: v,
                level,
            });
        }
    }

    let residuals = match model {
        Some(m) if !m.endogenous().is_empty() => {
            residual_diagnostics(&fit_standardized(&corr, m)?, &data)?
        }
        _ => Vec::new(),
    };

    Ok(ScreeningReport {
        n: data.n(),
        summaries,
        outliers,
        normality,
        vif: vifs,
        residuals,
        warnings,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathspec::parse_model;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_point_distances() {
        let rows = mahalanobis_columns(&[vec![0.0, 1.0]], 0.001).unwrap();
        assert_eq!(rows.len(), 2);
        for r in rows {
            assert!((r.d_squared - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicated_column_is_singular() {
        let c = vec![1.0, 3.0, 2.0, 5.0, 4.0];
        let d = Dataset::new(names(&["a", "b"]), vec![c.clone(), c]).unwrap();
        assert!(matches!(
            mahalanobis(&d, 0.001),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn sorted_descending_and_flagged_by_cutoff() {
        let mut a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.91).cos()).collect();
        a.push(25.0);
        b.push(-25.0);
        let rows = mahalanobis_columns(&[a, b], 0.001).unwrap();
        assert_eq!(rows[0].row, 30);
        assert!(rows[0].flagged);
        assert!(rows.windows(2).all(|w| w[0].d_squared >= w[1].d_squared));
        assert!(rows.iter().all(|r| r.flagged == (r.p < 0.001)));
    }

    #[test]
    fn ks_three_point_column() {
        // sample sd of (-1, 0, 1) is 1: D = max(1/3 − Φ(−1), Φ(1) − 2/3)
        let expect = 1.0 / 3.0 - normal_cdf(-1.0);
        let d = ks_statistic(&[-1.0, 0.0, 1.0]).unwrap();
        assert!((d - expect).abs() < 1e-12);
        assert!((d - 0.1747).abs() < 1e-3);
    }

    #[test]
    fn ks_requires_five_and_variance() {
        assert!(ks_normality(&[1.0, 2.0, 3.0], 0.05).is_err());
        assert!(matches!(
            ks_normality(&[2.0; 6], 0.05),
            Err(Error::ZeroVariance(_))
        ));
    }

    #[test]
    fn ks_shift_invariant() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7919) % 97) as f64 / 10.0).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 123.0).collect();
        let (d1, p1, _) = ks_normality(&x, 0.05).unwrap();
        let (d2, p2, _) = ks_normality(&shifted, 0.05).unwrap();
        assert!((d1 - d2).abs() < 1e-12);
        assert!((p1 - p2).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&d1));
    }

    #[test]
    fn ks_handles_ties() {
        let x = [1.0, 1.0, 1.0, 2.0, 3.0, 3.0];
        let d = ks_statistic(&x).unwrap();
        let m = mean(&x);
        let sd = sample_sd(&x);
        // evaluate only at the jump points
        let expect = [
            (1.0, 0.0, 0.5),
            (2.0, 0.5, 4.0 / 6.0),
            (3.0, 4.0 / 6.0, 1.0),
        ]
        .iter()
        .map(|&(v, lo, hi)| {
            let phi = normal_cdf((v - m) / sd);
            f64::max((phi - lo).abs(), (hi - phi).abs())
        })
        .fold(0.0, f64::max);
        assert!((d - expect).abs() < 1e-15);
    }

    #[test]
    fn vif_identity_and_collinear() {
        let c = CorrelationMatrix::from_entries(
            names(&["a", "b", "c"]),
            vec![
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.999],
                vec![0.0, 0.999, 1.0],
            ],
            100,
        )
        .unwrap();
        let v = vif(&c, &names(&["a", "b"])).unwrap();
        assert_eq!(v, vec![1.0, 1.0]);
        let v = vif(&c, &names(&["b", "c"])).unwrap();
        let expect = 1.0 / (1.0 - 0.999 * 0.999);
        assert!((v[0] - expect).abs() < 1e-6);
        assert!((v[0] - 500.0).abs() < 1.0);
        assert_eq!(VifLevel::of(v[0]), VifLevel::Flag);
        assert_eq!(VifLevel::of(6.0), VifLevel::Warn);
        assert_eq!(VifLevel::of(1.2), VifLevel::Ok);
        assert!(matches!(
            vif(&c, &names(&["a", "q"])),
            Err(Error::VariableMissing(_))
        ));
    }

    #[test]
    fn exact_linear_equation_has_zero_residuals() {
        let a = vec![1.0, 2.0, 4.0, 3.0, 7.0, 5.0];
        let b = vec![2.0, -1.0, 0.5, 3.0, 1.0, 0.0];
        let y: Vec<f64> = a.iter().zip(&b).map(|(x, z)| 2.0 * x - z).collect();
        let d = Dataset::new(names(&["a", "b", "y"]), vec![a, b, y]).unwrap();
        let m = parse_model("eq y <- a b").unwrap().model;
        let fit = fit_standardized(&pearson_matrix(&d).unwrap(), &m).unwrap();
        let res = residual_diagnostics(&fit, &d).unwrap();
        assert_eq!(res.len(), 1);
        assert!(res[0].points.iter().all(|p| p.std_residual == 0.0));
        assert!(res[0].residual_sd < 1e-12);
    }

    #[test]
    fn residuals_need_every_variable() {
        let d = Dataset::new(
            names(&["a", "y"]),
            vec![vec![1.0, 2.0, 4.0, 3.0], vec![0.5, 1.0, 1.5, 3.0]],
        )
        .unwrap();
        let m = parse_model("eq y <- a b").unwrap().model;
        let c = CorrelationMatrix::from_entries(
            names(&["a", "b", "y"]),
            vec![
                vec![1.0, 0.2, 0.3],
                vec![0.2, 1.0, 0.1],
                vec![0.3, 0.1, 1.0],
            ],
            50,
        )
        .unwrap();
        let fit = fit_standardized(&c, &m).unwrap();
        assert!(
            matches!(residual_diagnostics(&fit, &d), Err(Error::VariableMissing(v)) if v == "b")
        );
    }

    #[test]
    fn residual_csv_layout() {
        let res = vec![EquationResiduals {
            equation: "Y".into(),
            residual_sd: 1.0,
            points: vec![ResidualPoint {
                fitted: 0.5,
                std_residual: -1.25,
            }],
        }];
        let mut buf = Vec::new();
        write_residuals_csv(&res, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "equation,fitted,std_residual\nY,0.5,-1.25\n"
        );
    }
}
