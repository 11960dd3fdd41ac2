//! Standardized path coefficients, one least-squares equation per
//! endogenous variable, computed from the correlation matrix alone.

use serde::Serialize;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::numeric::{invert, solve_linear, t_sf_two_sided};
use crate::pathspec::{topological_order, PathModel};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Inference {
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub significant: bool,
}

/// One structural equation `target = Σ β·parent + e`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equation {
    pub target: usize,
    pub parents: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    /// √(1 − R²)
    pub disturbance: f64,
    /// Diagonal of the inverse parent correlation block.
    pub inverse_diagonal: Vec<f64>,
    pub inference: Option<Vec<Inference>>,
}

impl Equation {
    pub fn degrees_of_freedom(&self, n: usize) -> Option<usize> {
        n.checked_sub(self.parents.len() + 1).filter(|&df| df >= 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedModel {
    pub model: PathModel,
    pub n: usize,
    /// Equations in causal order.
    pub equations: Vec<Equation>,
    pub alpha: Option<f64>,
}

impl FittedModel {
    pub fn equation(&self, target: usize) -> Option<&Equation> {
        self.equations.iter().find(|e| e.target == target)
    }

    pub fn equation_by_name(&self, name: &str) -> Option<&Equation> {
        self.model.index_of(name).and_then(|i| self.equation(i))
    }

    /// Estimated coefficient of `from -> to`, if that arrow exists.
    pub fn beta(&self, from: usize, to: usize) -> Option<f64> {
        let eq = self.equation(to)?;
        eq.parents
            .iter()
            .position(|&p| p == from)
            .map(|j| eq.coefficients[j])
    }

    pub fn inference(&self, from: usize, to: usize) -> Option<Inference> {
        let eq = self.equation(to)?;
        let j = eq.parents.iter().position(|&p| p == from)?;
        eq.inference.as_ref().map(|inf| inf[j])
    }

    /// The model with every arrow annotated by its estimate.
    pub fn annotated(&self) -> PathModel {
        self.model.with_coefficients(|from, to| self.beta(from, to))
    }

    pub fn r_squared(&self, target: usize) -> Option<f64> {
        self.equation(target).map(|e| e.r_squared)
    }
}

/// Maps each model variable to its row in `corr`.
pub(crate) fn corr_indices(corr: &CorrelationMatrix, m: &PathModel) -> Result<Vec<usize>> {
    m.variables()
        .iter()
        .map(|v| {
            corr.index_of(&v.name)
                .ok_or_else(|| Error::VariableMissing(v.name.clone()))
        })
        .collect()
}

/// Solves `R_PP β = r_Py` for every endogenous variable.
pub fn fit_standardized(corr: &CorrelationMatrix, m: &PathModel) -> Result<FittedModel> {
    let idx = corr_indices(corr, m)?;
    let r = corr.matrix();
    let order = topological_order(m);
    let mut equations = Vec::new();
    for &y in order.as_slice() {
        let parents = m.parents(y);
        if parents.is_empty() {
            continue;
        }
        let rows: Vec<usize> = parents.iter().map(|&p| idx[p]).collect();
        let block = r.submatrix(&rows)?;
        let rhs: Vec<f64> = rows.iter().map(|&p| r[(p, idx[y])]).collect();
        let singular = |e: Error| match e {
            Error::SingularMatrix(_) => {
                Error::SingularMatrix(format!("equation for '{}'", m.name(y)))
            }
            other => other,
        };
        let coefficients = solve_linear(&block, &rhs).map_err(singular)?;
        let inverse = invert(&block).map_err(singular)?;
        let r_squared: f64 = coefficients.iter().zip(&rhs).map(|(b, c)| b * c).sum();
        equations.push(Equation {
            target: y,
            inverse_diagonal: (0..parents.len()).map(|j| inverse[(j, j)]).collect(),
            parents,
            coefficients,
            r_squared,
            disturbance: (1.0 - r_squared).max(0.0).sqrt(),
            inference: None,
        });
    }
    if equations.is_empty() {
        return Err(Error::NoEndogenous);
    }
    Ok(FittedModel {
        model: m.without_coefficients(),
        n: corr.n(),
        equations,
        alpha: None,
    })
}

/// Standard errors, t statistics and two-sided p-values for every β.
pub fn coefficient_inference(fit: &FittedModel, alpha: f64) -> Result<FittedModel> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let mut out = fit.clone();
    for eq in &mut out.equations {
        let df = eq
            .degrees_of_freedom(fit.n)
            .ok_or_else(|| Error::DegreesOfFreedomExhausted {
                equation: fit.model.name(eq.target).to_owned(),
                n: fit.n,
                parents: eq.parents.len(),
            })?;
        let resid = (1.0 - eq.r_squared).max(0.0);
        eq.inference = Some(
            eq.coefficients
                .iter()
                .zip(&eq.inverse_diagonal)
                .map(|(&beta, &inv)| {
                    let se = (resid * inv / df as f64).sqrt();
                    let t = beta / se;
                    let p = if t.is_nan() {
                        1.0
                    } else {
                        t_sf_two_sided(t, df)
                    };
                    Inference {
                        se,
                        t,
                        p,
                        significant: p < alpha,
                    }
                })
                .collect(),
        );
    }
    out.alpha = Some(alpha);
    Ok(out)
}

/// `fit_standardized` followed by `coefficient_inference`.
pub fn fit_with_inference(
    corr: &CorrelationMatrix,
    m: &PathModel,
    alpha: f64,
) -> Result<FittedModel> {
    coefficient_inference(&fit_standardized(corr, m)?, alpha)
}
