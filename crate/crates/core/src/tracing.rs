//! Trek enumeration (Wright's tracing rules) and model-implied correlations.
//!
//! A trek between two variables walks zero or more steps against arrows,
//! then zero or more steps along arrows, never visiting a variable twice.
//! Under a standardized recursive model with mutually uncorrelated exogenous
//! variables, the implied correlation of a pair is the sum over all its
//! treks of the product of traversed coefficients. [`implied_matrix`]
//! computes the same quantity by covariance algebra and serves as the
//! cross-check.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{invert, SquareMatrix};
use crate::pathspec::{topological_order, PathModel};

/// Enumeration is exponential in the worst case.
pub const MAX_TRACE_VARIABLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Step {
    /// Against an arrow, from child to parent.
    Backward,
    /// Along an arrow, from parent to child.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrekKind {
    Direct,
    Indirect,
    Spurious,
}

impl TrekKind {
    pub fn code(self) -> &'static str {
        match self {
            TrekKind::Direct => "D",
            TrekKind::Indirect => "I",
            TrekKind::Spurious => "S",
        }
    }

    fn classify(steps: &[Step]) -> Self {
        if steps.contains(&Step::Backward) {
            TrekKind::Spurious
        } else if steps.len() == 1 {
            TrekKind::Direct
        } else {
            TrekKind::Indirect
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trek {
    pub nodes: Vec<usize>,
    pub steps: Vec<Step>,
    pub product: f64,
    pub kind: TrekKind,
}

impl Trek {
    /// `X2 <- X1 -> X3` style rendering.
    pub fn describe(&self, m: &PathModel) -> String {
        let mut s = m.name(self.nodes[0]).to_owned();
        for (step, &node) in self.steps.iter().zip(&self.nodes[1..]) {
            s.push_str(match step {
                Step::Backward => " <- ",
                Step::Forward => " -> ",
            });
            s.push_str(m.name(node));
        }
        s
    }
}

/// Node sequences and step directions of every trek from `start` to `end`,
/// in lexicographic order of node sequence.
pub fn trek_shapes(m: &PathModel, start: usize, end: usize) -> Vec<(Vec<usize>, Vec<Step>)> {
    struct Walk<'a> {
        m: &'a PathModel,
        end: usize,
        visited: Vec<bool>,
        nodes: Vec<usize>,
        steps: Vec<Step>,
        out: Vec<(Vec<usize>, Vec<Step>)>,
    }
    impl Walk<'_> {
        fn go(&mut self, at: usize, may_go_back: bool) {
            if at == self.end {
                self.out.push((self.nodes.clone(), self.steps.clone()));
                return;
            }
            let mut moves: Vec<(usize, Step)> = self
                .m
                .children(at)
                .into_iter()
                .map(|c| (c, Step::Forward))
                .collect();
            if may_go_back {
                moves.extend(self.m.parents(at).into_iter().map(|p| (p, Step::Backward)));
            }
            moves.sort_by_key(|&(n, _)| n);
            for (next, step) in moves {
                if self.visited[next] {
                    continue;
                }
                self.visited[next] = true;
                self.nodes.push(next);
                self.steps.push(step);
                self.go(next, may_go_back && step == Step::Backward);
                self.steps.pop();
                self.nodes.pop();
                self.visited[next] = false;
            }
        }
    }
    let mut walk = Walk {
        m,
        end,
        visited: vec![false; m.k()],
        nodes: vec![start],
        steps: Vec::new(),
        out: Vec::new(),
    };
    walk.visited[start] = true;
    walk.go(start, true);
    walk.out
}

fn check_size(m: &PathModel) -> Result<()> {
    if m.k() > MAX_TRACE_VARIABLES {
        return Err(Error::TooManyVariables(m.k()));
    }
    Ok(())
}

fn treks_from_earlier(m: &PathModel, ranks: &[usize], i: usize, j: usize) -> Result<Vec<Trek>> {
    let (start, end) = if ranks[i] <= ranks[j] { (i, j) } else { (j, i) };
    trek_shapes(m, start, end)
        .into_iter()
        .map(|(nodes, steps)| {
            let mut product = 1.0;
            for (w, step) in nodes.windows(2).zip(&steps) {
                let (from, to) = match step {
                    Step::Forward => (w[0], w[1]),
                    Step::Backward => (w[1], w[0]),
                };
                let arrow = m.arrow(from, to).expect("trek steps follow arrows");
                product *= arrow.coefficient.ok_or_else(|| m.missing(arrow))?;
            }
            let kind = TrekKind::classify(&steps);
            Ok(Trek {
                nodes,
                steps,
                product,
                kind,
            })
        })
        .collect()
}

/// All treks between `i` and `j`, oriented from whichever comes first in
/// causal order.
pub fn enumerate_treks(m: &PathModel, i: usize, j: usize) -> Result<Vec<Trek>> {
    if i == j || i >= m.k() || j >= m.k() {
        return Err(Error::InvalidArgument(format!(
            "invalid variable pair ({i}, {j})"
        )));
    }
    check_size(m)?;
    m.require_coefficients()?;
    treks_from_earlier(m, &topological_order(m).ranks(), i, j)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairTreks {
    pub a: usize,
    pub b: usize,
    pub treks: Vec<Trek>,
}

/// Model-implied correlations, optionally with the trek list behind each cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproducedMatrix {
    pub variables: Vec<String>,
    pub values: SquareMatrix,
    /// Upper-triangle pairs in declaration order; `None` when the matrix
    /// came from covariance algebra rather than tracing.
    pub treks: Option<Vec<PairTreks>>,
}

impl ReproducedMatrix {
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.variables.iter().position(|v| v == a)?;
        let j = self.variables.iter().position(|v| v == b)?;
        Some(self.values[(i, j)])
    }

    pub fn treks_for(&self, i: usize, j: usize) -> Option<&[Trek]> {
        let (a, b) = (i.min(j), i.max(j));
        self.treks
            .as_ref()?
            .iter()
            .find(|p| p.a == a && p.b == b)
            .map(|p| p.treks.as_slice())
    }
}

/// Complete trek sums for every pair of variables.
pub fn reproduced_matrix(m: &PathModel) -> Result<ReproducedMatrix> {
    check_size(m)?;
    m.require_coefficients()?;
    let k = m.k();
    let ranks = topological_order(m).ranks();
    let mut values = SquareMatrix::identity(k);
    let mut pairs = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let treks = treks_from_earlier(m, &ranks, a, b)?;
            let sum: f64 = treks.iter().map(|t| t.product).sum();
            values[(a, b)] = sum;
            values[(b, a)] = sum;
            pairs.push(PairTreks { a, b, treks });
        }
    }
    Ok(ReproducedMatrix {
        variables: m.names(),
        values,
        treks: Some(pairs),
    })
}

/// One row per trek: pair, node sequence, D/I/S code, coefficient product.
pub fn write_treks_csv<W: Write>(
    m: &PathModel,
    reproduced: &ReproducedMatrix,
    writer: W,
) -> Result<()> {
    let pairs = reproduced
        .treks
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("reproduced matrix carries no trek lists".into()))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["pair", "sequence", "classification", "product"])
        .map_err(err)?;
    for pair in pairs {
        let label = format!("{}-{}", m.name(pair.a), m.name(pair.b));
        for t in &pair.treks {
            w.write_record([
                label.as_str(),
                &t.describe(m),
                t.kind.code(),
                &t.product.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Covariance structure implied by a coefficient-annotated model with unit
/// variances and mutually uncorrelated exogenous variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpliedMoments {
    pub sigma: SquareMatrix,
    /// ψ per variable; 1 for exogenous variables.
    pub residual_variances: Vec<f64>,
}

/// Direct-effect matrix with `B[(to, from)] = β`.
pub fn coefficient_matrix(m: &PathModel) -> Result<SquareMatrix> {
    let mut b = SquareMatrix::zeros(m.k());
    for a in m.arrows() {
        b[(a.to, a.from)] = a.coefficient.ok_or_else(|| m.missing(a))?;
    }
    Ok(b)
}

pub fn implied_moments(m: &PathModel) -> Result<ImpliedMoments> {
    let k = m.k();
    let b = coefficient_matrix(m)?;

    // ψ_y = 1 − βᵀ Σ_PP β, filling Σ in causal order so each parent block
    // is known before it is needed.
    let mut sigma = SquareMatrix::zeros(k);
    let mut psi = vec![1.0; k];
    let mut done: Vec<usize> = Vec::with_capacity(k);
    for &y in topological_order(m).as_slice() {
        let parents = m.parents(y);
        for &x in &done {
            let cov: f64 = parents.iter().map(|&p| b[(y, p)] * sigma[(p, x)]).sum();
            sigma[(y, x)] = cov;
            sigma[(x, y)] = cov;
        }
        let explained: f64 = parents
            .iter()
            .flat_map(|&p| parents.iter().map(move |&q| (p, q)))
            .map(|(p, q)| b[(y, p)] * b[(y, q)] * sigma[(p, q)])
            .sum();
        if !parents.is_empty() {
            psi[y] = 1.0 - explained;
            if psi[y] <= 0.0 {
                return Err(Error::NonPositiveResidualVariance {
                    variable: m.name(y).to_owned(),
                    value: psi[y],
                });
            }
        }
        sigma[(y, y)] = 1.0;
        done.push(y);
    }

    // Σ = (I − B)⁻¹ Ψ (I − B)⁻ᵀ
    let mut i_minus_b = SquareMatrix::identity(k);
    for r in 0..k {
        for c in 0..k {
            i_minus_b[(r, c)] -= b[(r, c)];
        }
    }
    let a = invert(&i_minus_b)?;
    let mut psi_diag = SquareMatrix::zeros(k);
    for (i, &v) in psi.iter().enumerate() {
        psi_diag[(i, i)] = v;
    }
    let sigma = a.mul(&psi_diag).mul(&a.transpose());
    Ok(ImpliedMoments {
        sigma,
        residual_variances: psi,
    })
}

/// Implied correlation matrix by covariance algebra.
pub fn implied_matrix(m: &PathModel) -> Result<ReproducedMatrix> {
    let moments = implied_moments(m)?;
    let k = m.k();
    let s = &moments.sigma;
    let mut values = SquareMatrix::identity(k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                values[(i, j)] = s[(i, j)] / (s[(i, i)] * s[(j, j)]).sqrt();
            }
        }
    }
    Ok(ReproducedMatrix {
        variables: m.names(),
        values,
        treks: None,
    })
}
