//! Model fit against observed correlations, causal effect decomposition,
//! and the drop/add revision loop.

use std::collections::BTreeSet;
use std::io::Write;

use serde::Serialize;

use crate::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::estimation::{fit_with_inference, FittedModel};
use crate::numeric::{invert, SquareMatrix};
use crate::pathspec::{topological_order, PathModel};
use crate::tracing::{coefficient_matrix, reproduced_matrix, trek_shapes, ReproducedMatrix, Step};

pub const DEFAULT_MISFIT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_MAX_ITER: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairFit {
    pub a: String,
    pub b: String,
    pub observed: f64,
    pub reproduced: f64,
    pub difference: f64,
    pub misfit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitAssessment {
    pub threshold: f64,
    pub pairs: Vec<PairFit>,
    pub misfit_count: usize,
    pub fits: bool,
}

impl FitAssessment {
    pub fn max_difference(&self) -> f64 {
        self.pairs.iter().map(|p| p.difference).fold(0.0, f64::max)
    }

    pub fn pair(&self, a: &str, b: &str) -> Option<&PairFit> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }
}

/// Compares every off-diagonal pair; a pair misfits when |r − r̂| exceeds
/// `threshold`.
pub fn assess_fit(
    observed: &CorrelationMatrix,
    reproduced: &ReproducedMatrix,
    threshold: f64,
) -> Result<FitAssessment> {
    let obs_names: BTreeSet<&String> = observed.variables().iter().collect();
    let rep_names: BTreeSet<&String> = reproduced.variables.iter().collect();
    if obs_names != rep_names {
        return Err(Error::VariableMismatch(format!(
            "observed {:?} vs reproduced {:?}",
            observed.variables(),
            reproduced.variables
        )));
    }
    let vars = &reproduced.variables;
    let mut pairs = Vec::new();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            let obs = observed.get(&vars[i], &vars[j])?;
            let rep = reproduced.r(i, j);
            let difference = (obs - rep).abs();
            pairs.push(PairFit {
                a: vars[i].clone(),
                b: vars[j].clone(),
                observed: obs,
                reproduced: rep,
                difference,
                misfit: difference > threshold,
            });
        }
    }
    let misfit_count = pairs.iter().filter(|p| p.misfit).count();
    Ok(FitAssessment {
        threshold,
        pairs,
        misfit_count,
        fits: misfit_count == 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub outcome: String,
    pub determinant: String,
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectsTable {
    /// Grouped by outcome, both outcome and cause in causal order.
    pub rows: Vec<EffectRow>,
    /// (outcome, R²) for each endogenous variable, when attached from a fit.
    pub r_squared: Vec<(String, f64)>,
}

impl EffectsTable {
    pub fn row(&self, determinant: &str, outcome: &str) -> Option<&EffectRow> {
        self.rows
            .iter()
            .find(|r| r.determinant == determinant && r.outcome == outcome)
    }

    pub fn attach_r_squared(&mut self, fit: &FittedModel) {
        self.r_squared = fit
            .equations
            .iter()
            .map(|e| (fit.model.name(e.target).to_owned(), e.r_squared))
            .collect();
    }
}

/// Direct, indirect (all-forward paths of length ≥ 2) and total effect for
/// every ordered pair joined by at least one directed path.
pub fn decompose_effects(m: &PathModel) -> Result<EffectsTable> {
    m.require_coefficients()?;
    let order = topological_order(m);
    let mut rows = Vec::new();
    for &outcome in order.as_slice() {
        for &cause in order.as_slice() {
            if cause == outcome {
                continue;
            }
            let paths: Vec<Vec<usize>> = trek_shapes(m, cause, outcome)
                .into_iter()
                .filter(|(_, steps)| steps.iter().all(|&s| s == Step::Forward))
                .map(|(nodes, _)| nodes)
                .collect();
            if paths.is_empty() {
                continue;
            }
            let mut direct = 0.0;
            let mut indirect = 0.0;
            for nodes in &paths {
                let product: f64 = nodes
                    .windows(2)
                    .map(|w| m.coefficient(w[0], w[1]))
                    .product::<Result<f64>>()?;
                if nodes.len() == 2 {
                    direct = product;
                } else {
                    indirect += product;
                }
            }
            rows.push(EffectRow {
                outcome: m.name(outcome).to_owned(),
                determinant: m.name(cause).to_owned(),
                direct,
                indirect,
                total: direct + indirect,
            });
        }
    }
    Ok(EffectsTable {
        rows,
        r_squared: Vec::new(),
    })
}

/// Total effects `(I − B)⁻¹ − I`; entry `(outcome, cause)`.
pub fn total_effect_oracle(m: &PathModel) -> Result<SquareMatrix> {
    let b = coefficient_matrix(m)?;
    let k = m.k();
    let mut i_minus_b = SquareMatrix::identity(k);
    for r in 0..k {
        for c in 0..k {
            i_minus_b[(r, c)] -= b[(r, c)];
        }
    }
    let mut total = invert(&i_minus_b)?;
    for i in 0..k {
        total[(i, i)] -= 1.0;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedArrow {
    pub from: String,
    pub to: String,
    pub beta: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub from: String,
    pub to: String,
    pub misfit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum RevisionAction {
    /// Non-significant arrows removed as one batch.
    Drop { arrows: Vec<DroppedArrow> },
    /// Highest-ranked candidate added; `candidates` is the full ranking.
    Add {
        arrow: Candidate,
        candidates: Vec<Candidate>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevisionStep {
    pub iteration: usize,
    pub action: RevisionAction,
    /// Refit model after the step, coefficients annotated.
    pub model: PathModel,
    pub misfit_count: usize,
    pub max_difference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RevisionOutcome {
    Fits,
    MaxIterations,
    NoAdmissibleRevision,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RevisionTrace {
    pub steps: Vec<RevisionStep>,
    pub outcome: RevisionOutcome,
    pub final_fit: FittedModel,
    pub final_assessment: FitAssessment,
}

impl RevisionTrace {
    pub fn final_model(&self) -> PathModel {
        self.final_fit.annotated()
    }
}

fn csv_writer<W: Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn write_effects_csv<W: Write>(table: &EffectsTable, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record(["outcome", "determinant", "direct", "indirect", "total"])
        .map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.outcome.clone(),
            r.determinant.clone(),
            r.direct.to_string(),
            r.indirect.to_string(),
            r.total.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// One row per dropped or added arrow. `value` is β for drops and the
/// misfit for additions.
pub fn write_revision_csv<W: Write>(trace: &RevisionTrace, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    w.write_record([
        "iteration",
        "action",
        "from",
        "to",
        "value",
        "p",
        "misfit_count",
        "max_difference",
    ])
    .map_err(csv_err)?;
    for s in &trace.steps {
        let tail = [s.misfit_count.to_string(), s.max_difference.to_string()];
        match &s.action {
            RevisionAction::Drop { arrows } => {
                for a in arrows {
                    let row = [
                        s.iteration.to_string(),
                        "drop".into(),
                        a.from.clone(),
                        a.to.clone(),
                        a.beta.to_string(),
                        a.p.to_string(),
                    ];
                    w.write_record(row.iter().chain(&tail)).map_err(csv_err)?;
                }
            }
            RevisionAction::Add { arrow, .. } => {
                let row = [
                    s.iteration.to_string(),
                    "add".into(),
                    arrow.from.clone(),
                    arrow.to.clone(),
                    arrow.misfit.to_string(),
                    String::new(),
                ];
                w.write_record(row.iter().chain(&tail)).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

fn assess_estimated(
    corr: &CorrelationMatrix,
    fit: &FittedModel,
    threshold: f64,
) -> Result<FitAssessment> {
    let observed = corr.select(&fit.model.names())?;
    assess_fit(&observed, &reproduced_matrix(&fit.annotated())?, threshold)
}

/// Greedy specification search: each iteration drops every arrow with
/// p ≥ α, then adds the single missing arrow behind the largest remaining
/// misfit, oriented by the starting model's causal order. Dropped arrows
/// are never re-added and added arrows are never dropped, so the arrow set
/// changes monotonically and no topology is visited twice.
pub fn revise_model(
    corr: &CorrelationMatrix,
    m: &PathModel,
    alpha: f64,
    threshold: f64,
    max_iter: usize,
) -> Result<RevisionTrace> {
    if max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    let ranks = topological_order(m).ranks();
    let mut current = m.without_coefficients();
    let mut fit = fit_with_inference(corr, &current, alpha)?;
    let mut assessment = assess_estimated(corr, &fit, threshold)?;
    let mut steps = Vec::new();
    let mut dropped_ever: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut added: BTreeSet<(usize, usize)> = BTreeSet::new();

    let finish = |steps, outcome, final_fit, final_assessment| RevisionTrace {
        steps,
        outcome,
        final_fit,
        final_assessment,
    };

    for iteration in 1..=max_iter {
        if assessment.fits {
            return Ok(finish(steps, RevisionOutcome::Fits, fit, assessment));
        }

        let drops: Vec<(usize, usize, f64, f64)> = current
            .arrows()
            .iter()
            .filter(|a| !added.contains(&(a.from, a.to)))
            .filter_map(|a| {
                let inf = fit.inference(a.from, a.to)?;
                (inf.p >= alpha).then(|| {
                    (
                        a.from,
                        a.to,
                        fit.beta(a.from, a.to).unwrap_or(f64::NAN),
                        inf.p,
                    )
                })
            })
            .collect();
        if !drops.is_empty() {
            let remove: BTreeSet<(usize, usize)> =
                drops.iter().map(|&(f, t, _, _)| (f, t)).collect();
            let next = current.without_arrows(&remove);
            if next.endogenous().is_empty() {
                return Err(Error::NoAdmissibleRevision(Box::new(finish(
                    steps,
                    RevisionOutcome::NoAdmissibleRevision,
                    fit,
                    assessment,
                ))));
            }
            dropped_ever.extend(remove);
            current = next;
            fit = fit_with_inference(corr, &current, alpha)?;
            assessment = assess_estimated(corr, &fit, threshold)?;
            steps.push(RevisionStep {
                iteration,
                action: RevisionAction::Drop {
                    arrows: drops
                        .iter()
                        .map(|&(f, t, beta, p)| DroppedArrow {
                            from: current.name(f).to_owned(),
                            to: current.name(t).to_owned(),
                            beta,
                            p,
                        })
                        .collect(),
                },
                model: fit.annotated(),
                misfit_count: assessment.misfit_count,
                max_difference: assessment.max_difference(),
            });
            if assessment.fits {
                return Ok(finish(steps, RevisionOutcome::Fits, fit, assessment));
            }
        }

        let mut candidates: Vec<(usize, usize, f64)> = assessment
            .pairs
            .iter()
            .filter(|p| p.misfit)
            .filter_map(|p| {
                let i = current.index_of(&p.a)?;
                let j = current.index_of(&p.b)?;
                let (from, to) = if ranks[i] < ranks[j] { (i, j) } else { (j, i) };
                let admissible = !current.has_arrow(from, to)
                    && !current.has_arrow(to, from)
                    && !dropped_ever.contains(&(from, to));
                admissible.then_some((from, to, p.difference))
            })
            .collect();
        candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));

        let Some(&(from, to, _)) = candidates.first() else {
            if !drops.is_empty() {
                continue;
            }
            return Err(Error::NoAdmissibleRevision(Box::new(finish(
                steps,
                RevisionOutcome::NoAdmissibleRevision,
                fit,
                assessment,
            ))));
        };
        let ranked: Vec<Candidate> = candidates
            .iter()
            .map(|&(f, t, d)| Candidate {
                from: current.name(f).to_owned(),
                to: current.name(t).to_owned(),
                misfit: d,
            })
            .collect();
        added.insert((from, to));
        current = current.with_arrow(from, to, None)?;
        fit = fit_with_inference(corr, &current, alpha)?;
        assessment = assess_estimated(corr, &fit, threshold)?;
        steps.push(RevisionStep {
            iteration,
            action: RevisionAction::Add {
                arrow: ranked[0].clone(),
                candidates: ranked,
            },
            model: fit.annotated(),
            misfit_count: assessment.misfit_count,
            max_difference: assessment.max_difference(),
        });
    }

    let outcome = if assessment.fits {
        RevisionOutcome::Fits
    } else {
        RevisionOutcome::MaxIterations
    };
    Ok(finish(steps, outcome, fit, assessment))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathspec::parse_model;
    use crate::tracing::implied_matrix;

    fn model(text: &str) -> PathModel {
        parse_model(text).unwrap().model
    }

    #[test]
    fn identical_matrices_fit() {
        let m = model("path a -> b : 0.4\npath b -> c : 0.5\n");
        let rep = implied_matrix(&m).unwrap();
        let obs = CorrelationMatrix::from_entries(rep.variables.clone(), rep.values.to_rows(), 100)
            .unwrap();
        let fit = assess_fit(&obs, &rep, 0.05).unwrap();
        assert_eq!(fit.misfit_count, 0);
        assert!(fit.fits);
        assert_eq!(fit.pairs.len(), 3);
    }

    #[test]
    fn variable_mismatch() {
        let m = model("path a -> b : 0.4\n");
        let rep = implied_matrix(&m).unwrap();
        let obs = CorrelationMatrix::from_entries(
            vec!["a".into(), "z".into()],
            vec![vec![1.0, 0.4], vec![0.4, 1.0]],
            50,
        )
        .unwrap();
        assert!(matches!(
            assess_fit(&obs, &rep, 0.05),
            Err(Error::VariableMismatch(_))
        ));
    }

    #[test]
    fn chain_totals() {
        let m = model("path A -> B : 0.5\npath B -> C : 0.4\nvar D\n");
        let total = total_effect_oracle(&m).unwrap();
        assert!((total[(2, 0)] - 0.2).abs() < 1e-15);
        assert_eq!(total[(3, 0)], 0.0);
        let table = decompose_effects(&m).unwrap();
        let row = table.row("A", "C").unwrap();
        assert_eq!(row.direct, 0.0);
        assert!((row.indirect - 0.2).abs() < 1e-15);
        assert!(table.row("A", "D").is_none());
        assert_eq!(table.rows.len(), 3);
    }

    #[test]
    fn effects_need_coefficients() {
        assert!(matches!(
            decompose_effects(&model("path A -> B")),
            Err(Error::MissingCoefficient { .. })
        ));
    }

    #[test]
    fn max_iter_zero_rejected() {
        let m = model("path a -> b");
        let corr = CorrelationMatrix::from_entries(
            vec!["a".into(), "b".into()],
            vec![vec![1.0, 0.3], vec![0.3, 1.0]],
            50,
        )
        .unwrap();
        assert!(matches!(
            revise_model(&corr, &m, 0.05, 0.05, 0),
            Err(Error::InvalidArgument(_))
        ));
    }
}
