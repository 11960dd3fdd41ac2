//! Report model shared by the text and JSON renderings.

use std::fmt::Write;

use pathwright::correlation::{classify_strength, format_p, significance_stars, CorrelationMatrix};
use pathwright::effects::{
    EffectsTable, FitAssessment, RevisionAction, RevisionOutcome, RevisionTrace,
};
use pathwright::estimation::FittedModel;
use pathwright::pathspec::{render_model, PathModel};
use pathwright::screening::ScreeningReport;
use pathwright::tracing::ReproducedMatrix;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorrelationCell {
    pub a: String,
    pub b: String,
    pub r: f64,
    pub p: f64,
    pub p_display: String,
    pub stars: String,
    pub strength: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Correlations {
    pub n: usize,
    pub variables: Vec<String>,
    pub cells: Vec<CorrelationCell>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub from: String,
    pub to: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub p_display: String,
    pub stars: String,
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RSquaredRow {
    pub variable: String,
    pub r_squared: f64,
    pub disturbance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrekRow {
    pub pair: String,
    pub sequence: String,
    pub classification: String,
    pub product: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reproduced {
    /// Where the coefficients behind the matrix came from.
    pub coefficients: String,
    pub variables: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub treks: Vec<TrekRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RevisionStepRow {
    pub iteration: usize,
    pub action: String,
    pub arrows: Vec<String>,
    pub misfit_count: usize,
    pub max_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Revision {
    pub outcome: RevisionOutcome,
    pub steps: Vec<RevisionStepRow>,
    pub final_model: String,
    /// Full trace including candidate rankings and per-step models.
    pub trace: RevisionTrace,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub screening: Option<ScreeningReport>,
    pub correlations: Option<Correlations>,
    pub coefficients: Option<Vec<CoefficientRow>>,
    pub r_squared: Option<Vec<RSquaredRow>>,
    pub reproduced: Option<Reproduced>,
    pub fit: Option<FitAssessment>,
    pub effects: Option<EffectsTable>,
    pub revision: Option<Revision>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, inputs: Vec<InputDigest>) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            inputs,
            screening: None,
            correlations: None,
            coefficients: None,
            r_squared: None,
            reproduced: None,
            fit: None,
            effects: None,
            revision: None,
            warnings: Vec::new(),
        }
    }
}

pub fn correlations(c: &CorrelationMatrix) -> Correlations {
    let vars = c.variables();
    let mut cells = Vec::new();
    for i in 0..vars.len() {
        for j in i + 1..vars.len() {
            let (r, p) = (c.r(i, j), c.p(i, j));
            cells.push(CorrelationCell {
                a: vars[i].clone(),
                b: vars[j].clone(),
                r,
                p,
                p_display: format_p(p),
                stars: significance_stars(p).to_owned(),
                strength: classify_strength(r)
                    .map(|s| s.to_string())
                    .unwrap_or_default(),
            });
        }
    }
    Correlations {
        n: c.n(),
        variables: vars.to_vec(),
        cells,
    }
}

pub fn coefficients(fit: &FittedModel) -> Vec<CoefficientRow> {
    let m = &fit.model;
    let mut rows = Vec::new();
    for eq in &fit.equations {
        for (j, &p) in eq.parents.iter().enumerate() {
            let inf = eq.inference.as_ref().map(|v| v[j]);
            let pval = inf.map_or(f64::NAN, |i| i.p);
            rows.push(CoefficientRow {
                from: m.name(p).to_owned(),
                to: m.name(eq.target).to_owned(),
                beta: eq.coefficients[j],
                se: inf.map_or(f64::NAN, |i| i.se),
                t: inf.map_or(f64::NAN, |i| i.t),
                p: pval,
                p_display: format_p(pval),
                stars: significance_stars(pval).to_owned(),
                significant: inf.is_some_and(|i| i.significant),
            });
        }
    }
    rows
}

pub fn r_squared(fit: &FittedModel) -> Vec<RSquaredRow> {
    fit.equations
        .iter()
        .map(|e| RSquaredRow {
            variable: fit.model.name(e.target).to_owned(),
            r_squared: e.r_squared,
            disturbance: e.disturbance,
        })
        .collect()
}

pub fn reproduced(m: &PathModel, rep: &ReproducedMatrix, source: &str) -> Reproduced {
    let k = rep.variables.len();
    let treks = rep
        .treks
        .iter()
        .flatten()
        .flat_map(|pair| {
            let label = format!("{}-{}", m.name(pair.a), m.name(pair.b));
            pair.treks.iter().map(move |t| TrekRow {
                pair: label.clone(),
                sequence: t.describe(m),
                classification: t.kind.code().to_owned(),
                product: t.product,
            })
        })
        .collect();
    Reproduced {
        coefficients: source.to_owned(),
        variables: rep.variables.clone(),
        matrix: (0..k)
            .map(|i| (0..k).map(|j| rep.r(i, j)).collect())
            .collect(),
        treks,
    }
}

pub fn revision(trace: &RevisionTrace) -> Revision {
    let steps = trace
        .steps
        .iter()
        .map(|s| {
            let (action, arrows) = match &s.action {
                RevisionAction::Drop { arrows } => (
                    "drop",
                    arrows
                        .iter()
                        .map(|a| format!("{} -> {}", a.from, a.to))
                        .collect(),
                ),
                RevisionAction::Add { arrow, .. } => {
                    ("add", vec![format!("{} -> {}", arrow.from, arrow.to)])
                }
            };
            RevisionStepRow {
                iteration: s.iteration,
                action: action.to_owned(),
                arrows,
                misfit_count: s.misfit_count,
                max_difference: s.max_difference,
            }
        })
        .collect();
    Revision {
        outcome: trace.outcome,
        steps,
        final_model: render_model(&trace.final_model()),
        trace: trace.clone(),
    }
}

fn f3(x: f64) -> String {
    if x.is_nan() {
        "-".into()
    } else {
        format!("{x:.3}")
    }
}

fn heading(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n{title}\n{}", "-".repeat(title.chars().count()));
}

fn lower_triangle(out: &mut String, names: &[String], value: impl Fn(usize, usize) -> String) {
    let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(7);
    let _ = write!(out, "{:width$}", "");
    for n in names {
        let _ = write!(out, " {n:>7}");
    }
    out.push('\n');
    for (i, n) in names.iter().enumerate() {
        let _ = write!(out, "{n:width$}");
        for j in 0..=i {
            let _ = write!(out, " {:>7}", value(i, j));
        }
        out.push('\n');
    }
}

pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pathwright {} {}", r.version, r.command);
    for d in &r.inputs {
        let _ = writeln!(out, "  {}: {} (sha256 {})", d.role, d.path, d.sha256);
    }

    if let Some(s) = &r.screening {
        heading(&mut out, "Screening");
        let _ = writeln!(out, "n = {}", s.n);
        let _ = writeln!(
            out,
            "{:<12} {:>9} {:>9} {:>9} {:>9}",
            "variable", "mean", "sd", "min", "max"
        );
        for v in &s.summaries {
            let _ = writeln!(
                out,
                "{:<12} {:>9} {:>9} {:>9} {:>9}",
                v.name,
                f3(v.mean),
                f3(v.sd),
                f3(v.min),
                f3(v.max)
            );
        }
        if !s.normality.is_empty() {
            let _ = writeln!(out, "\nKolmogorov-Smirnov normality");
            for t in &s.normality {
                let verdict = if t.non_normal { "non-normal" } else { "ok" };
                let _ = writeln!(
                    out,
                    "  {:<12} D = {}  p = {}  {verdict}",
                    t.variable,
                    f3(t.statistic),
                    f3(t.p)
                );
            }
        }
        let flagged: Vec<_> = s.flagged_outliers().collect();
        let _ = writeln!(out, "\nMahalanobis outliers flagged: {}", flagged.len());
        for o in flagged {
            let _ = writeln!(
                out,
                "  row {}  D² = {}  p = {}",
                o.row + 1,
                f3(o.d_squared),
                format_p(o.p)
            );
        }
        if !s.vif.is_empty() {
            let _ = writeln!(out, "\nVariance inflation factors");
            for v in &s.vif {
                let eq = v.equation.as_deref().unwrap_or("all");
                let _ = writeln!(
                    out,
                    "  {eq:<8} {:<12} {}  {:?}",
                    v.predictor,
                    f3(v.vif),
                    v.level
                );
            }
        }
        for e in &s.residuals {
            let _ = writeln!(out, "residual sd for {}: {}", e.equation, f3(e.residual_sd));
        }
        for note in &s.notes {
            let _ = writeln!(out, "note: {note}");
        }
    }

    if let Some(c) = &r.correlations {
        heading(&mut out, &format!("Observed correlations (n = {})", c.n));
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>7} {:>7} {:<3} strength",
            "a", "b", "r", "p", ""
        );
        for cell in &c.cells {
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>7} {:>7} {:<3} {}",
                cell.a,
                cell.b,
                f3(cell.r),
                cell.p_display,
                cell.stars,
                cell.strength
            );
        }
    }

    if let Some(rows) = &r.coefficients {
        heading(&mut out, "Path coefficients");
        let _ = writeln!(
            out,
            "{:<16} {:>7} {:>7} {:>8} {:>7}",
            "path", "beta", "se", "t", "p"
        );
        for row in rows {
            let _ = writeln!(
                out,
                "{:<16} {:>7} {:>7} {:>8} {:>7} {}",
                format!("{} -> {}", row.from, row.to),
                f3(row.beta),
                f3(row.se),
                f3(row.t),
                row.p_display,
                row.stars
            );
        }
    }

    if let Some(rows) = &r.r_squared {
        heading(&mut out, "Explained variance");
        for row in rows {
            let _ = writeln!(
                out,
                "{:<12} R² = {}  disturbance = {}",
                row.variable,
                f3(row.r_squared),
                f3(row.disturbance)
            );
        }
    }

    if let Some(rep) = &r.reproduced {
        heading(
            &mut out,
            &format!(
                "Reproduced correlations ({} coefficients)",
                rep.coefficients
            ),
        );
        lower_triangle(&mut out, &rep.variables, |i, j| f3(rep.matrix[i][j]));
        let _ = writeln!(out, "\nTreks");
        for t in &rep.treks {
            let _ = writeln!(
                out,
                "  {:<8} {:<32} {} {:>7}",
                t.pair,
                t.sequence,
                t.classification,
                f3(t.product)
            );
        }
    }

    if let Some(fit) = &r.fit {
        heading(&mut out, &format!("Fit (threshold {})", f3(fit.threshold)));
        let _ = writeln!(
            out,
            "{:<8} {:<8} {:>8} {:>10} {:>10}",
            "a", "b", "observed", "reproduced", "difference"
        );
        for p in &fit.pairs {
            let _ = writeln!(
                out,
                "{:<8} {:<8} {:>8} {:>10} {:>10}{}",
                p.a,
                p.b,
                f3(p.observed),
                f3(p.reproduced),
                f3(p.difference),
                if p.misfit { " *" } else { "" }
            );
        }
        let verdict = if fit.fits { "fits" } else { "does not fit" };
        let _ = writeln!(
            out,
            "{} of {} pairs misfit; max |difference| {}; model {verdict}",
            fit.misfit_count,
            fit.pairs.len(),
            f3(fit.max_difference())
        );
    }

    if let Some(e) = &r.effects {
        heading(&mut out, "Causal effects");
        let _ = writeln!(
            out,
            "{:<12} {:<12} {:>7} {:>8} {:>7}",
            "outcome", "determinant", "direct", "indirect", "total"
        );
        for row in &e.rows {
            let _ = writeln!(
                out,
                "{:<12} {:<12} {:>7} {:>8} {:>7}",
                row.outcome,
                row.determinant,
                f3(row.direct),
                f3(row.indirect),
                f3(row.total)
            );
        }
        for (name, r2) in &e.r_squared {
            let _ = writeln!(out, "R² {name} = {}", f3(*r2));
        }
    }

    if let Some(rev) = &r.revision {
        heading(&mut out, "Revision");
        if rev.steps.is_empty() {
            let _ = writeln!(out, "no revision needed");
        }
        for s in &rev.steps {
            let _ = writeln!(
                out,
                "{:>3} {:<4} {:<32} misfits {}  max |difference| {}",
                s.iteration,
                s.action,
                s.arrows.join(", "),
                s.misfit_count,
                f3(s.max_difference)
            );
        }
        let _ = writeln!(out, "outcome: {:?}", rev.outcome);
        let _ = writeln!(out, "\nfinal model:\n{}", rev.final_model.trim_end());
    }

    if !r.warnings.is_empty() {
        heading(&mut out, "Warnings");
        for w in &r.warnings {
            let _ = writeln!(out, "- {w}");
        }
    }
    out
}
