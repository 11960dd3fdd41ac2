mod common;

use std::collections::BTreeSet;

use common::{model, random_correlation, random_dag, seeded};
use pathwright::correlation::pearson_matrix;
use pathwright::effects::revise_model;
use pathwright::estimation::{fit_standardized, FittedModel};
use pathwright::pathspec::{parse_model, PathModel};
use pathwright::screening::residual_diagnostics;
use pathwright::simulate::{recovery_check, simulate_dataset, SimulationSpec};
use pathwright::tracing::implied_moments;
use pathwright::Error;
use rand::Rng;

fn parse(text: &str) -> PathModel {
    parse_model(text).unwrap().model
}

#[test]
fn zero_coefficients_give_independent_columns() {
    let m = parse("var A\nvar B\nvar C\npath A -> B : 0\npath B -> C : 0\npath A -> C : 0");
    let d = simulate_dataset(&SimulationSpec::new(m.clone(), 100_000, 1).unwrap()).unwrap();
    let c = pearson_matrix(&d).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(c.r(i, j).abs() < 0.02, "r = {}", c.r(i, j));
    }
    let report = recovery_check(&SimulationSpec::new(m, 1000, 2).unwrap(), 0.05).unwrap();
    assert!(report.passed);
}

#[test]
fn single_arrow_population_value() {
    let m = parse("path A -> B : 0.5");
    let d = simulate_dataset(&SimulationSpec::new(m, 200_000, 3).unwrap()).unwrap();
    assert!((pearson_matrix(&d).unwrap().r(0, 1) - 0.5).abs() < 0.01);
}

#[test]
fn revised_model_teaching_performance_correlation() {
    let d = simulate_dataset(&SimulationSpec::new(model("fig3.pm"), 200_000, 4).unwrap()).unwrap();
    let r = pearson_matrix(&d).unwrap().get("X4", "Y").unwrap();
    assert!((r - 0.881).abs() < 0.01, "r = {r}");
}

#[test]
fn recovery_depends_on_sample_size() {
    let large = recovery_check(
        &SimulationSpec::new(model("fig3.pm"), 50_000, 5).unwrap(),
        0.02,
    )
    .unwrap();
    assert!(large.passed, "max error {}", large.max_abs_error);
    assert_eq!(large.paths.len(), 9);
    let small = recovery_check(
        &SimulationSpec::new(model("fig3.pm"), 50, 5).unwrap(),
        0.001,
    )
    .unwrap();
    assert!(!small.passed);
}

#[test]
fn residual_spread_matches_disturbance() {
    let m = model("fig3.pm");
    let d = simulate_dataset(&SimulationSpec::new(m.clone(), 240, 42).unwrap()).unwrap();
    let fit = fit_standardized(&pearson_matrix(&d).unwrap(), &m).unwrap();
    let psi = implied_moments(&m).unwrap().residual_variances;
    for eq in residual_diagnostics(&fit, &d).unwrap() {
        let e = fit.equation_by_name(&eq.equation).unwrap();
        assert!(
            (eq.residual_sd - e.disturbance).abs() < 0.05,
            "{}",
            eq.equation
        );
        let truth = psi[m.index_of(&eq.equation).unwrap()].sqrt();
        assert!((eq.residual_sd - truth).abs() < 0.05, "{}", eq.equation);
    }
}

#[test]
fn exact_linear_data_has_zero_residuals() {
    let x: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
    let d = pathwright::data::Dataset::new(vec!["x".into(), "y".into()], vec![x, y]).unwrap();
    let m = parse("path x -> y");
    let fit = fit_standardized(&pearson_matrix(&d).unwrap(), &m).unwrap();
    let res = residual_diagnostics(&fit, &d).unwrap();
    assert!(res[0].points.iter().all(|p| p.std_residual == 0.0));
}

#[test]
fn missing_dataset_variable() {
    let m = parse("path A -> B");
    let other = parse("path A -> C : 0.3");
    let d = simulate_dataset(&SimulationSpec::new(other, 50, 1).unwrap()).unwrap();
    let c = parse("var A\nvar C\npath A -> C");
    let fit = fit_standardized(&pearson_matrix(&d).unwrap(), &c).unwrap();
    let fit = FittedModel { model: m, ..fit };
    assert!(matches!(
        residual_diagnostics(&fit, &d),
        Err(Error::VariableMissing(_))
    ));
}

#[test]
fn same_seed_same_bytes() {
    let spec = SimulationSpec::new(model("fig3.pm"), 240, 7).unwrap();
    let run = || {
        let mut buf = Vec::new();
        simulate_dataset(&spec)
            .unwrap()
            .write_csv(&mut buf)
            .unwrap();
        buf
    };
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 241);
    assert_eq!(text.lines().next().unwrap(), "X1,X2,X3,X4,Y");
}

#[test]
fn excessive_coefficient_rejected() {
    let m = parse("path A -> B : 1.2");
    assert!(matches!(
        SimulationSpec::new(m, 100, 1),
        Err(Error::NonPositiveResidualVariance { .. })
    ));
}

#[test]
fn revision_never_revisits_and_keeps_untouched_equations() {
    let mut rng = seeded(41);
    let mut exercised = 0;
    for _ in 0..60 {
        let k = rng.random_range(3..=6);
        let n = rng.random_range(30..400);
        let corr = random_correlation(&mut rng, k, n);
        let start = random_dag(&mut rng, k, 0.4).without_coefficients();
        if start.endogenous().is_empty() {
            continue;
        }
        let trace = match revise_model(&corr, &start, 0.05, 0.05, 10) {
            Ok(t) => t,
            Err(Error::NoAdmissibleRevision(t)) => *t,
            Err(e) => panic!("{e}"),
        };
        let mut seen = BTreeSet::from([start.topology()]);
        let mut previous = fit_standardized(&corr, &start).unwrap().annotated();
        for step in &trace.steps {
            assert!(seen.insert(step.model.topology()), "topology revisited");
            for y in 0..k {
                if step.model.parents(y) == previous.parents(y) {
                    for p in step.model.parents(y) {
                        let (a, b) = (
                            step.model.coefficient(p, y).unwrap(),
                            previous.coefficient(p, y).unwrap(),
                        );
                        assert_eq!(a.to_bits(), b.to_bits());
                    }
                }
            }
            previous = step.model.clone();
            exercised += 1;
        }
    }
    assert!(exercised > 20);
}
