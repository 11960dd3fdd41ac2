mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pathwright::correlation::{pearson_matrix, read_correlation_csv, CorrelationMatrix};
use pathwright::data::read_csv;
use pathwright::effects::{
    assess_fit, decompose_effects, revise_model, write_effects_csv, write_revision_csv,
    RevisionOutcome, RevisionTrace, DEFAULT_MAX_ITER, DEFAULT_MISFIT_THRESHOLD,
};
use pathwright::estimation::{fit_with_inference, FittedModel, DEFAULT_ALPHA};
use pathwright::pathspec::{parse_model, render_model, PathModel};
use pathwright::screening::{
    screen, write_residuals_csv, ScreeningOptions, DEFAULT_OUTLIER_CUTOFF,
};
use pathwright::simulate::{simulate_dataset, SimulationSpec};
use pathwright::tracing::{reproduced_matrix, write_treks_csv};
use pathwright::Error;
use report::{InputDigest, Report};
use sha2::{Digest, Sha256};

const EXIT_WARNINGS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_REVISION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "pathwright",
    version,
    about = "Path analysis for recursive causal models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Descriptives, Mahalanobis outliers, normality, VIF and residuals.
    Screen(ScreenArgs),
    /// Estimate a model and report coefficients, treks, fit and effects.
    Fit(FitArgs),
    /// Drop non-significant arrows and add arrows behind misfits until the model fits.
    Revise(ReviseArgs),
    /// Generate a dataset from a coefficient-annotated model.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct OutputArgs {
    /// Report destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Exit with status 1 when the report carries warnings.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct InputArgs {
    /// Raw dataset CSV (header row of variable names).
    #[arg(long, conflicts_with_all = ["corr", "n"], required_unless_present = "corr")]
    data: Option<PathBuf>,
    /// Labeled correlation matrix CSV.
    #[arg(long, requires = "n")]
    corr: Option<PathBuf>,
    /// Sample size behind --corr.
    #[arg(long)]
    n: Option<usize>,
    /// Model file.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long)]
    data: PathBuf,
    /// Optional model: VIF per equation and residual diagnostics.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_OUTLIER_CUTOFF)]
    outlier_cutoff: f64,
    /// Write fitted values and standardized residuals (requires --model).
    #[arg(long, requires = "model")]
    residuals_csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Largest tolerated |observed − reproduced|.
    #[arg(long, default_value_t = DEFAULT_MISFIT_THRESHOLD)]
    misfit: f64,
    #[arg(long)]
    treks_csv: Option<PathBuf>,
    #[arg(long)]
    effects_csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ReviseArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MISFIT_THRESHOLD)]
    misfit: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    /// Write the final model, coefficients included.
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[arg(long)]
    revision_csv: Option<PathBuf>,
    #[arg(long)]
    effects_csv: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Dataset CSV destination.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn located(path: &Path, e: Error) -> Failure {
    match e {
        Error::Syntax {
            line,
            column,
            message,
        } => Failure::input(format!("{}:{line}:{column}: {message}", path.display())),
        Error::Io { .. } => Failure::input(e.to_string()),
        other => Failure::input(format!("{}: {other}", path.display())),
    }
}

fn read_input(path: &Path, role: &str, digests: &mut Vec<InputDigest>) -> Result<Vec<u8>, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
    let sha256 = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    digests.push(InputDigest {
        role: role.to_owned(),
        path: path.display().to_string(),
        sha256,
    });
    Ok(bytes)
}

fn load_model(
    path: &Path,
    digests: &mut Vec<InputDigest>,
    warnings: &mut Vec<String>,
) -> Result<PathModel, Failure> {
    let bytes = read_input(path, "model", digests)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Failure::input(format!("{}: not UTF-8", path.display())))?;
    let parsed = parse_model(&text).map_err(|e| located(path, e))?;
    warnings.extend(
        parsed
            .warnings
            .into_iter()
            .map(|w| format!("{}: {w}", path.display())),
    );
    Ok(parsed.model)
}

fn load_correlations(
    input: &InputArgs,
    digests: &mut Vec<InputDigest>,
    warnings: &mut Vec<String>,
) -> Result<CorrelationMatrix, Failure> {
    if let Some(path) = &input.data {
        let bytes = read_input(path, "data", digests)?;
        let loaded = read_csv(&bytes[..]).map_err(|e| located(path, e))?;
        if loaded.dropped_rows > 0 {
            warnings.push(format!(
                "{}: {} incomplete rows dropped",
                path.display(),
                loaded.dropped_rows
            ));
        }
        pearson_matrix(&loaded.dataset).map_err(|e| located(path, e))
    } else {
        let path = input.corr.as_ref().expect("clap enforces --data or --corr");
        let n = input.n.expect("clap enforces --n with --corr");
        let bytes = read_input(path, "correlations", digests)?;
        read_correlation_csv(&bytes[..], n).map_err(|e| located(path, e))
    }
}

fn write_file(
    path: &Path,
    f: impl FnOnce(&mut Vec<u8>) -> pathwright::Result<()>,
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::input(e.to_string()))?;
    std::fs::write(path, buf)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn emit(report: &Report, output: &OutputArgs) -> Result<(), Failure> {
    let body = match output.format {
        Format::Text => report::render_text(report),
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(report).map_err(|e| Failure::input(e.to_string()))?;
            s.push('\n');
            s
        }
    };
    match &output.out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn warning_status(report: &Report, output: &OutputArgs) -> u8 {
    if output.strict && !report.warnings.is_empty() {
        EXIT_WARNINGS
    } else {
        0
    }
}

fn cmd_screen(args: &ScreenArgs) -> Result<u8, Failure> {
    let mut digests = Vec::new();
    let mut warnings = Vec::new();
    let bytes = read_input(&args.data, "data", &mut digests)?;
    let loaded = read_csv(&bytes[..]).map_err(|e| located(&args.data, e))?;
    if loaded.dropped_rows > 0 {
        warnings.push(format!(
            "{}: {} incomplete rows dropped",
            args.data.display(),
            loaded.dropped_rows
        ));
    }
    let model = match &args.model {
        Some(path) => Some(load_model(path, &mut digests, &mut warnings)?),
        None => None,
    };
    let opts = ScreeningOptions {
        alpha: args.alpha,
        outlier_cutoff: args.outlier_cutoff,
    };
    let screening =
        screen(&loaded.dataset, model.as_ref(), opts).map_err(|e| located(&args.data, e))?;
    if let Some(path) = &args.residuals_csv {
        write_file(path, |buf| write_residuals_csv(&screening.residuals, buf))?;
    }
    let mut report = Report::new("screen", digests);
    warnings.extend(screening.warnings.iter().cloned());
    report.screening = Some(screening);
    report.warnings = warnings;
    emit(&report, &args.output)?;
    Ok(warning_status(&report, &args.output))
}

/// Fills the estimation, tracing, fit and effects sections. `used` is the
/// coefficient-annotated model behind tracing and effects.
fn analyse(
    report: &mut Report,
    corr: &CorrelationMatrix,
    fit: &FittedModel,
    used: &PathModel,
    source: &str,
    misfit: f64,
) -> Result<(), Failure> {
    let observed = corr
        .select(&fit.model.names())
        .map_err(|e| Failure::input(e.to_string()))?;
    let rep = reproduced_matrix(used).map_err(|e| Failure::input(e.to_string()))?;
    let assessment =
        assess_fit(&observed, &rep, misfit).map_err(|e| Failure::input(e.to_string()))?;
    let mut effects = decompose_effects(used).map_err(|e| Failure::input(e.to_string()))?;
    effects.attach_r_squared(fit);

    for row in report::coefficients(fit) {
        if !row.significant {
            report.warnings.push(format!(
                "{} -> {} is not significant (p = {})",
                row.from, row.to, row.p_display
            ));
        }
    }
    if !assessment.fits {
        report.warnings.push(format!(
            "model does not fit: {} of {} reproduced correlations differ from observed by more than {}",
            assessment.misfit_count,
            assessment.pairs.len(),
            misfit
        ));
    }
    report.correlations = Some(report::correlations(&observed));
    report.coefficients = Some(report::coefficients(fit));
    report.r_squared = Some(report::r_squared(fit));
    report.reproduced = Some(report::reproduced(used, &rep, source));
    report.fit = Some(assessment);
    report.effects = Some(effects);
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> Result<u8, Failure> {
    let mut digests = Vec::new();
    let mut warnings = Vec::new();
    let corr = load_correlations(&args.input, &mut digests, &mut warnings)?;
    let model = load_model(&args.input.model, &mut digests, &mut warnings)?;
    let fit =
        fit_with_inference(&corr, &model, args.alpha).map_err(|e| located(&args.input.model, e))?;

    let (used, source) = if model.is_fully_annotated() && !model.arrows().is_empty() {
        warnings.push(
            "reproduced correlations and effects use the coefficients given in the model file"
                .into(),
        );
        (model.clone(), "model file")
    } else {
        (fit.annotated(), "estimated")
    };

    let mut report = Report::new("fit", digests);
    report.warnings = warnings;
    analyse(&mut report, &corr, &fit, &used, source, args.misfit)?;
    if let Some(path) = &args.treks_csv {
        let rep = reproduced_matrix(&used).map_err(|e| Failure::input(e.to_string()))?;
        write_file(path, |buf| write_treks_csv(&used, &rep, buf))?;
    }
    if let Some(path) = &args.effects_csv {
        write_file(path, |buf| {
            write_effects_csv(report.effects.as_ref().expect("filled by analyse"), buf)
        })?;
    }
    emit(&report, &args.output)?;
    Ok(warning_status(&report, &args.output))
}

fn cmd_revise(args: &ReviseArgs) -> Result<u8, Failure> {
    let mut digests = Vec::new();
    let mut warnings = Vec::new();
    let corr = load_correlations(&args.input, &mut digests, &mut warnings)?;
    let model = load_model(&args.input.model, &mut digests, &mut warnings)?;
    if model.arrows().iter().any(|a| a.coefficient.is_some()) {
        warnings
            .push("coefficients in the model file are ignored; every step is re-estimated".into());
    }

    let trace: RevisionTrace =
        match revise_model(&corr, &model, args.alpha, args.misfit, args.max_iter) {
            Ok(t) => t,
            Err(Error::NoAdmissibleRevision(t)) => *t,
            Err(e) => return Err(located(&args.input.model, e)),
        };
    let final_model = trace.final_model();

    let mut report = Report::new("revise", digests);
    report.warnings = warnings;
    analyse(
        &mut report,
        &corr,
        &trace.final_fit,
        &final_model,
        "estimated",
        args.misfit,
    )?;
    let status = match trace.outcome {
        RevisionOutcome::Fits => warning_status(&report, &args.output),
        RevisionOutcome::MaxIterations => {
            report.warnings.push(format!(
                "stopped after {} iterations without reaching fit",
                args.max_iter
            ));
            EXIT_REVISION
        }
        RevisionOutcome::NoAdmissibleRevision => {
            report
                .warnings
                .push(Error::NoAdmissibleRevision(Box::new(trace.clone())).to_string());
            EXIT_REVISION
        }
    };
    report.revision = Some(report::revision(&trace));

    if let Some(path) = &args.out_model {
        std::fs::write(path, render_model(&final_model))
            .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))?;
    }
    if let Some(path) = &args.revision_csv {
        write_file(path, |buf| write_revision_csv(&trace, buf))?;
    }
    if let Some(path) = &args.effects_csv {
        write_file(path, |buf| {
            write_effects_csv(report.effects.as_ref().expect("filled by analyse"), buf)
        })?;
    }
    emit(&report, &args.output)?;
    Ok(status)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let mut digests = Vec::new();
    let mut warnings = Vec::new();
    let model = load_model(&args.model, &mut digests, &mut warnings)?;
    let spec =
        SimulationSpec::new(model, args.n, args.seed).map_err(|e| located(&args.model, e))?;
    let data = simulate_dataset(&spec).map_err(|e| located(&args.model, e))?;
    data.save_csv(&args.out)
        .map_err(|e| Failure::input(e.to_string()))?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Screen(a) => cmd_screen(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Revise(a) => cmd_revise(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
