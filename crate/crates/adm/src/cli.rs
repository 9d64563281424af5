//! Command-line orchestration: `dea`, `fit`, `score`, `rank`, `synth`, and
//! the end-to-end `pipeline`. Everything is seeded and file-driven, so the
//! same argv over the same files produces byte-identical output.
//!
//! Exit codes: 0 success, 1 validation/usage/I-O error, 2 numerical failure.

use crate::cwfit::{
    fit_constrained, fit_ols, predict, rescale, FitError, FitOptions, FitResult, Formula,
};
use crate::dataset::{DataError, Dataset};
use crate::dea::{ccr_scores, zero_weight_diagnostics, DeaError, DEFAULT_ZERO_TOL};
use crate::report::{
    self, compare, dataset_to_csv, rank, EmitFormat, EmitOptions, ReportError, DEFAULT_TIE_TOL,
};
use crate::synth::{self, SynthError, SynthSpec};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(failure) => {
            if !failure.message.is_empty() {
                eprintln!("error: {}", failure.message);
            }
            failure.code
        }
    }
}

#[derive(Parser)]
#[command(
    name = "adm",
    version,
    about = "Objective common-weights scoring: frontier scores regressed into one transparent formula"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Frontier (CCR) scores, multipliers, and zero-weight diagnostics
    Dea(DeaArgs),
    /// Fit the common-weights formula to the frontier scores
    Fit(FitArgs),
    /// Apply a saved formula to a dataset
    Score(ScoreArgs),
    /// Rank a (dmu,score) CSV
    Rank(RankArgs),
    /// Generate or evaluate known-truth data
    Synth(SynthArgs),
    /// Full run: frontier scores, fits, rescaling, comparison table
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Dataset CSV path, `-` for stdin
    #[arg(long = "in", value_name = "PATH")]
    input: Option<String>,
    /// Built-in dataset name (hospital14, bowlin15)
    #[arg(long, conflicts_with = "input")]
    builtin: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Output path, `-` or absent for stdout
    #[arg(long)]
    out: Option<String>,
    /// Print reals at full precision instead of 6 significant digits
    #[arg(long)]
    full_precision: bool,
}

#[derive(Args)]
struct FitFlags {
    /// Which variant(s) to fit
    #[arg(long = "fit", value_enum, default_value_t = Variant::Constrained)]
    variant: Variant,
    /// Include an intercept term (accepts --intercept / --intercept=false)
    #[arg(
        long,
        default_value_t = false,
        num_args = 0..=1,
        default_missing_value = "true",
        action = clap::ArgAction::Set
    )]
    intercept: bool,
    /// Random starts for the optimizer
    #[arg(long, default_value_t = 50)]
    n_starts: usize,
    /// Optimizer seed (env ADM_SEED, overridden by this flag)
    #[arg(long, env = "ADM_SEED", default_value_t = 42)]
    seed: u64,
    /// One-sided feasibility tolerance
    #[arg(long, default_value_t = 1e-8)]
    feas_tol: f64,
    /// Squared projected-gradient convergence tolerance
    #[arg(long, default_value_t = 1e-10)]
    grad_tol: f64,
}

impl FitFlags {
    fn options(&self) -> FitOptions {
        FitOptions {
            intercept: self.intercept,
            n_starts: self.n_starts,
            seed: self.seed,
            feasibility_tolerance: self.feas_tol,
            gradient_tolerance: self.grad_tol,
            ..FitOptions::default()
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Ols,
    Constrained,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct DeaArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Zero-weight threshold, relative to each entity's largest multiplier
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    /// Tie tolerance for ranking
    #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: FitFlags,
    /// Also emit the rescaled scores of the ols variant
    #[arg(long)]
    rescale: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct ScoreArgs {
    /// Saved formula JSON (a bare formula block or a `fit`/`pipeline` doc)
    #[arg(long, value_name = "PATH")]
    formula: String,
    /// Pick this formula out of a multi-formula document
    #[arg(long)]
    method: Option<String>,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct RankArgs {
    /// CSV with header `dmu,<score column>`, `-` for stdin
    #[arg(long = "in", value_name = "PATH")]
    input: String,
    #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// Recipe CSV with header `dmu,output:<label>…,efficiency`, `-` for stdin
    #[arg(long = "in", value_name = "PATH")]
    input: String,
    /// True output weights, comma-separated, matching the output columns
    #[arg(long, value_name = "W1,W2,…")]
    weights: String,
    /// Run the whole pipeline on the generated data and report recovery
    #[arg(long)]
    evaluate: bool,
    #[command(flatten)]
    flags: FitFlags,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    flags: FitFlags,
    #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    #[arg(long, default_value_t = DEFAULT_ZERO_TOL)]
    zero_tol: f64,
    #[command(flatten)]
    output: OutputArgs,
}

struct Failure {
    message: String,
    code: i32,
}

fn validation<E: std::fmt::Display>(e: E) -> Failure {
    Failure {
        message: e.to_string(),
        code: 1,
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> Failure {
    Failure {
        message: e.to_string(),
        code: 2,
    }
}

fn from_data(e: DataError) -> Failure {
    validation(e)
}

fn from_dea(e: DeaError) -> Failure {
    match e {
        DeaError::EntityOutOfRange { .. } => validation(e),
        DeaError::Lp { .. } | DeaError::BadStatus { .. } => numerical(e),
    }
}

fn from_fit(e: FitError) -> Failure {
    match e {
        FitError::NoConvergence(_) | FitError::Singular(_) | FitError::DegenerateFit => {
            numerical(e)
        }
        FitError::Dea(inner) => from_dea(inner),
        other => validation(other),
    }
}

fn from_synth(e: SynthError) -> Failure {
    match e {
        SynthError::Fit(inner) => from_fit(inner),
        other => validation(other),
    }
}

fn from_report(e: ReportError) -> Failure {
    if let ReportError::Io(io_err) = &e {
        return from_io_ref(io_err);
    }
    validation(e)
}

/// Closed pipes (e.g. `adm dea … | head`) are a normal way for output to
/// end, not an error worth reporting.
fn from_io_ref(e: &io::Error) -> Failure {
    if e.kind() == io::ErrorKind::BrokenPipe {
        return Failure {
            message: String::new(),
            code: 0,
        };
    }
    validation(e)
}

fn from_io(e: io::Error) -> Failure {
    from_io_ref(&e)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Dea(args) => cmd_dea(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Score(args) => cmd_score(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn read_source(path: &str) -> Result<String, Failure> {
    if path == "-" {
        let mut text = String::new();
        io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| validation(format!("reading stdin: {e}")))?;
        Ok(text)
    } else {
        fs::read_to_string(path).map_err(|e| validation(format!("reading `{path}`: {e}")))
    }
}

/// Load and validate a dataset; fatal validation errors exit 1. Warnings
/// (all frontier-related) go to stderr only when a frontier will actually
/// be computed.
fn load_dataset(input: &InputArgs, surface_warnings: bool) -> Result<(String, Dataset), Failure> {
    let (label, dataset) = match (&input.builtin, &input.input) {
        (Some(name), _) => (name.clone(), Dataset::builtin(name).map_err(from_data)?),
        (None, Some(path)) => {
            let text = read_source(path)?;
            (path.clone(), Dataset::parse_csv(&text).map_err(from_data)?)
        }
        (None, None) => {
            return Err(validation("no input: pass --in <path> or --builtin <name>"));
        }
    };
    let report = dataset.validate();
    if !report.is_valid() {
        return Err(validation(format!(
            "invalid dataset `{label}`:\n  {}",
            report.errors.join("\n  ")
        )));
    }
    if surface_warnings {
        for warning in &report.warnings {
            eprintln!("warning: {warning}");
        }
    }
    Ok((label, dataset))
}

fn open_output(out: &Option<String>) -> Result<Box<dyn Write>, Failure> {
    match out.as_deref() {
        None | Some("-") => Ok(Box::new(io::stdout())),
        Some(path) => {
            let file =
                fs::File::create(path).map_err(|e| validation(format!("writing `{path}`: {e}")))?;
            Ok(Box::new(file))
        }
    }
}

fn emit_options(out: &OutputArgs) -> EmitOptions {
    EmitOptions {
        format: match out.format {
            Format::Json => EmitFormat::Json,
            Format::Csv => EmitFormat::Csv,
        },
        full_precision: out.full_precision,
    }
}

fn cmd_dea(args: DeaArgs) -> Result<(), Failure> {
    let (label, dataset) = load_dataset(&args.input, true)?;
    let mut result = ccr_scores(&dataset).map_err(from_dea)?;
    let diagnostics = zero_weight_diagnostics(&result, args.zero_tol);
    result.zero_flags = diagnostics.flags;
    let ranks = rank(&result.scores, args.tie_tol).map_err(from_report)?;
    let writer = open_output(&args.output.out)?;
    report::emit_dea(
        &label,
        &dataset,
        &result,
        &ranks,
        &emit_options(&args.output),
        writer,
    )
    .map_err(from_report)
}

fn run_fits(
    dataset: &Dataset,
    targets: &[f64],
    variant: Variant,
    opts: &FitOptions,
) -> Result<Vec<(&'static str, FitResult)>, Failure> {
    let mut fits = Vec::new();
    if matches!(variant, Variant::Ols | Variant::Both) {
        fits.push(("ols", fit_ols(dataset, targets, opts).map_err(from_fit)?));
    }
    if matches!(variant, Variant::Constrained | Variant::Both) {
        fits.push((
            "constrained",
            fit_constrained(dataset, targets, opts).map_err(from_fit)?,
        ));
    }
    for (label, fit) in &fits {
        for warning in &fit.warnings {
            eprintln!("warning ({label}): {warning}");
        }
    }
    Ok(fits)
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    if args.rescale && args.flags.variant == Variant::Constrained {
        return Err(validation(
            "--rescale only applies to the ols variant (one-sided fits never exceed the \
             frontier scores)",
        ));
    }
    let (label, dataset) = load_dataset(&args.input, true)?;
    let dea = ccr_scores(&dataset).map_err(from_dea)?;
    let opts = args.flags.options();
    let fits = run_fits(&dataset, &dea.scores, args.flags.variant, &opts)?;
    let rescaled = if args.rescale {
        let ols = &fits
            .iter()
            .find(|(l, _)| *l == "ols")
            .expect("rescale requires the ols variant")
            .1;
        let (scores, factor) = rescale(&ols.predicted, &dea.scores).map_err(from_fit)?;
        Some((scores, factor))
    } else {
        None
    };
    let writer = open_output(&args.output.out)?;
    let borrowed: Vec<(&str, &FitResult)> = fits.iter().map(|(l, f)| (*l, f)).collect();
    report::emit_fit(
        &label,
        &dataset,
        &borrowed,
        rescaled
            .as_ref()
            .map(|(scores, factor)| ("ols_rescaled", scores.as_slice(), *factor)),
        &emit_options(&args.output),
        writer,
    )
    .map_err(from_report)
}

/// A saved formula: either a bare block (as written under `formulas` in the
/// JSON output) or a whole document containing such blocks.
#[derive(Deserialize)]
struct FormulaDoc {
    output_weights: Vec<f64>,
    input_weights: Vec<f64>,
    #[serde(default)]
    intercept: f64,
    #[serde(default)]
    input_labels: Option<Vec<String>>,
    #[serde(default)]
    output_labels: Option<Vec<String>>,
}

fn load_formula(path: &str, method: Option<&str>) -> Result<FormulaDoc, Failure> {
    let text = read_source(path)?;
    if let Ok(doc) = serde_json::from_str::<FormulaDoc>(&text) {
        return Ok(doc);
    }
    #[derive(Deserialize)]
    struct Outer {
        formulas: std::collections::BTreeMap<String, FormulaDoc>,
    }
    let outer: Outer = serde_json::from_str(&text).map_err(|e| {
        validation(format!(
            "`{path}` is neither a formula block nor a document with a `formulas` section: {e}"
        ))
    })?;
    let mut formulas = outer.formulas;
    match method {
        Some(name) => formulas
            .remove(name)
            .ok_or_else(|| validation(format!("`{path}` has no formula `{name}`"))),
        None if formulas.len() == 1 => Ok(formulas.into_values().next().unwrap()),
        None => Err(validation(format!(
            "`{path}` holds {} formulas ({}); pick one with --method",
            formulas.len(),
            formulas.keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn cmd_score(args: ScoreArgs) -> Result<(), Failure> {
    let doc = load_formula(&args.formula, args.method.as_deref())?;
    let (_, dataset) = load_dataset(&args.input, false)?;
    if let Some(labels) = &doc.input_labels {
        if labels != dataset.input_labels() {
            return Err(validation(format!(
                "formula input columns {labels:?} do not match dataset {:?}",
                dataset.input_labels()
            )));
        }
    }
    if let Some(labels) = &doc.output_labels {
        if labels != dataset.output_labels() {
            return Err(validation(format!(
                "formula output columns {labels:?} do not match dataset {:?}",
                dataset.output_labels()
            )));
        }
    }
    let formula = Formula {
        output_weights: doc.output_weights,
        input_weights: doc.input_weights,
        intercept: doc.intercept,
    };
    let scores = predict(&formula, &dataset).map_err(from_fit)?;
    let writer = open_output(&args.output.out)?;
    report::emit_scores(
        dataset.names(),
        &scores,
        None,
        &emit_options(&args.output),
        writer,
    )
    .map_err(from_report)
}

fn cmd_rank(args: RankArgs) -> Result<(), Failure> {
    let text = read_source(&args.input)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| validation("empty score file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[0] != "dmu" {
        return Err(validation(
            "rank input must be a CSV with header `dmu,<score column>`",
        ));
    }
    let mut names = Vec::new();
    let mut scores = Vec::new();
    for (idx, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(validation(format!(
                "line {}: expected {} cells, found {}",
                idx + 2,
                cols.len(),
                cells.len()
            )));
        }
        names.push(cells[0].to_string());
        let score: f64 = cells[1]
            .parse()
            .map_err(|_| validation(format!("line {}: `{}` is not a number", idx + 2, cells[1])))?;
        scores.push(score);
    }
    let ranks = rank(&scores, args.tie_tol).map_err(from_report)?;
    let writer = open_output(&args.output.out)?;
    report::emit_scores(
        &names,
        &scores,
        Some(&ranks),
        &emit_options(&args.output),
        writer,
    )
    .map_err(from_report)
}

fn parse_synth_recipe(text: &str, weights: &[f64]) -> Result<SynthSpec, Failure> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| validation("empty recipe"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "dmu" || cols[cols.len() - 1] != "efficiency" {
        return Err(validation(
            "recipe header must be `dmu,output:<label>…,efficiency`",
        ));
    }
    let n_outputs = cols.len() - 2;
    let mut output_labels = Vec::with_capacity(n_outputs);
    for col in &cols[1..cols.len() - 1] {
        match col.strip_prefix("output:") {
            Some(label) => output_labels.push(label.trim().to_string()),
            None => {
                return Err(validation(format!(
                    "recipe column `{col}` must be `output:<label>`"
                )));
            }
        }
    }
    if weights.len() != n_outputs {
        return Err(validation(format!(
            "{} weights supplied for {n_outputs} output columns",
            weights.len()
        )));
    }
    let mut names = Vec::new();
    let mut levels = Vec::new();
    let mut efficiencies = Vec::new();
    for (idx, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(validation(format!(
                "line {}: expected {} cells, found {}",
                idx + 2,
                cols.len(),
                cells.len()
            )));
        }
        names.push(cells[0].to_string());
        let mut row = Vec::with_capacity(n_outputs);
        for cell in &cells[1..cells.len() - 1] {
            row.push(
                cell.parse::<f64>().map_err(|_| {
                    validation(format!("line {}: `{cell}` is not a number", idx + 2))
                })?,
            );
        }
        levels.push(row);
        efficiencies.push(cells[cells.len() - 1].parse::<f64>().map_err(|_| {
            validation(format!(
                "line {}: bad efficiency `{}`",
                idx + 2,
                cells[cells.len() - 1]
            ))
        })?);
    }
    SynthSpec::with_names(
        Formula::new(weights.to_vec(), vec![1.0]),
        levels,
        efficiencies,
        names,
    )
    .and_then(|spec| spec.with_output_labels(output_labels))
    .map_err(from_synth)
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let weights: Vec<f64> = args
        .weights
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| validation(format!("bad weight `{w}`")))
        })
        .collect::<Result<_, _>>()?;
    let text = read_source(&args.input)?;
    let spec = parse_synth_recipe(&text, &weights)?;
    let dataset = synth::generate(&spec).map_err(from_synth)?;

    let mut writer = open_output(&args.output.out)?;
    if !args.evaluate {
        // The generated dataset is itself the deliverable; it is emitted in
        // the dataset CSV dialect so it can be fed straight back in.
        write!(writer, "{}", dataset_to_csv(&dataset)).map_err(from_io)?;
        return Ok(());
    }

    let dea = ccr_scores(&dataset).map_err(from_dea)?;
    let opts = args.flags.options();
    let fitted = fit_constrained(&dataset, &dea.scores, &opts).map_err(from_fit)?;
    let metrics =
        synth::recovery_error(&spec.true_formula, &fitted.formula, &dataset).map_err(from_synth)?;
    let truth = synth::true_scores(&dataset, &spec.true_formula).map_err(from_synth)?;
    let opts_out = emit_options(&args.output);
    match opts_out.format {
        EmitFormat::Json => {
            let doc = serde_json::json!({
                "true_formula": spec.true_formula,
                "fitted_formula": fitted.formula,
                "coefficient_rel_errors": metrics.coefficient_rel_errors,
                "max_score_error": metrics.max_score_error,
                "mean_score_error": metrics.mean_score_error,
                "dea_true_score_gap": dea.scores.iter().zip(&truth)
                    .map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max),
                "sse": fitted.sse,
                "feasible": fitted.feasible,
            });
            writeln!(writer, "{}", serde_json::to_string_pretty(&doc).unwrap()).map_err(from_io)?;
        }
        EmitFormat::Csv => {
            writeln!(writer, "metric,value").map_err(from_io)?;
            for (k, e) in metrics.coefficient_rel_errors.iter().enumerate() {
                writeln!(writer, "coefficient_rel_error_{},{e}", k + 1).map_err(from_io)?;
            }
            writeln!(writer, "max_score_error,{}", metrics.max_score_error).map_err(from_io)?;
            writeln!(writer, "mean_score_error,{}", metrics.mean_score_error).map_err(from_io)?;
            writeln!(writer, "sse,{}", fitted.sse).map_err(from_io)?;
        }
    }
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<(), Failure> {
    let (label, dataset) = load_dataset(&args.input, true)?;
    let mut dea = ccr_scores(&dataset).map_err(from_dea)?;
    dea.zero_flags = zero_weight_diagnostics(&dea, args.zero_tol).flags;
    let opts = args.flags.options();
    let fits = run_fits(&dataset, &dea.scores, args.flags.variant, &opts)?;
    let rescaled = fits
        .iter()
        .find(|(l, _)| *l == "ols")
        .map(|(_, ols)| rescale(&ols.predicted, &dea.scores).map_err(from_fit))
        .transpose()?;
    let borrowed: Vec<(&str, &FitResult)> = fits.iter().map(|(l, f)| (*l, f)).collect();
    let mut table = compare(
        &dataset,
        &dea,
        &borrowed,
        rescaled.as_ref().map(|(scores, _)| scores.as_slice()),
        args.tie_tol,
    )
    .map_err(from_report)?;
    table.dataset = label;
    let writer = open_output(&args.output.out)?;
    report::emit_comparison(&table, &dataset, &emit_options(&args.output), writer)
        .map_err(from_report)
}
