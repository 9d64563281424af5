//! Ranking, side-by-side comparison tables, and machine-readable output.
//!
//! Ranking is standard competition style ("1224"): tied entities share the
//! best rank and the next rank skips by the tie count. Ties are groups under
//! the transitive closure of "adjacent scores within tolerance", which is
//! the only grouping where any two scores within tolerance of each other are
//! guaranteed the same rank.

use crate::cwfit::{residual_stats, FitResult, Formula, Stats};
use crate::dataset::Dataset;
use crate::dea::DeaResult;
use serde_json::{json, Map, Value};
use std::io::{self, Write};
use thiserror::Error;

/// Default tie tolerance: frontier ties essentially only occur at 1.0.
pub const DEFAULT_TIE_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot rank an empty score vector")]
    EmptyScores,
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("tie tolerance must be non-negative, got {0}")]
    BadTieTolerance(f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Competition ranks, aligned with the score vector they were computed from.
#[derive(Debug, Clone)]
pub struct Ranks {
    pub ranks: Vec<usize>,
    pub tie_tolerance: f64,
}

/// Rank a score vector, best (largest) first.
pub fn rank(scores: &[f64], tie_tol: f64) -> Result<Ranks, ReportError> {
    if scores.is_empty() {
        return Err(ReportError::EmptyScores);
    }
    if tie_tol.is_nan() || tie_tol < 0.0 {
        return Err(ReportError::BadTieTolerance(tie_tol));
    }
    if let Some(i) = scores.iter().position(|v| !v.is_finite()) {
        return Err(ReportError::NonFiniteScore(i));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut ranks = vec![0usize; scores.len()];
    let mut group_start = 0;
    for k in 0..order.len() {
        if k > 0 && scores[order[k - 1]] - scores[order[k]] > tie_tol {
            group_start = k;
        }
        ranks[order[k]] = group_start + 1;
    }
    Ok(Ranks {
        ranks,
        tie_tolerance: tie_tol,
    })
}

/// One fitted method in a comparison table.
#[derive(Debug, Clone)]
pub struct FitColumn {
    pub label: String,
    pub scores: Vec<f64>,
    pub ranks: Vec<usize>,
    /// Residual statistics against the frontier scores.
    pub stats: Stats,
    pub formula: Formula,
}

/// The rescaled version of the first fitted column. Rescaling preserves
/// score ratios, so its ranking equals its source column's.
#[derive(Debug, Clone)]
pub struct RescaledColumn {
    pub source: String,
    pub scores: Vec<f64>,
    pub stats: Stats,
    pub factor: f64,
}

/// Frontier scores and any number of fitted columns, ranked per column.
#[derive(Debug, Clone)]
pub struct ComparisonTable {
    pub dataset: String,
    pub names: Vec<String>,
    pub dea_scores: Vec<f64>,
    pub dea_ranks: Vec<usize>,
    pub fits: Vec<FitColumn>,
    pub rescaled: Option<RescaledColumn>,
}

/// Assemble a comparison over one dataset: frontier result, fitted results
/// (label + result), and optionally a rescaled score vector belonging to the
/// first fit.
pub fn compare(
    d: &Dataset,
    dea: &DeaResult,
    fits: &[(&str, &FitResult)],
    rescaled: Option<&[f64]>,
    tie_tol: f64,
) -> Result<ComparisonTable, ReportError> {
    let n = d.n_entities();
    if dea.scores.len() != n {
        return Err(ReportError::LengthMismatch(format!(
            "{} frontier scores vs {n} entities",
            dea.scores.len()
        )));
    }
    let dea_ranks = rank(&dea.scores, tie_tol)?.ranks;
    let mut columns = Vec::with_capacity(fits.len());
    for (label, fit) in fits {
        if fit.predicted.len() != n {
            return Err(ReportError::LengthMismatch(format!(
                "fit `{label}` has {} scores vs {n} entities",
                fit.predicted.len()
            )));
        }
        let stats = residual_stats(&fit.predicted, &dea.scores)
            .map_err(|e| ReportError::LengthMismatch(e.to_string()))?;
        columns.push(FitColumn {
            label: label.to_string(),
            scores: fit.predicted.clone(),
            ranks: rank(&fit.predicted, tie_tol)?.ranks,
            stats,
            formula: fit.formula.clone(),
        });
    }
    let rescaled = match rescaled {
        Some(scores) => {
            if scores.len() != n {
                return Err(ReportError::LengthMismatch(format!(
                    "{} rescaled scores vs {n} entities",
                    scores.len()
                )));
            }
            let source = columns.first().map(|c| c.label.clone()).ok_or_else(|| {
                ReportError::LengthMismatch("rescaled scores need a source fit column".into())
            })?;
            let stats = residual_stats(scores, &dea.scores)
                .map_err(|e| ReportError::LengthMismatch(e.to_string()))?;
            // factor is recoverable from any entity; use the largest ratio
            // so it is exactly the rescale divisor.
            let factor = columns
                .first()
                .map(|c| {
                    c.scores
                        .iter()
                        .zip(scores)
                        .map(|(raw, r)| raw / r)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .unwrap_or(1.0);
            Some(RescaledColumn {
                source,
                scores: scores.to_vec(),
                stats,
                factor,
            })
        }
        None => None,
    };
    Ok(ComparisonTable {
        dataset: String::new(),
        names: d.names().to_vec(),
        dea_scores: dea.scores.clone(),
        dea_ranks,
        fits: columns,
        rescaled,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy)]
pub struct EmitOptions {
    pub format: EmitFormat,
    /// Default output rounds reals to 6 significant digits; set this for
    /// full shortest-round-trip precision.
    pub full_precision: bool,
}

impl Default for EmitOptions {
    fn default() -> Self {
        Self {
            format: EmitFormat::Json,
            full_precision: false,
        }
    }
}

/// Round to 6 significant digits unless full precision was requested.
fn sig(x: f64, opts: &EmitOptions) -> f64 {
    if opts.full_precision || x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = 10f64.powi(5 - x.abs().log10().floor() as i32);
    if !magnitude.is_finite() || magnitude == 0.0 {
        return x; // beyond the exponent range rounding can represent
    }
    (x * magnitude).round() / magnitude
}

fn num(x: f64, opts: &EmitOptions) -> Value {
    json!(sig(x, opts))
}

fn formula_block(
    f: &Formula,
    d_labels: Option<(&[String], &[String])>,
    opts: &EmitOptions,
) -> Value {
    let mut block = Map::new();
    block.insert(
        "output_weights".into(),
        Value::Array(f.output_weights.iter().map(|&w| num(w, opts)).collect()),
    );
    block.insert(
        "input_weights".into(),
        Value::Array(f.input_weights.iter().map(|&w| num(w, opts)).collect()),
    );
    block.insert("intercept".into(), num(f.intercept, opts));
    if let Some((input_labels, output_labels)) = d_labels {
        block.insert("input_labels".into(), json!(input_labels));
        block.insert("output_labels".into(), json!(output_labels));
    }
    Value::Object(block)
}

fn stats_block(s: &Stats, opts: &EmitOptions) -> Map<String, Value> {
    let mut block = Map::new();
    block.insert("mean_abs_dev".into(), num(s.mean_abs_dev, opts));
    block.insert("max_abs_dev".into(), num(s.max_abs_dev, opts));
    block.insert("sse".into(), num(s.sse, opts));
    block
}

/// Write a comparison table.
///
/// CSV columns: `dmu,dea_score,<fit>_score…,(rescaled after its source
/// fit),dea_rank,<fit>_rank…`. JSON top level:
/// `{dataset, methods, entities, formulas, stats}`.
pub fn emit_comparison<W: Write>(
    t: &ComparisonTable,
    d: &Dataset,
    opts: &EmitOptions,
    mut w: W,
) -> Result<(), ReportError> {
    match opts.format {
        EmitFormat::Csv => {
            let mut header = vec!["dmu".to_string(), "dea_score".to_string()];
            for (k, f) in t.fits.iter().enumerate() {
                header.push(format!("{}_score", f.label));
                if k == 0 {
                    if let Some(r) = &t.rescaled {
                        header.push(format!("{}_rescaled", r.source));
                    }
                }
            }
            header.push("dea_rank".to_string());
            for f in &t.fits {
                header.push(format!("{}_rank", f.label));
            }
            writeln!(w, "{}", header.join(","))?;
            for i in 0..t.names.len() {
                let mut row = vec![t.names[i].clone(), fmt(t.dea_scores[i], opts)];
                for (k, f) in t.fits.iter().enumerate() {
                    row.push(fmt(f.scores[i], opts));
                    if k == 0 {
                        if let Some(r) = &t.rescaled {
                            row.push(fmt(r.scores[i], opts));
                        }
                    }
                }
                row.push(t.dea_ranks[i].to_string());
                for f in &t.fits {
                    row.push(f.ranks[i].to_string());
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        EmitFormat::Json => {
            let mut methods = vec!["dea".to_string()];
            for (k, f) in t.fits.iter().enumerate() {
                methods.push(f.label.clone());
                if k == 0 {
                    if let Some(r) = &t.rescaled {
                        methods.push(format!("{}_rescaled", r.source));
                    }
                }
            }
            let entities: Vec<Value> = (0..t.names.len())
                .map(|i| {
                    let mut e = Map::new();
                    e.insert("dmu".into(), json!(t.names[i]));
                    e.insert("dea_score".into(), num(t.dea_scores[i], opts));
                    e.insert("dea_rank".into(), json!(t.dea_ranks[i]));
                    for (k, f) in t.fits.iter().enumerate() {
                        e.insert(format!("{}_score", f.label), num(f.scores[i], opts));
                        e.insert(format!("{}_rank", f.label), json!(f.ranks[i]));
                        if k == 0 {
                            if let Some(r) = &t.rescaled {
                                e.insert(format!("{}_rescaled", r.source), num(r.scores[i], opts));
                            }
                        }
                    }
                    Value::Object(e)
                })
                .collect();
            let mut formulas = Map::new();
            for f in &t.fits {
                formulas.insert(
                    f.label.clone(),
                    formula_block(
                        &f.formula,
                        Some((d.input_labels(), d.output_labels())),
                        opts,
                    ),
                );
            }
            let mut stats = Map::new();
            for f in &t.fits {
                stats.insert(f.label.clone(), Value::Object(stats_block(&f.stats, opts)));
            }
            if let Some(r) = &t.rescaled {
                let mut block = stats_block(&r.stats, opts);
                block.insert("factor".into(), num(r.factor, opts));
                stats.insert(format!("{}_rescaled", r.source), Value::Object(block));
            }
            let doc = json!({
                "dataset": t.dataset,
                "methods": methods,
                "entities": entities,
                "formulas": formulas,
                "stats": stats,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
    }
    Ok(())
}

/// Write frontier scores, multipliers, and zero-weight diagnostics.
pub fn emit_dea<W: Write>(
    dataset_label: &str,
    d: &Dataset,
    r: &DeaResult,
    ranks: &Ranks,
    opts: &EmitOptions,
    mut w: W,
) -> Result<(), ReportError> {
    match opts.format {
        EmitFormat::Csv => {
            let mut header = vec![
                "dmu".to_string(),
                "dea_score".to_string(),
                "dea_rank".to_string(),
            ];
            for label in d.input_labels() {
                header.push(format!("weight:input:{label}"));
            }
            for label in d.output_labels() {
                header.push(format!("weight:output:{label}"));
            }
            for label in d.column_labels() {
                header.push(format!("zero:{label}"));
            }
            writeln!(w, "{}", header.join(","))?;
            for i in 0..d.n_entities() {
                let mut row = vec![
                    d.names()[i].clone(),
                    fmt(r.scores[i], opts),
                    ranks.ranks[i].to_string(),
                ];
                for v in &r.multipliers[i].input_weights {
                    row.push(fmt(*v, opts));
                }
                for v in &r.multipliers[i].output_weights {
                    row.push(fmt(*v, opts));
                }
                for flag in &r.zero_flags[i] {
                    row.push(flag.to_string());
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        EmitFormat::Json => {
            let labels = d.column_labels();
            let entities: Vec<Value> = (0..d.n_entities())
                .map(|i| {
                    let zeroed: Vec<&String> = labels
                        .iter()
                        .zip(&r.zero_flags[i])
                        .filter(|(_, &z)| z)
                        .map(|(l, _)| l)
                        .collect();
                    json!({
                        "dmu": d.names()[i],
                        "score": num(r.scores[i], opts),
                        "rank": ranks.ranks[i],
                        "input_weights": r.multipliers[i]
                            .input_weights.iter().map(|&v| num(v, opts)).collect::<Vec<_>>(),
                        "output_weights": r.multipliers[i]
                            .output_weights.iter().map(|&v| num(v, opts)).collect::<Vec<_>>(),
                        "zero_factors": zeroed,
                    })
                })
                .collect();
            let mut zero_counts = Map::new();
            for (k, label) in labels.iter().enumerate() {
                let count = r.zero_flags.iter().filter(|flags| flags[k]).count();
                zero_counts.insert(label.clone(), json!(count));
            }
            let doc = json!({
                "dataset": dataset_label,
                "input_labels": d.input_labels(),
                "output_labels": d.output_labels(),
                "entities": entities,
                "zero_counts": zero_counts,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
    }
    Ok(())
}

/// Write one fitted result: the formula block plus statistics and scores.
pub fn emit_fit<W: Write>(
    dataset_label: &str,
    d: &Dataset,
    fits: &[(&str, &FitResult)],
    rescaled: Option<(&str, &[f64], f64)>,
    opts: &EmitOptions,
    mut w: W,
) -> Result<(), ReportError> {
    match opts.format {
        EmitFormat::Csv => {
            let mut header = vec!["dmu".to_string()];
            for (label, _) in fits {
                header.push(format!("{label}_score"));
            }
            if let Some((label, _, _)) = rescaled {
                header.push(label.to_string());
            }
            writeln!(w, "{}", header.join(","))?;
            for i in 0..d.n_entities() {
                let mut row = vec![d.names()[i].clone()];
                for (_, fit) in fits {
                    row.push(fmt(fit.predicted[i], opts));
                }
                if let Some((_, scores, _)) = rescaled {
                    row.push(fmt(scores[i], opts));
                }
                writeln!(w, "{}", row.join(","))?;
            }
        }
        EmitFormat::Json => {
            let mut formulas = Map::new();
            let mut stats = Map::new();
            let mut provenance = Map::new();
            for (label, fit) in fits {
                formulas.insert(
                    label.to_string(),
                    formula_block(
                        &fit.formula,
                        Some((d.input_labels(), d.output_labels())),
                        opts,
                    ),
                );
                let s = Stats {
                    mean_abs_dev: fit.mean_abs_dev,
                    max_abs_dev: fit.max_abs_dev,
                    sse: fit.sse,
                };
                let mut block = stats_block(&s, opts);
                block.insert("feasible".into(), json!(fit.feasible));
                stats.insert(label.to_string(), Value::Object(block));
                provenance.insert(
                    label.to_string(),
                    json!({
                        "n_starts": fit.n_starts,
                        "seed": fit.seed,
                        "converged_starts": fit.converged_starts,
                        "warnings": fit.warnings,
                    }),
                );
            }
            let entities: Vec<Value> = (0..d.n_entities())
                .map(|i| {
                    let mut e = Map::new();
                    e.insert("dmu".into(), json!(d.names()[i]));
                    for (label, fit) in fits {
                        e.insert(format!("{label}_score"), num(fit.predicted[i], opts));
                    }
                    if let Some((label, scores, _)) = rescaled {
                        e.insert(label.to_string(), num(scores[i], opts));
                    }
                    Value::Object(e)
                })
                .collect();
            if let Some((label, _, factor)) = rescaled {
                stats.insert(label.to_string(), json!({ "factor": num(factor, opts) }));
            }
            let doc = json!({
                "dataset": dataset_label,
                "formulas": formulas,
                "stats": stats,
                "provenance": provenance,
                "entities": entities,
            });
            writeln!(w, "{}", serde_json::to_string_pretty(&doc)?)?;
        }
    }
    Ok(())
}

/// Write a plain (name, score, rank) listing.
pub fn emit_scores<W: Write>(
    names: &[String],
    scores: &[f64],
    ranks: Option<&Ranks>,
    opts: &EmitOptions,
    mut w: W,
) -> Result<(), ReportError> {
    match opts.format {
        EmitFormat::Csv => {
            writeln!(w, "dmu,score{}", if ranks.is_some() { ",rank" } else { "" })?;
            for i in 0..names.len() {
                match ranks {
                    Some(r) => writeln!(w, "{},{},{}", names[i], fmt(scores[i], opts), r.ranks[i])?,
                    None => writeln!(w, "{},{}", names[i], fmt(scores[i], opts))?,
                }
            }
        }
        EmitFormat::Json => {
            let entities: Vec<Value> = (0..names.len())
                .map(|i| {
                    let mut e = Map::new();
                    e.insert("dmu".into(), json!(names[i]));
                    e.insert("score".into(), num(scores[i], opts));
                    if let Some(r) = ranks {
                        e.insert("rank".into(), json!(r.ranks[i]));
                    }
                    Value::Object(e)
                })
                .collect();
            writeln!(
                w,
                "{}",
                serde_json::to_string_pretty(&json!({ "entities": entities }))?
            )?;
        }
    }
    Ok(())
}

/// Dataset writer for the self-describing CSV format; exact round trip
/// through [`Dataset::parse_csv`] for values representable in shortest form.
pub fn dataset_to_csv(d: &Dataset) -> String {
    let mut out = String::from("dmu");
    for label in d.input_labels() {
        out.push_str(&format!(",input:{label}"));
    }
    for label in d.output_labels() {
        out.push_str(&format!(",output:{label}"));
    }
    out.push('\n');
    for i in 0..d.n_entities() {
        out.push_str(&d.names()[i]);
        for v in d.input_row(i) {
            out.push_str(&format!(",{v}"));
        }
        for v in d.output_row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

fn fmt(x: f64, opts: &EmitOptions) -> String {
    format!("{}", sig(x, opts))
}
