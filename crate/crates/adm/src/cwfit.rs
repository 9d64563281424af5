//! Common-weights scoring formulas fitted to a target score vector by
//! least squares on the weighted output/input ratio, in two variants:
//! plain nonlinear least squares, and a one-sided fit whose predictions
//! never exceed the targets (the targets are optimistic upper bounds).
//!
//! The objective is invariant to jointly scaling all weights, so the
//! optimizer pins a gauge internally and [`canonicalize`] fixes the
//! presentation afterwards (leading output weight = 1, or unit input
//! weight for single-input reporting).

mod optim;

use crate::dataset::Dataset;
use crate::dea::DeaError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("entity `{entity}`: weighted input denominator {value} is not positive")]
    NonPositiveDenominator { entity: String, value: f64 },
    #[error("target value at position {index} must be positive and finite, got {value}")]
    BadTarget { index: usize, value: f64 },
    #[error("score at position {index} must be positive for rescaling, got {value}")]
    NonPositiveScore { index: usize, value: f64 },
    #[error("no weight above 1e-9 to normalize by")]
    NoCanonicalWeight,
    #[error("direct regression needs exactly one input column, dataset has {0}")]
    MultipleInputs(usize),
    #[error("normal equations are singular ({0})")]
    Singular(String),
    #[error("no optimizer start converged ({0} attempted)")]
    NoConvergence(usize),
    #[error("degenerate fit: optimum has no usable weights")]
    DegenerateFit,
    #[error("bad fit option: {0}")]
    BadOptions(String),
    #[error(transparent)]
    Dea(#[from] DeaError),
}

/// A common weight set: the deliverable scoring formula
/// `score = (u · outputs) / (v · inputs) + intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    pub output_weights: Vec<f64>,
    pub input_weights: Vec<f64>,
    #[serde(default)]
    pub intercept: f64,
}

impl Formula {
    pub fn new(output_weights: Vec<f64>, input_weights: Vec<f64>) -> Self {
        Self {
            output_weights,
            input_weights,
            intercept: 0.0,
        }
    }

    pub fn with_intercept(mut self, intercept: f64) -> Self {
        self.intercept = intercept;
        self
    }
}

/// Which weight the canonical form pins to 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// Divide everything by the first output weight above 1e-9.
    LeadingOutput,
    /// Divide everything by the first input weight (single-input reporting
    /// style, so the denominator reads as the bare input).
    UnitInput,
}

/// Options shared by both fit variants. Defaults mirror the headline runs:
/// 50 seeded random starts plus the deterministic ones.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub intercept: bool,
    pub n_starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Convergence test on the squared norm of the projected gradient.
    pub gradient_tolerance: f64,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub feasibility_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            intercept: false,
            n_starts: 50,
            seed: 42,
            max_iterations: 600,
            gradient_tolerance: 1e-10,
            penalty_initial: 10.0,
            penalty_growth: 10.0,
            feasibility_tolerance: 1e-8,
        }
    }
}

impl FitOptions {
    pub(crate) fn check(&self) -> Result<(), FitError> {
        if self.max_iterations == 0 {
            return Err(FitError::BadOptions(
                "max_iterations must be positive".into(),
            ));
        }
        for (name, value) in [
            ("gradient_tolerance", self.gradient_tolerance),
            ("penalty_initial", self.penalty_initial),
            ("feasibility_tolerance", self.feasibility_tolerance),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(FitError::BadOptions(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.penalty_growth.is_finite() && self.penalty_growth > 1.0) {
            return Err(FitError::BadOptions(format!(
                "penalty_growth must exceed 1, got {}",
                self.penalty_growth
            )));
        }
        Ok(())
    }
}

/// A fitted formula with its predictions, residuals (target − predicted),
/// summary statistics, and optimizer provenance.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub formula: Formula,
    pub predicted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sse: f64,
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
    /// True when every residual is ≥ −feasibility tolerance, i.e. no
    /// prediction exceeds its target.
    pub feasible: bool,
    pub n_starts: usize,
    pub seed: u64,
    pub converged_starts: usize,
    pub warnings: Vec<String>,
}

/// Residual summary: mean and max of |target − predicted| plus the sum of
/// squared residuals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean_abs_dev: f64,
    pub max_abs_dev: f64,
    pub sse: f64,
}

/// Score every entity of `d` with formula `f`.
pub fn predict(f: &Formula, d: &Dataset) -> Result<Vec<f64>, FitError> {
    if f.output_weights.len() != d.n_outputs() || f.input_weights.len() != d.n_inputs() {
        return Err(FitError::DimensionMismatch(format!(
            "formula is {}×{} but dataset is {}×{} (outputs×inputs)",
            f.output_weights.len(),
            f.input_weights.len(),
            d.n_outputs(),
            d.n_inputs()
        )));
    }
    let mut scores = Vec::with_capacity(d.n_entities());
    for i in 0..d.n_entities() {
        let den: f64 = f
            .input_weights
            .iter()
            .zip(d.input_row(i))
            .map(|(w, x)| w * x)
            .sum();
        if den <= 0.0 {
            return Err(FitError::NonPositiveDenominator {
                entity: d.names()[i].clone(),
                value: den,
            });
        }
        let num: f64 = f
            .output_weights
            .iter()
            .zip(d.output_row(i))
            .map(|(w, y)| w * y)
            .sum();
        scores.push(num / den + f.intercept);
    }
    Ok(scores)
}

/// Fit the ratio formula by plain least squares over non-negative weights.
pub fn fit_ols(d: &Dataset, target: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
    optim::fit(d, target, opts, optim::Variant::Unconstrained)
}

/// Fit with one-sided residuals: no prediction may exceed its target (plus
/// the feasibility tolerance). The rescaled plain-least-squares solution is
/// always among the candidate starts, so the returned sum of squares never
/// exceeds what rescaling after [`fit_ols`] would give.
pub fn fit_constrained(
    d: &Dataset,
    target: &[f64],
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    optim::fit(d, target, opts, optim::Variant::OneSided)
}

/// Divide all formula scores by `max(formula / reference)` so no score
/// exceeds its reference while ratios between scores are preserved; at
/// least one entity ends up exactly touching its reference score.
pub fn rescale(formula_scores: &[f64], dea_scores: &[f64]) -> Result<(Vec<f64>, f64), FitError> {
    if formula_scores.len() != dea_scores.len() {
        return Err(FitError::DimensionMismatch(format!(
            "{} formula scores vs {} reference scores",
            formula_scores.len(),
            dea_scores.len()
        )));
    }
    for (index, &v) in formula_scores.iter().chain(dea_scores.iter()).enumerate() {
        if !(v.is_finite() && v > 0.0) {
            return Err(FitError::NonPositiveScore {
                index: index % formula_scores.len(),
                value: v,
            });
        }
    }
    let factor = formula_scores
        .iter()
        .zip(dea_scores)
        .map(|(f, d)| f / d)
        .fold(f64::NEG_INFINITY, f64::max);
    let rescaled = formula_scores.iter().map(|f| f / factor).collect();
    Ok((rescaled, factor))
}

/// Rewrite a formula in canonical form. Predictions are unchanged (the
/// ratio is invariant to jointly scaling all weights); the intercept is not
/// scale-coupled and is left alone.
pub fn canonicalize(f: &Formula, normalization: Normalization) -> Result<Formula, FitError> {
    let divisor = match normalization {
        Normalization::LeadingOutput => f
            .output_weights
            .iter()
            .copied()
            .find(|&w| w > 1e-9)
            .ok_or(FitError::NoCanonicalWeight)?,
        Normalization::UnitInput => {
            let w = *f.input_weights.first().ok_or(FitError::NoCanonicalWeight)?;
            if w <= 1e-9 {
                return Err(FitError::NoCanonicalWeight);
            }
            w
        }
    };
    Ok(Formula {
        output_weights: f.output_weights.iter().map(|w| w / divisor).collect(),
        input_weights: f.input_weights.iter().map(|w| w / divisor).collect(),
        intercept: f.intercept,
    })
}

/// Mean and max absolute deviation plus sum of squares of
/// `target − predicted`.
pub fn residual_stats(predicted: &[f64], target: &[f64]) -> Result<Stats, FitError> {
    if predicted.len() != target.len() {
        return Err(FitError::DimensionMismatch(format!(
            "{} predicted vs {} target values",
            predicted.len(),
            target.len()
        )));
    }
    if predicted.is_empty() {
        return Err(FitError::DimensionMismatch("empty score vectors".into()));
    }
    let mut sum_abs = 0.0;
    let mut max_abs = 0.0f64;
    let mut sse = 0.0;
    for (&p, &t) in predicted.iter().zip(target) {
        let r = t - p;
        sum_abs += r.abs();
        max_abs = max_abs.max(r.abs());
        sse += r * r;
    }
    Ok(Stats {
        mean_abs_dev: sum_abs / predicted.len() as f64,
        max_abs_dev: max_abs,
        sse,
    })
}

/// The single-input regression baseline: ordinary least squares of the
/// input on the outputs (no intercept), solved in closed form through the
/// normal equations. Models average behaviour, not relative performance —
/// kept as a contrast to the two-step fit.
pub fn direct_regression(d: &Dataset) -> Result<Formula, FitError> {
    if d.n_inputs() != 1 {
        return Err(FitError::MultipleInputs(d.n_inputs()));
    }
    let s = d.n_outputs();
    let n = d.n_entities();
    // Normal equations YᵀY u = Yᵀx on columns rescaled to unit maximum.
    let ky = d.output_column_maxima();
    let mut ata = vec![vec![0.0; s]; s];
    let mut atb = vec![0.0; s];
    for i in 0..n {
        let y = d.output_row(i);
        let x = d.input_row(i)[0];
        for r in 0..s {
            let yr = y[r] / ky[r];
            atb[r] += yr * x;
            for c in 0..s {
                ata[r][c] += yr * y[c] / ky[c];
            }
        }
    }
    let u_scaled = solve_spd(&mut ata, &mut atb)?;
    let output_weights = u_scaled.iter().zip(&ky).map(|(u, k)| u / k).collect();
    Ok(Formula::new(output_weights, vec![1.0]))
}

/// Gaussian elimination with partial pivoting for the tiny symmetric
/// systems above; reports singularity instead of dividing by ~0.
fn solve_spd(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<Vec<f64>, FitError> {
    let n = b.len();
    let scale: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        if a[piv][col].abs() < 1e-12 * scale {
            return Err(FitError::Singular(format!(
                "pivot {:.2e} at column {col}",
                a[piv][col]
            )));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                let (pivot_row, work_row) = if row < col {
                    let (head, tail) = a.split_at_mut(col);
                    (&tail[0], &mut head[row])
                } else {
                    let (head, tail) = a.split_at_mut(row);
                    (&head[col], &mut tail[0])
                };
                for (slot, &p) in work_row[col..n].iter_mut().zip(&pivot_row[col..n]) {
                    *slot -= f * p;
                }
                b[row] -= f * b[col];
            }
        }
    }
    Ok((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Sum of squared residuals of `predict(f, d)` against `target`, together
/// with its analytic gradient with respect to
/// `[output_weights…, input_weights…, intercept]`. Shares the derivative
/// code with the optimizer, so finite-difference tests of this function
/// validate the optimizer's Jacobian as well.
pub fn sse_and_gradient(
    f: &Formula,
    d: &Dataset,
    target: &[f64],
) -> Result<(f64, Vec<f64>), FitError> {
    if target.len() != d.n_entities() {
        return Err(FitError::DimensionMismatch(format!(
            "{} targets vs {} entities",
            target.len(),
            d.n_entities()
        )));
    }
    optim::sse_and_gradient(f, d, target)
}
