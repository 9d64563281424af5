//! Known-truth test data: pick a true single-input cost formula, generate
//! entities whose cost is their efficient cost divided by a chosen
//! efficiency, and measure how well the fitting pipeline recovers the true
//! weights and scores afterwards.

use crate::cwfit::{canonicalize, predict, FitError, Formula, Normalization};
use crate::dataset::Dataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("true formula must have exactly one input weight, found {0}")]
    NotSingleInput(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("efficiency at position {index} must be in (0, 1], got {value}")]
    BadEfficiency { index: usize, value: f64 },
    #[error("entity {index}: efficient cost {value} is not positive")]
    ZeroEfficientCost { index: usize, value: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("dataset construction failed: {0}")]
    Data(#[from] crate::dataset::DataError),
}

/// A generation recipe: true weights (single input, normalized to v = 1),
/// output levels, and the efficiency each entity should end up with.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub true_formula: Formula,
    pub output_levels: Vec<Vec<f64>>,
    pub efficiencies: Vec<f64>,
    pub names: Vec<String>,
    pub output_labels: Vec<String>,
}

impl SynthSpec {
    /// Validates shapes and normalizes the formula to a unit input weight.
    /// Entity names default to U1..Un.
    pub fn new(
        true_formula: Formula,
        output_levels: Vec<Vec<f64>>,
        efficiencies: Vec<f64>,
    ) -> Result<Self, SynthError> {
        let names = (1..=output_levels.len()).map(|i| format!("U{i}")).collect();
        Self::with_names(true_formula, output_levels, efficiencies, names)
    }

    pub fn with_names(
        true_formula: Formula,
        output_levels: Vec<Vec<f64>>,
        efficiencies: Vec<f64>,
        names: Vec<String>,
    ) -> Result<Self, SynthError> {
        if true_formula.input_weights.len() != 1 {
            return Err(SynthError::NotSingleInput(true_formula.input_weights.len()));
        }
        let true_formula = canonicalize(&true_formula, Normalization::UnitInput)
            .map_err(|_| SynthError::NotSingleInput(0))?;
        let n = output_levels.len();
        if efficiencies.len() != n || names.len() != n || n == 0 {
            return Err(SynthError::DimensionMismatch(format!(
                "{n} output rows, {} efficiencies, {} names",
                efficiencies.len(),
                names.len()
            )));
        }
        let s = true_formula.output_weights.len();
        if let Some(row) = output_levels.iter().find(|r| r.len() != s) {
            return Err(SynthError::DimensionMismatch(format!(
                "output row of width {} vs {s} true weights",
                row.len()
            )));
        }
        for (index, &value) in efficiencies.iter().enumerate() {
            if !(value.is_finite() && value > 0.0 && value <= 1.0) {
                return Err(SynthError::BadEfficiency { index, value });
            }
        }
        for (index, row) in output_levels.iter().enumerate() {
            let efficient_cost: f64 = true_formula
                .output_weights
                .iter()
                .zip(row)
                .map(|(w, y)| w * y)
                .sum();
            if !(efficient_cost.is_finite() && efficient_cost > 0.0) {
                return Err(SynthError::ZeroEfficientCost {
                    index,
                    value: efficient_cost,
                });
            }
        }
        let output_labels = (1..=s).map(|r| format!("y{r}")).collect();
        Ok(Self {
            true_formula,
            output_levels,
            efficiencies,
            names,
            output_labels,
        })
    }

    pub fn with_output_labels(mut self, labels: Vec<String>) -> Result<Self, SynthError> {
        if labels.len() != self.true_formula.output_weights.len() {
            return Err(SynthError::DimensionMismatch(format!(
                "{} labels vs {} outputs",
                labels.len(),
                self.true_formula.output_weights.len()
            )));
        }
        self.output_labels = labels;
        Ok(self)
    }

    pub fn n_entities(&self) -> usize {
        self.output_levels.len()
    }
}

/// Per-coefficient relative errors between two formulas (both normalized to
/// a unit input weight) plus the gap between their score vectors on a
/// dataset.
#[derive(Debug, Clone)]
pub struct RecoveryMetrics {
    pub coefficient_rel_errors: Vec<f64>,
    pub max_score_error: f64,
    pub mean_score_error: f64,
}

/// Deterministically expand a recipe into a dataset: outputs are taken as
/// given and the single input is `efficient cost / efficiency`, so the true
/// score of each entity is the efficiency it was generated with.
pub fn generate(spec: &SynthSpec) -> Result<Dataset, SynthError> {
    let u = &spec.true_formula.output_weights;
    let mut costs = Vec::with_capacity(spec.n_entities());
    for (index, row) in spec.output_levels.iter().enumerate() {
        let efficient_cost: f64 = u.iter().zip(row).map(|(w, y)| w * y).sum();
        if efficient_cost <= 0.0 {
            return Err(SynthError::ZeroEfficientCost {
                index,
                value: efficient_cost,
            });
        }
        costs.push(vec![efficient_cost / spec.efficiencies[index]]);
    }
    Ok(Dataset::new(
        spec.names.clone(),
        vec!["Cost".into()],
        spec.output_labels.clone(),
        costs,
        spec.output_levels.clone(),
    )?)
}

/// Score a single-input dataset under a formula: weighted outputs over the
/// bare input. Identical to [`predict`] with v = (1); exposed separately
/// because "true score" and "fitted score" are different intents.
pub fn true_scores(d: &Dataset, f: &Formula) -> Result<Vec<f64>, SynthError> {
    if d.n_inputs() != 1 {
        return Err(SynthError::NotSingleInput(d.n_inputs()));
    }
    if f.output_weights.len() != d.n_outputs() || f.input_weights.len() != 1 {
        return Err(SynthError::DimensionMismatch(format!(
            "formula {}×{} vs dataset {}×1",
            f.output_weights.len(),
            f.input_weights.len(),
            d.n_outputs()
        )));
    }
    Ok(predict(f, d)?)
}

/// Compare a fitted single-input formula against the true one: both are
/// normalized to v = (1), coefficients are compared relatively, and the two
/// score vectors are compared on `d`.
pub fn recovery_error(
    true_f: &Formula,
    fitted_f: &Formula,
    d: &Dataset,
) -> Result<RecoveryMetrics, SynthError> {
    if true_f.output_weights.len() != fitted_f.output_weights.len() {
        return Err(SynthError::DimensionMismatch(format!(
            "{} true vs {} fitted output weights",
            true_f.output_weights.len(),
            fitted_f.output_weights.len()
        )));
    }
    let t = canonicalize(true_f, Normalization::UnitInput)?;
    let f = canonicalize(fitted_f, Normalization::UnitInput)?;
    let coefficient_rel_errors = t
        .output_weights
        .iter()
        .zip(&f.output_weights)
        .map(|(a, b)| {
            if a.abs() > 1e-300 {
                (a - b).abs() / a.abs()
            } else {
                b.abs()
            }
        })
        .collect();
    let ts = true_scores(d, &t)?;
    let fs = true_scores(d, &f)?;
    let mut max_score_error = 0.0f64;
    let mut sum = 0.0;
    for (a, b) in ts.iter().zip(&fs) {
        let e = (a - b).abs();
        max_score_error = max_score_error.max(e);
        sum += e;
    }
    Ok(RecoveryMetrics {
        coefficient_rel_errors,
        max_score_error,
        mean_score_error: sum / ts.len() as f64,
    })
}

/// Seeded random recipe in the style of the reference experiment: a handful
/// of efficient units with deliberately diverse output mixes (each output
/// dimension dominant somewhere), and inefficient units whose output vectors
/// are positive mixtures of the efficient ones. The mixture structure keeps
/// the frontier tight around the true weights, which is what makes weight
/// recovery measurable at all.
pub fn random_spec(seed: u64, n: usize, s: usize, n_efficient: usize) -> SynthSpec {
    assert!(s >= 1 && n_efficient >= s && n > n_efficient);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let true_weights: Vec<f64> = (0..s).map(|_| rng.random_range(0.1..1.0)).collect();

    let mut efficient_rows: Vec<Vec<f64>> = Vec::with_capacity(n_efficient);
    for k in 0..n_efficient {
        let mut mix: Vec<f64> = (0..s).map(|_| rng.random_range(0.05..0.3)).collect();
        mix[k % s] += rng.random_range(0.7..1.5);
        let total: f64 = mix.iter().sum();
        let scale = rng.random_range(2000.0..12000.0);
        efficient_rows.push(mix.iter().map(|m| m / total * scale).collect());
    }

    let mut rows = efficient_rows.clone();
    let mut efficiencies = vec![1.0; n_efficient];
    for _ in n_efficient..n {
        let mut weights: Vec<f64> = (0..n_efficient).map(|_| rng.random::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let scale = rng.random_range(0.6..1.4);
        let mut row = vec![0.0; s];
        for (w, src) in weights.iter().zip(&efficient_rows) {
            for (acc, y) in row.iter_mut().zip(src) {
                *acc += w * y * scale;
            }
        }
        rows.push(row);
        efficiencies.push(rng.random_range(0.7..1.0));
    }

    // Shuffle so efficient units are not clustered at the top.
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
        efficiencies.swap(i, j);
    }

    SynthSpec::new(Formula::new(true_weights, vec![1.0]), rows, efficiencies)
        .expect("generated recipe is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::BOWLIN15_TRUE_WEIGHTS;

    fn true_formula() -> Formula {
        Formula::new(BOWLIN15_TRUE_WEIGHTS.to_vec(), vec![1.0])
    }

    #[test]
    fn generate_reproduces_reference_costs() {
        let spec = SynthSpec::new(
            true_formula(),
            vec![vec![100.0, 3000.0, 2000.0], vec![50.0, 3000.0, 2000.0]],
            vec![0.9048, 1.0],
        )
        .unwrap();
        let d = generate(&spec).unwrap();
        assert!((d.input_row(0)[0] - 884.75).abs() <= 0.01);
        assert!((d.input_row(1)[0] - 775.5).abs() <= 0.05);
    }

    #[test]
    fn efficiency_one_means_cost_equals_efficient_cost() {
        let spec = SynthSpec::new(
            Formula::new(vec![2.0, 3.0], vec![1.0]),
            vec![vec![10.0, 20.0]],
            vec![1.0],
        )
        .unwrap();
        let d = generate(&spec).unwrap();
        assert_eq!(d.input_row(0)[0], 80.0);
    }

    #[test]
    fn zero_efficient_cost_is_rejected() {
        // At construction time…
        assert!(matches!(
            SynthSpec::new(
                Formula::new(vec![1.0], vec![1.0]),
                vec![vec![0.0]],
                vec![1.0],
            ),
            Err(SynthError::ZeroEfficientCost { .. })
        ));
        // …and again at generation, since the fields are public.
        let mut spec = SynthSpec::new(
            Formula::new(vec![1.0], vec![1.0]),
            vec![vec![2.0]],
            vec![1.0],
        )
        .unwrap();
        spec.output_levels[0][0] = 0.0;
        assert!(matches!(
            generate(&spec),
            Err(SynthError::ZeroEfficientCost { .. })
        ));
    }

    #[test]
    fn true_scores_match_reference_table() {
        let d = Dataset::builtin("bowlin15").unwrap();
        let scores = true_scores(&d, &true_formula()).unwrap();
        let check = [(0usize, 1.00), (9, 0.85), (12, 0.96), (14, 0.86)];
        for (idx, want) in check {
            assert!(
                (scores[idx] - want).abs() <= 0.005,
                "H{}: {} vs {want}",
                idx + 1,
                scores[idx]
            );
        }
    }

    #[test]
    fn round_trip_recovers_efficiencies() {
        let spec = random_spec(99, 15, 3, 7);
        let d = generate(&spec).unwrap();
        let scores = true_scores(&d, &spec.true_formula).unwrap();
        for (got, want) in scores.iter().zip(&spec.efficiencies) {
            assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn recovery_error_of_identical_formulas_is_zero() {
        let d = Dataset::builtin("bowlin15").unwrap();
        let m = recovery_error(&true_formula(), &true_formula(), &d).unwrap();
        assert!(m.coefficient_rel_errors.iter().all(|&e| e == 0.0));
        assert_eq!(m.max_score_error, 0.0);
    }

    #[test]
    fn recovery_error_against_published_fit() {
        let d = Dataset::builtin("bowlin15").unwrap();
        let fitted = Formula::new(vec![0.488, 0.13420, 0.17243], vec![1.0]);
        let m = recovery_error(&true_formula(), &fitted, &d).unwrap();
        assert!(m.coefficient_rel_errors.iter().all(|&e| e <= 0.03));
        assert!((m.coefficient_rel_errors[0] - 0.024).abs() <= 0.001);
        assert!(m.max_score_error <= 0.01);
    }

    #[test]
    fn recovery_error_exposes_direct_regression_bias() {
        let d = Dataset::builtin("bowlin15").unwrap();
        let direct = Formula::new(vec![1.1054, 0.14811, 0.16198], vec![1.0]);
        let m = recovery_error(&true_formula(), &direct, &d).unwrap();
        assert!(
            (m.coefficient_rel_errors[0] - 1.21).abs() <= 0.01,
            "TU error {}",
            m.coefficient_rel_errors[0]
        );
    }

    #[test]
    fn random_specs_generate_valid_datasets() {
        for seed in 0..5 {
            let spec = random_spec(seed, 14, 3, 6);
            let d = generate(&spec).unwrap();
            let report = d.validate();
            assert!(report.is_valid(), "{:?}", report.errors);
        }
    }
}
