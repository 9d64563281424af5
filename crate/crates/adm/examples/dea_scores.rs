//! Frontier (CCR) scores on the 14-hospital data: every entity gets the
//! most favorable weights it could ask for, and the zero-weight diagnostics
//! show the price of that flexibility — factors silently dropped from an
//! entity's own assessment.
//!
//! ```bash
//! cargo run --example dea_scores
//! ```

use adm::dataset::Dataset;
use adm::dea::{ccr_scores, zero_weight_diagnostics, DEFAULT_ZERO_TOL};
use adm::report::{rank, DEFAULT_TIE_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::builtin("hospital14")?;
    let result = ccr_scores(&data)?;
    let ranks = rank(&result.scores, DEFAULT_TIE_TOL)?;
    let labels = data.column_labels();

    println!(
        "{:<4} {:>7} {:>5}  zero-weight factors",
        "dmu", "score", "rank"
    );
    for i in 0..data.n_entities() {
        let zeroed: Vec<&str> = labels
            .iter()
            .zip(&result.zero_flags[i])
            .filter(|(_, &z)| z)
            .map(|(l, _)| l.as_str())
            .collect();
        println!(
            "{:<4} {:>7.3} {:>5}  {}",
            data.names()[i],
            result.scores[i],
            ranks.ranks[i],
            zeroed.join(", ")
        );
    }

    let report = zero_weight_diagnostics(&result, DEFAULT_ZERO_TOL);
    println!("\nentities ignoring each factor:");
    for (label, count) in labels.iter().zip(&report.factor_counts) {
        println!("  {label:<12} {count}");
    }
    let efficient = result.scores.iter().filter(|&&s| s >= 1.0 - 1e-9).count();
    println!(
        "\n{efficient} of {} entities sit on the frontier.",
        data.n_entities()
    );
    Ok(())
}
