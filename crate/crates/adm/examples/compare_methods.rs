//! Side-by-side comparison of frontier scores, the plain fit (raw and
//! rescaled), and the one-sided fit, with competition ranks per column —
//! the full picture a decision maker would look at.
//!
//! ```bash
//! cargo run --example compare_methods
//! ```

use adm::cwfit::{fit_constrained, fit_ols, rescale, FitOptions};
use adm::dataset::Dataset;
use adm::dea::ccr_scores;
use adm::report::{compare, emit_comparison, EmitFormat, EmitOptions, DEFAULT_TIE_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::builtin("hospital14")?;
    let frontier = ccr_scores(&data)?;
    let opts = FitOptions::default();

    let ols = fit_ols(&data, &frontier.scores, &opts)?;
    let constrained = fit_constrained(&data, &frontier.scores, &opts)?;
    let (rescaled, _) = rescale(&ols.predicted, &frontier.scores)?;

    let mut table = compare(
        &data,
        &frontier,
        &[("ols", &ols), ("constrained", &constrained)],
        Some(&rescaled),
        DEFAULT_TIE_TOL,
    )?;
    table.dataset = "hospital14".into();

    println!(
        "{:<4} {:>5} {:>5} {:>9} {:>11} | {:>4} {:>4} {:>4}",
        "dmu", "dea", "ols", "rescaled", "constrained", "rD", "rO", "rC"
    );
    for i in 0..table.names.len() {
        println!(
            "{:<4} {:>5.2} {:>5.2} {:>9.2} {:>11.2} | {:>4} {:>4} {:>4}",
            table.names[i],
            table.dea_scores[i],
            table.fits[0].scores[i],
            table.rescaled.as_ref().unwrap().scores[i],
            table.fits[1].scores[i],
            table.dea_ranks[i],
            table.fits[0].ranks[i],
            table.fits[1].ranks[i],
        );
    }
    for fit in &table.fits {
        println!(
            "{:<12} vs frontier: mean|res| {:.4}, max|res| {:.4}",
            fit.label, fit.stats.mean_abs_dev, fit.stats.max_abs_dev
        );
    }

    println!("\nmachine-readable (CSV):");
    emit_comparison(
        &table,
        &data,
        &EmitOptions {
            format: EmitFormat::Csv,
            full_precision: false,
        },
        std::io::stdout(),
    )?;
    Ok(())
}
