//! Bring your own data: parse the self-describing CSV dialect, validate it,
//! run the pipeline, and apply the fitted formula to entities that were not
//! part of the fit.
//!
//! ```bash
//! cargo run --example custom_data
//! ```

use adm::cwfit::{fit_constrained, predict, FitOptions};
use adm::dataset::Dataset;
use adm::dea::ccr_scores;
use adm::report::{rank, DEFAULT_TIE_TOL};

const BRANCHES: &str = "\
dmu,input:Staff,input:Rent,output:Loans,output:Accounts
Aldgate,14,905,848,848
Barbican,9,776,889,222
Camden,11,680,599,732
Dalston,18,1012,702,1638
Euston,7,502,238,1347
Finchley,12,833,862,705
Moorgate,8,594,623,336
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = Dataset::parse_csv(BRANCHES)?;
    let report = data.validate();
    assert!(report.is_valid(), "bad data: {:?}", report.errors);
    for warning in &report.warnings {
        println!("note: {warning}");
    }

    let frontier = ccr_scores(&data)?;
    let fit = fit_constrained(&data, &frontier.scores, &FitOptions::default())?;
    let ranks = rank(&fit.predicted, DEFAULT_TIE_TOL)?;

    println!(
        "formula: score = [{:.4}·Loans + {:.4}·Accounts] / [{:.4}·Staff + {:.4}·Rent]",
        fit.formula.output_weights[0],
        fit.formula.output_weights[1],
        fit.formula.input_weights[0],
        fit.formula.input_weights[1],
    );
    println!(
        "\n{:<10} {:>9} {:>9} {:>5}",
        "branch", "frontier", "formula", "rank"
    );
    for i in 0..data.n_entities() {
        println!(
            "{:<10} {:>9.3} {:>9.3} {:>5}",
            data.names()[i],
            frontier.scores[i],
            fit.predicted[i],
            ranks.ranks[i]
        );
    }

    // Score a new branch with the already-fitted formula: same columns, no
    // refit. This is what makes the common-weights formula portable.
    let newcomer = Dataset::parse_csv(
        "dmu,input:Staff,input:Rent,output:Loans,output:Accounts\nGreenwich,10,640,275,1200\n",
    )?;
    let score = predict(&fit.formula, &newcomer)?;
    println!("\nGreenwich (not in the fit) scores {:.3}", score[0]);
    Ok(())
}
