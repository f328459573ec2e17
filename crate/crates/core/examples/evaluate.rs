//! Grading a prediction list: recall over ground-truth assets, precision over
//! distinct predictions, F1 of the two.
//!
//! cargo run --example evaluate

use std::collections::BTreeMap;

use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};
use asset_scout::eval::{evaluate_run, oracle_benchmark, OracleGrader};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let universe = load_universe(BUNDLED_UNIVERSE)?;
    let bench = oracle_benchmark(&universe, "zh-preclinical", "stage = \"preclinical\" AND origin_language = \"zh\"")?;

    // Half of the answer under a non-canonical alias, plus every lookalike distractor.
    let mut predicted: Vec<String> = bench
        .ground_truth
        .iter()
        .step_by(2)
        .map(|name| {
            let e = universe.resolve_one(name).expect("ground truth resolves");
            e.alias_names().last().unwrap_or(name).to_string()
        })
        .collect();
    predicted.extend(universe.entities.iter().filter(|e| !e.is_asset()).map(|e| e.canonical_name.clone()));

    let predictions = BTreeMap::from([(bench.id.clone(), predicted)]);
    let table = evaluate_run(&predictions, &[bench], &OracleGrader { universe: &universe })?;
    print!("{}", table.to_text());
    if let Some(v) = table.precision_verdicts.iter().find(|v| !v.is_match) {
        println!("\nexample rejection: {} fails {}", v.predicted, v.logic);
        for d in &v.dimension_verdicts {
            println!("  {:<40} {}", d.criterion, if d.pass { "pass" } else { "FAIL" });
        }
    }
    Ok(())
}
