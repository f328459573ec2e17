//! Tree-guided search over the bundled simulated universe with scripted agents.
//!
//! cargo run --example scripted_run

use asset_scout::backend::scripted::{SimCoach, SimDeduplicator, SimInvestigator, SimValidator};
use asset_scout::backend::Agents;
use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};
use asset_scout::eval::{evaluate_run, oracle_benchmark, OracleGrader};
use asset_scout::orchestrator::{run, ClockMode, RunConfig};
use asset_scout::sim::SimBudget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let universe = load_universe(BUNDLED_UNIVERSE)?;
    let budget = SimBudget::default();
    let investigator = SimInvestigator { universe: &universe, budget };
    let validator = SimValidator { universe: &universe };
    let deduplicator = SimDeduplicator { universe: &universe };
    let coach = SimCoach { universe: &universe };
    let agents = Agents { investigator: &investigator, validator: &validator, deduplicator: &deduplicator, coach: &coach };

    let query = "stage = \"clinical\"";
    let config = RunConfig { query: query.into(), epochs: 6, clock: ClockMode::Simulated, ..RunConfig::default() };
    let state = run(&config, agents, |report, state| {
        let picked: Vec<String> = report.selected_nodes.iter().map(|n| n.to_string()).collect();
        println!("epoch {}: expanded {} -> {} assets", report.epoch, picked.join(","), state.store.len());
    })?;

    println!("\n{}", state.tree.render());
    let bench = oracle_benchmark(&universe, "q", query)?;
    let predictions = [("q".to_string(), state.store.canonical_names())].into();
    let table = evaluate_run(&predictions, &[bench], &OracleGrader { universe: &universe })?;
    print!("{}", table.to_text());
    Ok(())
}
