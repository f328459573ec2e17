//! Tree search against its flat and single-language ablations on one budget.
//!
//! cargo run --example ablation

use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};
use asset_scout::experiment::{run_sim, Ablation};
use asset_scout::orchestrator::RunConfig;
use asset_scout::sim::SimBudget;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let universe = load_universe(BUNDLED_UNIVERSE)?;
    let base = RunConfig { query: "stage = \"clinical\"".into(), epochs: 10, ..RunConfig::default() };
    println!("{:<14} {:>6} {:>7}  recall by epoch", "ablation", "calls", "recall");
    for ablation in [Ablation::None, Ablation::Flat, Ablation::LangFree, Ablation::FlatLangFree] {
        let sim = run_sim(&universe, SimBudget::default(), &ablation.apply(&base))?;
        let calls = sim.points.last().map_or(0, |p| p.investigator_calls);
        let series: Vec<String> = sim.recall_series().iter().map(|r| format!("{r:.2}")).collect();
        println!("{:<14} {calls:>6} {:>7.3}  {}", ablation.as_str(), sim.final_recall(), series.join(" "));
    }
    Ok(())
}
