//! Benchmark construction: schedule mining tuples, mine assets, keep the
//! under-the-radar ones and write a leak-free query for each.
//!
//! cargo run --example benchgen

use asset_scout::benchgen::{
    build_benchmark, mine_sim_assets, query_groups_fixture, regions_fixture, schedule_tuples, BenchgenConfig,
    ScriptedQueryJudge, ScriptedQueryWriter, SimPageCounter,
};
use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let universe = load_universe(BUNDLED_UNIVERSE)?;
    let schedule = schedule_tuples(&regions_fixture())?;
    println!("schedule: {} tuples per cycle", schedule.cycle_len());

    let mined = mine_sim_assets(&universe, schedule, 80);
    let assets: Vec<_> = mined.into_iter().map(|(_, a)| a).collect();
    let out = build_benchmark(
        &assets,
        &query_groups_fixture(),
        &SimPageCounter { universe: &universe },
        &ScriptedQueryWriter,
        &ScriptedQueryJudge,
        &BenchgenConfig::default(),
    );
    println!("{} mined, {} kept, {} skipped\n", assets.len(), out.records.len(), out.skipped.len());
    for r in out.records.iter().take(8) {
        println!("[{}] en={} local={}  {}", r.group_id, r.profile.english_pages, r.profile.local_pages, r.query);
        println!("      answer: {}", r.asset);
    }
    Ok(())
}
