//! Light (batched) and heavy (one pass per item) deduplication agree on which
//! assets are new; they differ only in backend passes.
//!
//! cargo run --example dedup

use asset_scout::backend::dedup::light_pass_count;
use asset_scout::backend::scripted::SimDeduplicator;
use asset_scout::backend::{deduplicate_heavy, deduplicate_light};
use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};
use asset_scout::model::{AssetRecord, GlobalAssetStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let universe = load_universe(BUNDLED_UNIVERSE)?;
    let dedup = SimDeduplicator { universe: &universe };

    // Twelve assets, each reported twice: once by name and once by another alias.
    let mut items = Vec::new();
    for e in universe.assets().take(12) {
        items.push(e.to_asset_record());
        if let Some(alias) = e.alias_names().find(|a| *a != e.canonical_name) {
            items.push(AssetRecord::new(alias, e.origin_language.clone(), e.stage));
        }
    }
    // The store already holds the first three.
    let mut store = GlobalAssetStore::new();
    for e in universe.assets().take(3) {
        store.register_asset(e.to_asset_record())?;
    }

    let light = deduplicate_light(&dedup, items.clone(), &store, 10);
    let heavy = deduplicate_heavy(&dedup, items.clone(), &store);
    println!("{} reports, {} already known", items.len(), store.len());
    println!("light: {} new assets in {} passes (formula {})", light.new_assets.len(), light.passes, light_pass_count(items.len(), 10));
    println!("heavy: {} new assets in {} passes", heavy.new_assets.len(), heavy.passes);
    for a in &light.new_assets {
        println!("  {} ({})", a.canonical_name, a.aliases.iter().cloned().collect::<Vec<_>>().join(", "));
    }
    Ok(())
}
