//! Generate a simulated universe and print it as JSON.
//!
//! `cargo run --example generate_universe -- [seed] [assets] > universe.json`
//! With no arguments this reproduces the bundled `u200` fixture.

use asset_scout::sim::{Universe, UniverseSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let mut spec = UniverseSpec::default();
    if let Some(seed) = args.next() {
        spec.seed = seed.parse().expect("seed is an integer");
    }
    if let Some(n) = args.next() {
        spec.asset_count = n.parse().expect("asset count is an integer");
    }
    let universe = Universe::generate(&spec);
    eprintln!(
        "{} assets, {} distractors, alias collisions: {}",
        universe.assets().count(),
        universe.entities.len() - universe.assets().count(),
        universe.has_alias_collisions()
    );
    print!("{}", universe.to_json());
}
