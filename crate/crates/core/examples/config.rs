//! Layered configuration: defaults, then a TOML file, then command-line overrides.
//!
//! cargo run --example config

use std::path::Path;

use asset_scout::config::{RunOverrides, ScoutConfig};

const FILE: &str = r#"
[run]
query = 'stage = "clinical"'
epochs = 4
k = 5
languages = ["en", "zh", "ja"]

[sim.budget]
per_call = 3
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ScoutConfig::from_toml(FILE, Path::new("inline.toml"))?;
    RunOverrides { k: Some(2), seed: Some(7), ..Default::default() }.apply(&mut cfg.run);
    cfg.validate()?;
    print!("{}", cfg.to_toml());

    match ScoutConfig::from_toml("[run]\nepoch = 4\n", Path::new("typo.toml")) {
        Ok(_) => println!("\nunexpectedly accepted a typo"),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}
