//! TOML configuration: run parameters, simulated world, prompts, benchmark
//! generation and HTTP limits. Precedence is flags over file over defaults.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::http::HttpSettings;
use crate::backend::prompts::PromptSet;
use crate::backend::BackendError;
use crate::benchgen::BenchgenConfig;
use crate::model::Language;
use crate::orchestrator::{BackendKind, BackendSelection, ClockMode, ConfigError, DedupMode, RunConfig, SearchMode};
use crate::sim::{SimBudget, Universe};

/// Name of the bundled 200-asset universe.
pub const BUNDLED_UNIVERSE: &str = "u200";
pub const U200_FIXTURE: &str = include_str!("../fixtures/u200.json");

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("universe {0}: {1}")]
    Universe(String, String),
    #[error(transparent)]
    Run(#[from] ConfigError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    /// `u200` or a path to a universe JSON file.
    pub universe: String,
    pub budget: SimBudget,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { universe: BUNDLED_UNIVERSE.into(), budget: SimBudget::default() }
    }
}

impl SimSettings {
    pub fn load_universe(&self) -> Result<Universe, ConfigFileError> {
        load_universe(&self.universe)
    }
}

pub fn load_universe(name: &str) -> Result<Universe, ConfigFileError> {
    let text = if name == BUNDLED_UNIVERSE {
        U200_FIXTURE.to_string()
    } else {
        std::fs::read_to_string(name).map_err(|e| ConfigFileError::Universe(name.into(), e.to_string()))?
    };
    Universe::from_json(&text).map_err(|e| ConfigFileError::Universe(name.into(), e.to_string()))
}

/// Non-secret HTTP limits. Credentials and endpoints come from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpLimits {
    pub timeout_secs: u64,
    pub max_in_flight: usize,
}

impl Default for HttpLimits {
    fn default() -> Self {
        Self { timeout_secs: 300, max_in_flight: 8 }
    }
}

impl HttpLimits {
    pub fn apply(&self, settings: &mut HttpSettings) {
        settings.timeout = Duration::from_secs(self.timeout_secs);
        settings.max_in_flight = self.max_in_flight;
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoutConfig {
    pub run: RunConfig,
    pub sim: SimSettings,
    pub prompts: PromptSet,
    pub benchgen: BenchgenConfig,
    pub http: HttpLimits,
}

impl ScoutConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigFileError> {
        toml::from_str(text).map_err(|e| ConfigFileError::Parse { path: path.into(), source: Box::new(e) })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigFileError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigFileError::Io { path: path.into(), source: e })?;
        Self::from_toml(&text, path)
    }

    /// Defaults when no file is given.
    pub fn load_optional(path: Option<&Path>) -> Result<Self, ConfigFileError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Everything checkable without running: run parameters, prompt slots,
    /// simulated budget and the universe file.
    pub fn validate(&self) -> Result<(), ConfigFileError> {
        self.run.validate()?;
        self.prompts.check()?;
        let b = &self.sim.budget;
        if b.per_call == 0 || b.horizon == 0 {
            return Err(ConfigFileError::Invalid("sim.budget per_call and horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&b.distractor_rate) {
            return Err(ConfigFileError::Invalid(format!("sim.budget.distractor_rate {} is outside [0, 1]", b.distractor_rate)));
        }
        if self.benchgen.max_rounds == 0 {
            return Err(ConfigFileError::Invalid("benchgen.max_rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.benchgen.filter_fraction) {
            return Err(ConfigFileError::Invalid("benchgen.filter_fraction must be within [0, 1]".into()));
        }
        if self.http.max_in_flight == 0 {
            return Err(ConfigFileError::Invalid("http.max_in_flight must be at least 1".into()));
        }
        self.sim.load_universe()?;
        Ok(())
    }
}

/// Command-line values that override the file. `None` leaves the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunOverrides {
    pub query: Option<String>,
    pub epochs: Option<u32>,
    pub m: Option<usize>,
    pub k: Option<usize>,
    pub languages: Option<Vec<Language>>,
    pub c: Option<f64>,
    pub seed: Option<u64>,
    pub dedup_mode: Option<DedupMode>,
    pub search_mode: Option<SearchMode>,
    pub backend: Option<BackendKind>,
    pub clock: Option<ClockMode>,
    pub max_calls_per_epoch: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, run: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { run.$f = v.clone(); })*};
        }
        set!(query, epochs, m, k, languages, c, seed, dedup_mode, search_mode, clock);
        if let Some(kind) = self.backend {
            run.backends = BackendSelection::all(kind);
        }
        if self.max_calls_per_epoch.is_some() {
            run.max_calls_per_epoch = self.max_calls_per_epoch;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScoutConfig, ConfigFileError> {
        ScoutConfig::from_toml(text, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(parse("").unwrap(), ScoutConfig::default());
        ScoutConfig::default().validate().unwrap();
    }

    #[test]
    fn flags_over_file_over_defaults() {
        let mut cfg = parse("[run]\nepochs = 4\nk = 5\nlanguages = [\"en\", \"ja\"]\n").unwrap();
        RunOverrides { k: Some(2), seed: Some(9), ..Default::default() }.apply(&mut cfg.run);
        assert_eq!(cfg.run.epochs, 4, "file beats default");
        assert_eq!(cfg.run.k, 2, "flag beats file");
        assert_eq!(cfg.run.seed, 9, "flag beats default");
        assert_eq!(cfg.run.m, RunConfig::default().m, "default survives");
        assert_eq!(cfg.run.languages, vec![Language::english(), Language::new("ja")]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse("[run]\nepoch = 4\n"), Err(ConfigFileError::Parse { .. })));
        assert!(matches!(parse("[sim.budget]\nper_cal = 4\n"), Err(ConfigFileError::Parse { .. })));
    }

    #[test]
    fn validation_catches_bad_values() {
        assert!(matches!(parse("[run]\nk = 0\n").unwrap().validate(), Err(ConfigFileError::Run(_))));
        assert!(matches!(parse("[prompts]\ncoach = \"{{nope}}\"\n").unwrap().validate(), Err(ConfigFileError::Backend(_))));
        assert!(matches!(parse("[sim]\nuniverse = \"/no/such/file.json\"\n").unwrap().validate(), Err(ConfigFileError::Universe(..))));
        assert!(matches!(parse("[sim.budget]\ndistractor_rate = 1.5\n").unwrap().validate(), Err(ConfigFileError::Invalid(_))));
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = ScoutConfig::default();
        cfg.run.query = "stage = \"clinical\"".into();
        cfg.run.max_calls_per_epoch = Some(40);
        assert_eq!(parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bundled_universe_matches_generator() {
        let bundled = load_universe(BUNDLED_UNIVERSE).unwrap();
        let fresh = Universe::generate(&bundled.spec);
        assert_eq!(U200_FIXTURE.trim_end(), fresh.to_json().trim_end());
    }
}
