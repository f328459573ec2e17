//! Scripted end-to-end runs over a simulated universe, graded every epoch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::backend::scripted::{SimCoach, SimDeduplicator, SimInvestigator, SimValidator};
use crate::backend::Agents;
use crate::criteria::CriteriaError;
use crate::eval::{evaluate_run, f1, oracle_benchmark, BenchQuery, OracleGrader, QualityPoint};
use crate::model::Language;
use crate::orchestrator::{run, ClockMode, RunConfig, RunFailure, RunState, SearchMode};
use crate::sim::{SimBudget, Universe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    /// The full agent.
    None,
    /// No directive tree.
    Flat,
    /// One English investigator instead of one per language.
    LangFree,
    FlatLangFree,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::None, Ablation::Flat, Ablation::LangFree, Ablation::FlatLangFree];

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::None => "none",
            Ablation::Flat => "flat",
            Ablation::LangFree => "lang-free",
            Ablation::FlatLangFree => "flat-lang-free",
        }
    }

    pub fn apply(self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        if matches!(self, Ablation::Flat | Ablation::FlatLangFree) {
            c.search_mode = SearchMode::Flat;
        }
        if matches!(self, Ablation::LangFree | Ablation::FlatLangFree) {
            c.languages = vec![Language::english()];
        }
        c
    }
}

impl std::str::FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown ablation `{s}` (expected none, flat, lang-free, flat-lang-free)"))
    }
}

#[derive(Debug)]
pub struct SimRun {
    pub state: RunState,
    pub benchmark: BenchQuery,
    pub points: Vec<QualityPoint>,
}

impl SimRun {
    pub fn recall_series(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.recall).collect()
    }

    pub fn final_recall(&self) -> f64 {
        self.points.last().map(|p| p.recall).unwrap_or(0.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimRunError {
    #[error("query: {0}")]
    Query(#[from] CriteriaError),
    #[error("query has an empty ground truth in this universe")]
    EmptyGroundTruth,
    #[error(transparent)]
    Run(#[from] RunFailure),
}

/// Run the scripted agents on `universe` and grade the store after every
/// epoch against the exhaustive answer to `config.query`. The clock is
/// forced to simulated time so results are replayable byte for byte.
pub fn run_sim(universe: &Universe, budget: SimBudget, config: &RunConfig) -> Result<SimRun, SimRunError> {
    let benchmark = oracle_benchmark(universe, "q", &config.query)?;
    if benchmark.ground_truth.is_empty() {
        return Err(SimRunError::EmptyGroundTruth);
    }
    let config = RunConfig { clock: ClockMode::Simulated, ..config.clone() };
    let investigator = SimInvestigator { universe, budget };
    let validator = SimValidator { universe };
    let deduplicator = SimDeduplicator { universe };
    let coach = SimCoach { universe };
    let agents = Agents {
        investigator: &investigator,
        validator: &validator,
        deduplicator: &deduplicator,
        coach: &coach,
    };
    let grader = OracleGrader { universe };
    let mut points = Vec::new();
    let mut calls = 0;
    let state = run(&config, agents, |report, state| {
        calls += report.calls.investigator;
        let predictions = BTreeMap::from([("q".to_string(), state.store.canonical_names())]);
        let table = evaluate_run(&predictions, std::slice::from_ref(&benchmark), &grader)
            .expect("non-empty oracle benchmark grades");
        points.push(QualityPoint {
            epoch: report.epoch,
            clock: report.wall_clock,
            investigator_calls: calls,
            assets: state.store.len(),
            recall: table.recall,
            precision: table.precision,
            f1: f1(table.precision.unwrap_or(0.0), table.recall),
        });
    })?;
    Ok(SimRun { state, benchmark, points })
}
