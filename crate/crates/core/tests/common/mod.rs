//! Shared fixtures for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use asset_scout::backend::scripted::{SimCoach, SimDeduplicator, SimInvestigator, SimValidator};
use asset_scout::backend::{
    Agents, BackendError, ChildDirective, Coach, CoachContext, CoachOutput, DedupRequest, DedupResponse, Deduplicator,
    Investigator, InvestigatorOutput, InvestigatorRequest, Lead, MatchVerdict, Validator,
};
use asset_scout::config::{load_universe, BUNDLED_UNIVERSE};
use asset_scout::model::{AssetRecord, Candidate, Language, StageClass};
use asset_scout::sim::{SimBudget, Universe};

pub fn u200() -> Universe {
    load_universe(BUNDLED_UNIVERSE).expect("bundled universe loads")
}

/// Scripted agents over one universe.
pub struct SimAgents<'u> {
    pub investigator: SimInvestigator<'u>,
    pub validator: SimValidator<'u>,
    pub deduplicator: SimDeduplicator<'u>,
    pub coach: SimCoach<'u>,
}

impl<'u> SimAgents<'u> {
    pub fn new(universe: &'u Universe, budget: SimBudget) -> Self {
        Self {
            investigator: SimInvestigator { universe, budget },
            validator: SimValidator { universe },
            deduplicator: SimDeduplicator { universe },
            coach: SimCoach { universe },
        }
    }

    pub fn agents(&self) -> Agents<'_> {
        Agents { investigator: &self.investigator, validator: &self.validator, deduplicator: &self.deduplicator, coach: &self.coach }
    }
}

/// Investigator replying from a script keyed by (call index, language).
/// Calls beyond the script return nothing.
pub struct ScriptedLeads {
    pub script: Vec<BTreeMap<&'static str, Result<Vec<&'static str>, BackendError>>>,
    pub calls: Mutex<Vec<InvestigatorRequest>>,
    epoch_of: AtomicUsize,
}

impl ScriptedLeads {
    /// One map per epoch: language code -> names (or an error).
    pub fn new(script: Vec<BTreeMap<&'static str, Result<Vec<&'static str>, BackendError>>>) -> Self {
        Self { script, calls: Mutex::new(Vec::new()), epoch_of: AtomicUsize::new(0) }
    }

    pub fn requests(&self) -> Vec<InvestigatorRequest> {
        self.calls.lock().unwrap().clone()
    }
}

impl Investigator for ScriptedLeads {
    fn investigate(&self, req: &InvestigatorRequest) -> Result<InvestigatorOutput, BackendError> {
        let epoch = {
            let mut calls = self.calls.lock().unwrap();
            calls.push(req.clone());
            // epochs advance when a language repeats
            let same_lang = calls.iter().filter(|r| r.language == req.language).count();
            same_lang - 1
        };
        self.epoch_of.store(epoch, Ordering::SeqCst);
        let Some(by_lang) = self.script.get(epoch) else { return Ok(InvestigatorOutput::default()) };
        match by_lang.get(req.language.as_str()) {
            None => Ok(InvestigatorOutput::default()),
            Some(Err(e)) => Err(e.clone()),
            Some(Ok(names)) => Ok(InvestigatorOutput {
                leads: names.iter().map(|n| Lead { name: n.to_string(), source_url: format!("https://news.example/{n}") }).collect(),
                executed_queries: vec![format!("{} [{}]", req.query, req.language)],
                visited_domains: vec!["news.example".into()],
            }),
        }
    }
}

/// Accepts names starting with `ok`, fails on names starting with `boom`,
/// rejects the rest as off-target.
pub struct PrefixValidator;

impl Validator for PrefixValidator {
    fn validate(&self, _query: &str, c: &Candidate) -> Result<MatchVerdict, BackendError> {
        if c.raw_name.starts_with("boom") {
            return Err(BackendError::Timeout);
        }
        if c.raw_name.to_lowercase().starts_with("ok") {
            Ok(MatchVerdict {
                is_match: true,
                per_criterion: vec![],
                failure_rationale: String::new(),
                normalized: Some(AssetRecord::new(&c.raw_name, Language::english(), StageClass::Preclinical)),
            })
        } else {
            Ok(MatchVerdict::rejected("wrong modality (observed \"small molecule\")"))
        }
    }
}

/// Never groups anything: every item is its own asset.
pub struct NoGrouping;

impl Deduplicator for NoGrouping {
    fn resolve(&self, _: &DedupRequest) -> Result<DedupResponse, BackendError> {
        Ok(DedupResponse::default())
    }
}

/// Coach returning fixed directives (suffixed with the node id so siblings
/// under different parents stay distinct) and recording every context.
pub struct FixedCoach {
    pub directives: Vec<&'static str>,
    pub fail: bool,
    pub contexts: Mutex<Vec<CoachContext>>,
}

impl FixedCoach {
    pub fn new(directives: &[&'static str]) -> Self {
        Self { directives: directives.to_vec(), fail: false, contexts: Mutex::new(Vec::new()) }
    }

    pub fn failing() -> Self {
        Self { directives: vec![], fail: true, contexts: Mutex::new(Vec::new()) }
    }
}

impl Coach for FixedCoach {
    fn expand(&self, ctx: &CoachContext) -> Result<CoachOutput, BackendError> {
        self.contexts.lock().unwrap().push(ctx.clone());
        if self.fail {
            return Err(BackendError::Transport("coach unavailable".into()));
        }
        Ok(CoachOutput {
            children: self
                .directives
                .iter()
                .map(|d| ChildDirective { directive: format!("{d} @{}", ctx.node), instructions: String::new() })
                .collect(),
            rationale: "fixed".into(),
        })
    }

    fn summarize_failures(&self, rationales: &[String], _cap: usize) -> Result<String, BackendError> {
        Ok(rationales.join(" | "))
    }
}
