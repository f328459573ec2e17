//! Agent roles and their request/response contracts.
//!
//! The orchestrator only sees the four traits below. [`scripted`] binds them
//! to a simulated universe, [`http`] to a hosted chat model.

pub mod dedup;
pub mod http;
pub mod prompts;
pub mod scripted;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AssetRecord, Candidate, Language, NodeId, QueryEntry};

pub use dedup::{deduplicate_heavy, deduplicate_light, light_pass_count, DedupOutcome, DEFAULT_BATCH_SIZE};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestigatorRequest {
    pub query: String,
    /// Empty at the root: the query is passed through unconstrained.
    pub directive: String,
    pub instructions: String,
    pub language: Language,
    pub known_assets: Vec<String>,
    pub known_candidates: Vec<String>,
}

/// A candidate name as reported by an investigator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lead {
    pub name: String,
    pub source_url: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvestigatorOutput {
    pub leads: Vec<Lead>,
    pub executed_queries: Vec<String>,
    pub visited_domains: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub url: String,
    pub quote: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionCheck {
    pub criterion: String,
    pub verdict: Verdict,
    /// Hard criteria are conjunctive requirements; soft ones sit under an OR.
    #[serde(default = "yes")]
    pub hard: bool,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchVerdict {
    pub is_match: bool,
    #[serde(default)]
    pub per_criterion: Vec<CriterionCheck>,
    /// Empty iff `is_match`.
    #[serde(default)]
    pub failure_rationale: String,
    #[serde(default)]
    pub normalized: Option<AssetRecord>,
}

pub const VALIDATOR_ERROR: &str = "validator-error";

impl MatchVerdict {
    /// Conservative non-match used when validation itself failed.
    pub fn rejected(reason: &str) -> Self {
        Self { is_match: false, per_criterion: Vec::new(), failure_rationale: reason.to_string(), normalized: None }
    }

    pub fn check(&self) -> Result<(), String> {
        if self.is_match {
            if let Some(c) = self.per_criterion.iter().find(|c| c.hard && c.verdict != Verdict::Pass) {
                return Err(format!("match with hard criterion `{}` not passing", c.criterion));
            }
            if !self.failure_rationale.is_empty() {
                return Err("match carries a failure rationale".into());
            }
        } else if self.failure_rationale.trim().is_empty() {
            return Err("non-match without failure rationale".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExistingAsset {
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
}

impl From<&AssetRecord> for ExistingAsset {
    fn from(r: &AssetRecord) -> Self {
        Self { canonical_name: r.canonical_name.clone(), aliases: r.aliases.clone() }
    }
}

/// One deduplication pass: group `items` into distinct assets and flag groups
/// that are already present in `existing`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupRequest {
    pub items: Vec<AssetRecord>,
    pub existing: Vec<ExistingAsset>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupGroup {
    /// Indices into the request's `items`.
    pub members: Vec<usize>,
    pub canonical_name: String,
    #[serde(default)]
    pub aliases: BTreeSet<String>,
    /// Canonical name of the existing asset this group duplicates.
    #[serde(default)]
    pub existing: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupResponse {
    pub groups: Vec<DedupGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoachContext {
    pub query: String,
    pub node: NodeId,
    pub directive: String,
    pub instructions: String,
    /// `(directive, instructions)` from the root down to the node.
    pub lineage: Vec<(String, String)>,
    pub known_assets: Vec<String>,
    pub known_candidates: Vec<String>,
    pub executed_queries: Vec<QueryEntry>,
    pub visited_domains: Vec<String>,
    pub failure_summary: String,
    pub investigator_prompt: String,
    pub k: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChildDirective {
    pub directive: String,
    #[serde(default)]
    pub instructions: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoachOutput {
    pub children: Vec<ChildDirective>,
    #[serde(default)]
    pub rationale: String,
}

pub trait Investigator: Send + Sync {
    fn investigate(&self, req: &InvestigatorRequest) -> Result<InvestigatorOutput, BackendError>;
}

pub trait Validator: Send + Sync {
    fn validate(&self, query: &str, candidate: &Candidate) -> Result<MatchVerdict, BackendError>;
}

pub trait Deduplicator: Send + Sync {
    fn resolve(&self, req: &DedupRequest) -> Result<DedupResponse, BackendError>;
}

pub trait Coach: Send + Sync {
    fn expand(&self, ctx: &CoachContext) -> Result<CoachOutput, BackendError>;

    fn summarize_failures(&self, rationales: &[String], cap: usize) -> Result<String, BackendError>;
}

/// The four roles bound for one run.
#[derive(Clone, Copy)]
pub struct Agents<'a> {
    pub investigator: &'a dyn Investigator,
    pub validator: &'a dyn Validator,
    pub deduplicator: &'a dyn Deduplicator,
    pub coach: &'a dyn Coach,
}

pub const DEFAULT_SUMMARY_CAP: usize = 2000;

/// Compress failure rationales through the coach. Empty input never reaches
/// the backend; a backend failure falls back to truncated concatenation.
/// The result never exceeds `cap` characters.
pub fn summarize_failures(coach: &dyn Coach, rationales: &[String], cap: usize) -> String {
    if rationales.is_empty() {
        return String::new();
    }
    let text = match coach.summarize_failures(rationales, cap) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("failure summarization failed ({e}); using truncated concatenation");
            rationales.join("\n")
        }
    };
    truncate_chars(&text, cap)
}

pub fn truncate_chars(text: &str, cap: usize) -> String {
    match text.char_indices().nth(cap) {
        Some((i, _)) => text[..i].to_string(),
        None => text.to_string(),
    }
}

/// Ask the coach for children and keep at most `k` pairwise-distinct,
/// non-empty directives, in the order produced.
pub fn coach_expand(coach: &dyn Coach, ctx: &CoachContext) -> Result<CoachOutput, BackendError> {
    let mut out = coach.expand(ctx)?;
    let mut seen = BTreeSet::new();
    out.children.retain(|c| !c.directive.trim().is_empty() && seen.insert(c.directive.clone()));
    out.children.truncate(ctx.k);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Failing;

    impl Coach for Failing {
        fn expand(&self, _: &CoachContext) -> Result<CoachOutput, BackendError> {
            Err(BackendError::Timeout)
        }

        fn summarize_failures(&self, _: &[String], _: usize) -> Result<String, BackendError> {
            Err(BackendError::Timeout)
        }
    }

    #[test]
    fn empty_rationales_summarize_to_empty() {
        assert_eq!(summarize_failures(&Failing, &[], 10), "");
    }

    #[test]
    fn fallback_is_truncated_concatenation() {
        let rs = vec!["abcdef".to_string(), "ghij".to_string()];
        assert_eq!(summarize_failures(&Failing, &rs, 8), "abcdef\ng");
    }

    #[test]
    fn truncation_respects_char_boundaries() {
        assert_eq!(truncate_chars("单抗单抗", 3), "单抗单");
        assert_eq!(truncate_chars("ab", 5), "ab");
    }

    #[test]
    fn verdict_invariants() {
        let ok = MatchVerdict { is_match: true, per_criterion: vec![], failure_rationale: String::new(), normalized: None };
        assert!(ok.check().is_ok());
        assert!(MatchVerdict::rejected("").check().is_err());
        assert!(MatchVerdict::rejected(VALIDATOR_ERROR).check().is_ok());
        let bad = MatchVerdict {
            per_criterion: vec![CriterionCheck {
                criterion: "stage".into(),
                verdict: Verdict::Fail,
                hard: true,
                evidence: vec![],
            }],
            ..ok
        };
        assert!(bad.check().is_err());
    }
}
