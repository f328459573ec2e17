//! Prompt templates with `{{slot}}` filling.
//!
//! Templates are plain strings so a config file can override any of them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BackendError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSet {
    pub investigator: String,
    pub validator: String,
    pub deduplicator: String,
    pub coach: String,
    pub summarizer: String,
    pub repair: String,
    pub query_writer: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self {
            investigator: INVESTIGATOR.into(),
            validator: VALIDATOR.into(),
            deduplicator: DEDUPLICATOR.into(),
            coach: COACH.into(),
            summarizer: SUMMARIZER.into(),
            repair: REPAIR.into(),
            query_writer: QUERY_WRITER.into(),
        }
    }
}

/// Slots each role fills, in the order the backend supplies them.
pub const SLOTS: [(&str, &[&str]); 7] = [
    ("investigator", &["language", "query", "directive", "instructions", "known_assets", "known_candidates"]),
    ("validator", &["query", "candidate", "source_url"]),
    ("deduplicator", &["items", "existing"]),
    (
        "coach",
        &[
            "k",
            "query",
            "directive",
            "instructions",
            "lineage",
            "known_assets",
            "known_candidates",
            "executed_queries",
            "visited_domains",
            "failure_summary",
            "investigator_prompt",
        ],
    ),
    ("summarizer", &["cap", "rationales"]),
    ("repair", &["error", "reply"]),
    ("query_writer", &["asset", "template", "forbidden", "feedback"]),
];

impl PromptSet {
    fn template(&self, role: &str) -> &str {
        match role {
            "investigator" => &self.investigator,
            "validator" => &self.validator,
            "deduplicator" => &self.deduplicator,
            "coach" => &self.coach,
            "summarizer" => &self.summarizer,
            "query_writer" => &self.query_writer,
            _ => &self.repair,
        }
    }

    /// Fill every template with placeholder values so bad slots surface
    /// before the first call.
    pub fn check(&self) -> Result<(), BackendError> {
        for (role, names) in SLOTS {
            let slots = names.iter().map(|n| (*n, String::new())).collect();
            fill(self.template(role), &slots).map_err(|e| BackendError::Config(format!("{role} prompt: {e}")))?;
        }
        Ok(())
    }
}

const INVESTIGATOR: &str = "You are a drug asset scout searching sources written in {{language}}.
Screening query: {{query}}
Search angle: {{directive}}
Additional instructions: {{instructions}}
Do not report any of these already known assets: {{known_assets}}
Do not report any of these already seen names: {{known_candidates}}
Reply with JSON only: {\"leads\": [{\"name\": str, \"source_url\": str}], \"executed_queries\": [str], \"visited_domains\": [str]}";

const VALIDATOR: &str = "Decide whether the candidate drug asset satisfies every criterion of the query.
Query: {{query}}
Candidate: {{candidate}} (first seen at {{source_url}})
Decompose the query into atomic criteria and judge each with cited evidence.
Reply with JSON only: {\"is_match\": bool, \"per_criterion\": [{\"criterion\": str, \"verdict\": \"pass\"|\"fail\"|\"unknown\", \"hard\": bool, \"evidence\": [{\"url\": str, \"quote\": str}]}], \"failure_rationale\": str, \"normalized\": null | asset record}";

const DEDUPLICATOR: &str = "Group these items into distinct drug assets. Items are duplicates when they name the same program under different aliases.
Items (index: record): {{items}}
Existing assets: {{existing}}
Reply with JSON only: {\"groups\": [{\"members\": [int], \"canonical_name\": str, \"aliases\": [str], \"existing\": null | str}]}";

const COACH: &str = "You steer a team of search agents. Propose {{k}} non-overlapping child directives, each strictly narrower than the current one.
Query: {{query}}
Current directive: {{directive}}
Current instructions: {{instructions}}
Lineage: {{lineage}}
Known assets: {{known_assets}}
Known candidates: {{known_candidates}}
Queries already run: {{executed_queries}}
Domains already visited: {{visited_domains}}
Recurring rejection reasons: {{failure_summary}}
Investigator base prompt: {{investigator_prompt}}
Reply with JSON only: {\"children\": [{\"directive\": str, \"instructions\": str}], \"rationale\": str}";

const SUMMARIZER: &str = "Compress these rejection reasons into a short list of recurring failure patterns, most frequent first, within {{cap}} characters.
{{rationales}}";

const QUERY_WRITER: &str = "Write one natural screening question, in the style of the template, whose answer set includes the asset below. Describe it by class-level attributes only.
Template: {{template}}
Asset: {{asset}}
Never mention any of these identifiers: {{forbidden}}
Reviewer feedback on the previous attempt: {{feedback}}
Reply with JSON only: {\"query\": str}";

const REPAIR: &str = "Your previous reply could not be parsed ({{error}}). Reply again with the JSON object only.
Previous reply:
{{reply}}";

/// Replace every `{{name}}` with its value. Unknown slots are an error so a
/// typo in an overriding template is caught at the first call.
pub fn fill(template: &str, slots: &BTreeMap<&str, String>) -> Result<String, BackendError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| BackendError::Config("unterminated template slot".into()))?;
        let name = after[..end].trim();
        let value = slots.get(name).ok_or_else(|| BackendError::Config(format!("unknown template slot `{name}`")))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
