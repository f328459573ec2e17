//! Shared domain types and the three global stores: candidates, validated
//! assets and the evidence log.

mod asset;
mod candidates;
mod evidence;
mod store;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asset::{AmplificationFlag, AssetRecord, Provenance, StageClass, TrialRecord};
pub use candidates::{Candidate, CandidateStore};
pub use evidence::{DomainEntry, EvidenceLog, QueryEntry};
pub use store::{GlobalAssetStore, Registration};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// Identifier of a node in the directive tree. The root is always `NodeId(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Lower-case language code such as `en` or `zh`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Language(String);

impl Language {
    pub fn new(code: &str) -> Self {
        Language(code.trim().to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn english() -> Self {
        Language::new("en")
    }
}

impl From<&str> for Language {
    fn from(s: &str) -> Self {
        Language::new(s)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Cheap name normalization used for candidate-level dedup and alias lookup:
/// case-fold, trim, collapse internal whitespace, strip surrounding punctuation.
pub fn normalize_name(raw: &str) -> String {
    let folded = raw.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| c.is_ascii_punctuation() || is_unicode_punct(c) || c.is_whitespace())
        .to_string()
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '“' | '”' | '‘' | '’' | '«' | '»' | '「' | '」' | '『' | '』' | '（' | '）' | '，' | '。' | '、' | '：' | '；')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_name("  BGB-X1 "), "bgb-x1");
        assert_eq!(normalize_name("bgb-x1"), "bgb-x1");
        assert_eq!(normalize_name("\"Drug   A\"."), "drug a");
        assert_eq!(normalize_name("(ABX-12)"), "abx-12");
        assert_eq!(normalize_name("「他米单抗」"), "他米单抗");
        assert_eq!(normalize_name("a-b"), "a-b");
        assert_eq!(normalize_name("..."), "");
    }
}
