use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{normalize_name, Language, NodeId};

/// A name returned by an investigator, before validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub raw_name: String,
    pub source_url: String,
    pub discovered_by_node: NodeId,
    pub discovered_language: Language,
    pub epoch: u32,
}

/// Every candidate discovered before validation. Names are kept once per
/// normalized form; order is append order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateStore {
    items: Vec<Candidate>,
    seen: BTreeSet<String>,
}

impl CandidateStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends candidates whose normalized name is new; returns how many were appended.
    pub fn merge_candidates(&mut self, new: impl IntoIterator<Item = Candidate>) -> usize {
        let mut appended = 0;
        for c in new {
            let key = normalize_name(&c.raw_name);
            if key.is_empty() || !self.seen.insert(key) {
                continue;
            }
            self.items.push(c);
            appended += 1;
        }
        appended
    }

    pub fn contains(&self, raw_name: &str) -> bool {
        self.seen.contains(&normalize_name(raw_name))
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Candidate> {
        self.items.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.items.iter().map(|c| c.raw_name.clone()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        crate::snapshot::to_string("candidate", &self.items)
    }
}
