use serde::{Deserialize, Serialize};

use super::{Language, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryEntry {
    pub query_text: String,
    pub language: Language,
    pub node: NodeId,
    pub epoch: u32,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainEntry {
    pub domain: String,
    pub language: Language,
    pub node: NodeId,
    pub epoch: u32,
    pub seq: u64,
}

/// Append-only logs of executed queries and visited domains.
///
/// Entries are kept ordered by `(epoch, node, seq)` where `seq` is the global
/// insertion index, so iteration is deterministic regardless of the order in
/// which parallel rollouts report.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvidenceLog {
    queries: Vec<QueryEntry>,
    domains: Vec<DomainEntry>,
    next_seq: u64,
}

impl EvidenceLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_query(&mut self, text: &str, language: &Language, node: NodeId, epoch: u32) {
        let entry = QueryEntry {
            query_text: text.to_string(),
            language: language.clone(),
            node,
            epoch,
            seq: self.bump(),
        };
        let at = self.queries.partition_point(|q| (q.epoch, q.node) <= (epoch, node));
        self.queries.insert(at, entry);
    }

    pub fn record_domain(&mut self, domain: &str, language: &Language, node: NodeId, epoch: u32) {
        let entry = DomainEntry {
            domain: domain.to_string(),
            language: language.clone(),
            node,
            epoch,
            seq: self.bump(),
        };
        let at = self.domains.partition_point(|d| (d.epoch, d.node) <= (epoch, node));
        self.domains.insert(at, entry);
    }

    fn bump(&mut self) -> u64 {
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }

    pub fn queries(&self) -> &[QueryEntry] {
        &self.queries
    }

    pub fn domains(&self) -> &[DomainEntry] {
        &self.domains
    }

    pub fn len(&self) -> usize {
        self.queries.len() + self.domains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queries_jsonl(&self) -> String {
        crate::snapshot::to_string("query", &self.queries)
    }

    pub fn domains_jsonl(&self) -> String {
        crate::snapshot::to_string("domain", &self.domains)
    }
}
