//! Deterministic agents backed by a simulated [`Universe`].
//!
//! Each role is a pure function of its request and the universe seed, so two
//! runs with the same configuration make the same decisions.

use std::collections::{BTreeMap, BTreeSet};

use super::{
    BackendError, CoachContext, CoachOutput, ChildDirective, CriterionCheck, DedupGroup, DedupRequest,
    DedupResponse, Deduplicator, Evidence, Investigator, InvestigatorOutput, InvestigatorRequest, Lead,
    MatchVerdict, Validator, Verdict, Coach,
};
use crate::criteria::{Criterion, Expr, Field};
use crate::model::{normalize_name, Candidate};
use crate::sim::{SimBudget, Universe, DIRECTIVE_SEPARATOR};

/// Partition axes tried by the coach, in order.
pub const PARTITION_AXES: [Field; 5] = [Field::Modality, Field::Region, Field::Target, Field::Indication, Field::Stage];

fn malformed(e: impl std::fmt::Display) -> BackendError {
    BackendError::Malformed(e.to_string())
}

pub struct SimInvestigator<'u> {
    pub universe: &'u Universe,
    pub budget: SimBudget,
}

impl Investigator for SimInvestigator<'_> {
    fn investigate(&self, req: &InvestigatorRequest) -> Result<InvestigatorOutput, BackendError> {
        let found = self.universe.investigate(req, &self.budget).map_err(malformed)?;
        Ok(InvestigatorOutput {
            leads: found.leads.into_iter().map(|l| Lead { name: l.name, source_url: l.source_url }).collect(),
            executed_queries: found.executed_queries,
            visited_domains: found.visited_domains,
        })
    }
}

pub struct SimValidator<'u> {
    pub universe: &'u Universe,
}

/// Atoms that are top-level conjuncts: every match must satisfy them.
fn hard_atoms(e: &Expr) -> BTreeSet<&Criterion> {
    match e {
        Expr::Atom(c) => BTreeSet::from([c]),
        Expr::And(es) => es.iter().flat_map(hard_atoms).collect(),
        _ => BTreeSet::new(),
    }
}

fn failure_text(c: &Criterion, observed: &str) -> String {
    format!("wrong {} (observed {observed:?}, required {c})", c.field)
}

impl Validator for SimValidator<'_> {
    fn validate(&self, query: &str, candidate: &Candidate) -> Result<MatchVerdict, BackendError> {
        let q = Expr::parse(query).map_err(malformed)?;
        let Some(entity) = self.universe.resolve_one(&candidate.raw_name) else {
            return Ok(MatchVerdict::rejected(&format!(
                "unverifiable name (no source describes {:?})",
                candidate.raw_name
            )));
        };
        let hard = hard_atoms(&q);
        let url = format!("https://registry.sim/entity/{}", entity.id);
        let per_criterion: Vec<CriterionCheck> = q
            .explain(entity)
            .into_iter()
            .map(|o| CriterionCheck {
                criterion: o.criterion.to_string(),
                verdict: if o.pass { Verdict::Pass } else { Verdict::Fail },
                hard: hard.contains(&o.criterion),
                evidence: vec![Evidence {
                    url: url.clone(),
                    quote: format!("{}: {}", o.criterion.field, o.observed),
                }],
            })
            .collect();
        if q.eval(entity) {
            return Ok(MatchVerdict {
                is_match: true,
                per_criterion,
                failure_rationale: String::new(),
                normalized: Some(entity.to_asset_record()),
            });
        }
        let mut reasons: Vec<String> = q
            .explain(entity)
            .iter()
            .filter(|o| !o.pass && hard.contains(&o.criterion))
            .map(|o| failure_text(&o.criterion, &o.observed))
            .collect();
        if reasons.is_empty() {
            reasons.push(format!("no alternative satisfied (query {q})"));
        }
        Ok(MatchVerdict { is_match: false, per_criterion, failure_rationale: reasons.join("; "), normalized: None })
    }
}

pub struct SimDeduplicator<'u> {
    pub universe: &'u Universe,
}

impl SimDeduplicator<'_> {
    fn entity_of<'a>(&self, names: impl IntoIterator<Item = &'a String>) -> Option<u32> {
        names.into_iter().find_map(|n| self.universe.resolve(n).first().copied())
    }
}

impl Deduplicator for SimDeduplicator<'_> {
    fn resolve(&self, req: &DedupRequest) -> Result<DedupResponse, BackendError> {
        let existing: Vec<(Option<u32>, &str)> = req
            .existing
            .iter()
            .map(|e| (self.entity_of(std::iter::once(&e.canonical_name).chain(&e.aliases)), e.canonical_name.as_str()))
            .collect();
        let mut groups: Vec<DedupGroup> = Vec::new();
        let mut by_key: BTreeMap<String, usize> = BTreeMap::new();
        for (i, item) in req.items.iter().enumerate() {
            let id = self.entity_of(std::iter::once(&item.canonical_name).chain(&item.aliases));
            let key = match id {
                Some(id) => format!("#{id}"),
                None => normalize_name(&item.canonical_name),
            };
            if let Some(&g) = by_key.get(&key) {
                groups[g].members.push(i);
                continue;
            }
            let (canonical_name, aliases) = match id {
                Some(id) => {
                    let e = self.universe.entity(id);
                    (e.canonical_name.clone(), e.alias_names().map(String::from).collect())
                }
                None => (item.canonical_name.clone(), BTreeSet::new()),
            };
            let dup = existing.iter().find(|(eid, name)| match (id, eid) {
                (Some(a), Some(b)) => a == *b,
                _ => normalize_name(name) == normalize_name(&item.canonical_name),
            });
            by_key.insert(key, groups.len());
            groups.push(DedupGroup {
                members: vec![i],
                canonical_name,
                aliases,
                existing: dup.map(|(_, n)| n.to_string()),
            });
        }
        Ok(DedupResponse { groups })
    }
}

pub struct SimCoach<'u> {
    pub universe: &'u Universe,
}

/// Split `values` (with their asset counts) into `groups` sets of roughly
/// equal total count: heaviest value first, into the lightest group.
fn balanced_groups(values: &BTreeMap<String, usize>, groups: usize) -> Vec<Vec<String>> {
    let mut order: Vec<(&String, &usize)> = values.iter().collect();
    order.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let mut out: Vec<(usize, Vec<String>)> = vec![(0, Vec::new()); groups];
    for (v, n) in order {
        let lightest = (0..groups).min_by_key(|&g| (out[g].0, g)).expect("at least one group");
        out[lightest].0 += n;
        out[lightest].1.push(v.clone());
    }
    out.into_iter()
        .map(|(_, mut vs)| {
            vs.sort();
            vs
        })
        .filter(|vs| !vs.is_empty())
        .collect()
}

impl SimCoach<'_> {
    /// Child directives for one axis, or `None` when the slice has fewer
    /// than two values on it.
    fn partition(&self, slice: &Expr, parent: &Expr, axis: Field, k: usize) -> Option<Vec<ChildDirective>> {
        let mut values: BTreeMap<String, usize> = BTreeMap::new();
        for e in self.universe.assets().filter(|e| slice.eval(*e)) {
            *values.entry(crate::criteria::Attributes::attribute(e, axis).to_string()).or_default() += 1;
        }
        if values.len() < 2 {
            return None;
        }
        let groups = balanced_groups(&values, k.min(values.len()));
        Some(
            groups
                .into_iter()
                .map(|g| {
                    let alt = Expr::or(g.iter().map(|v| Expr::Atom(Criterion::eq(axis, v.as_str()))));
                    ChildDirective {
                        directive: Expr::and([parent.clone(), alt]).to_string(),
                        instructions: format!("Concentrate on programs whose {axis} is one of: {}.", g.join(", ")),
                    }
                })
                .collect(),
        )
    }
}

impl Coach for SimCoach<'_> {
    fn expand(&self, ctx: &CoachContext) -> Result<CoachOutput, BackendError> {
        let query = Expr::parse(&ctx.query).map_err(malformed)?;
        let parent = Expr::parse(&ctx.directive).map_err(malformed)?;
        let slice = Expr::and([query, parent.clone()]);
        let executed: BTreeSet<&str> = ctx
            .executed_queries
            .iter()
            .filter_map(|q| q.query_text.split_once(DIRECTIVE_SEPARATOR).map(|(_, d)| d))
            .collect();
        for axis in PARTITION_AXES {
            let Some(mut children) = self.partition(&slice, &parent, axis, ctx.k.max(1)) else { continue };
            children.retain(|c| !executed.contains(c.directive.as_str()));
            if children.is_empty() {
                continue;
            }
            return Ok(CoachOutput { children, rationale: format!("partition the slice by {axis}") });
        }
        Ok(CoachOutput { children: Vec::new(), rationale: "slice cannot be partitioned further".into() })
    }

    fn summarize_failures(&self, rationales: &[String], cap: usize) -> Result<String, BackendError> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rationales {
            for part in r.split("; ") {
                let pattern = part.split(" (").next().unwrap_or(part).trim();
                if !pattern.is_empty() {
                    *counts.entry(pattern).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let lines: Vec<String> = ranked.iter().map(|(p, n)| format!("{p}: {n} rejections")).collect();
        Ok(super::truncate_chars(&lines.join("\n"), cap))
    }
}
