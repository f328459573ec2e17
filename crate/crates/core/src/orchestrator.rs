//! The epoch loop.
//!
//! Each epoch: select leaves, roll out one investigator per language on each
//! selected node, validate every candidate, deduplicate the survivors against
//! the global store, back up `p * |new|`, merge the new assets, and (unless
//! this is the last epoch) ask the coach for children of each selected node.
//!
//! Backends only answer requests; every mutation happens here, on one thread,
//! between the parallel phases.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    coach_expand, deduplicate_heavy, deduplicate_light, summarize_failures, Agents, BackendError, CoachContext,
    InvestigatorOutput, InvestigatorRequest, MatchVerdict, DEFAULT_BATCH_SIZE, DEFAULT_SUMMARY_CAP,
};
use crate::model::{
    normalize_name, AssetRecord, Candidate, CandidateStore, EvidenceLog, GlobalAssetStore, Language, NodeId,
    Registration, StageClass,
};
use crate::tree::{self, directive_digest, DirectiveTree, SelectionBudget, TreeError, DEFAULT_EXPLORATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DedupMode {
    #[default]
    Light,
    Heavy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// UCB selection over the directive tree.
    #[default]
    Tree,
    /// No tree: each epoch the coach proposes `k` refinements of the root
    /// from the shared history, and all of them run.
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    #[default]
    Wall,
    /// One tick per backend call; keeps reports byte-identical across replays.
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSelection {
    pub investigator: BackendKind,
    pub validator: BackendKind,
    pub deduplicator: BackendKind,
    pub coach: BackendKind,
}

impl BackendSelection {
    pub fn all(kind: BackendKind) -> Self {
        Self { investigator: kind, validator: kind, deduplicator: kind, coach: kind }
    }

    pub fn uses(&self, kind: BackendKind) -> bool {
        [self.investigator, self.validator, self.deduplicator, self.coach].contains(&kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub query: String,
    pub epochs: u32,
    /// Leaves selected per epoch.
    pub m: usize,
    /// Children requested per expansion.
    pub k: usize,
    pub languages: Vec<Language>,
    pub dedup_mode: DedupMode,
    pub c: f64,
    pub seed: u64,
    pub search_mode: SearchMode,
    pub backends: BackendSelection,
    pub clock: ClockMode,
    pub dedup_batch_size: usize,
    pub summary_cap: usize,
    /// Give investigators the raw names of every candidate seen so far.
    pub share_candidates: bool,
    /// Investigator plus validator calls allowed per epoch.
    pub max_calls_per_epoch: Option<usize>,
    /// Concurrent validator calls per node.
    pub validator_parallelism: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            query: String::new(),
            epochs: 10,
            m: 1,
            k: 3,
            languages: vec![Language::english(), Language::new("zh")],
            dedup_mode: DedupMode::Light,
            c: DEFAULT_EXPLORATION,
            seed: 0,
            search_mode: SearchMode::Tree,
            backends: BackendSelection::default(),
            clock: ClockMode::Wall,
            dedup_batch_size: DEFAULT_BATCH_SIZE,
            summary_cap: DEFAULT_SUMMARY_CAP,
            share_candidates: true,
            max_calls_per_epoch: None,
            validator_parallelism: 8,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("`{0}` must be at least 1")]
    TooSmall(&'static str),
    #[error("languages must be non-empty and distinct")]
    Languages,
    #[error("exploration constant must be finite and non-negative, got {0}")]
    Exploration(f64),
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("epochs", self.epochs as usize),
            ("m", self.m),
            ("k", self.k),
            ("dedup_batch_size", self.dedup_batch_size),
            ("validator_parallelism", self.validator_parallelism),
        ] {
            if v == 0 {
                return Err(ConfigError::TooSmall(name));
            }
        }
        let distinct: BTreeSet<&Language> = self.languages.iter().collect();
        if self.languages.is_empty() || distinct.len() != self.languages.len() {
            return Err(ConfigError::Languages);
        }
        if !self.c.is_finite() || self.c < 0.0 {
            return Err(ConfigError::Exploration(self.c));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub investigator: usize,
    pub validator: usize,
    pub deduplicator: usize,
    pub coach: usize,
}

impl CallCounts {
    pub fn total(&self) -> usize {
        self.investigator + self.validator + self.deduplicator + self.coach
    }

    fn add(&mut self, o: &CallCounts) {
        self.investigator += o.investigator;
        self.validator += o.validator;
        self.deduplicator += o.deduplicator;
        self.coach += o.coach;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: NodeId,
    pub directive_digest: String,
    pub candidate_count: usize,
    pub validated_count: usize,
    pub precision: f64,
    pub new_unique_count: usize,
    pub reward: f64,
    pub failed_languages: Vec<Language>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: u32,
    pub selected_nodes: Vec<NodeId>,
    pub nodes: Vec<NodeReport>,
    pub cumulative_asset_count: usize,
    /// Seconds since the run started, or backend-call ticks under a simulated clock.
    pub wall_clock: f64,
    pub calls: CallCounts,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("epoch {epoch}, node {node}: {source}")]
    Backend { epoch: u32, node: NodeId, source: BackendError },
    #[error("epoch {epoch}: {source}")]
    Tree { epoch: u32, source: TreeError },
}

/// Everything a run accumulates.
#[derive(Debug, Clone, Default)]
pub struct RunState {
    pub store: GlobalAssetStore,
    pub candidates: CandidateStore,
    pub evidence: EvidenceLog,
    pub tree: DirectiveTree,
    pub reports: Vec<EpochReport>,
}

/// A failed run: the error and everything completed before it.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct RunFailure {
    pub error: OrchestratorError,
    pub partial: Box<RunState>,
}

pub const BUDGET_EXHAUSTED: &str = "budget-exhausted";

/// Run `config.epochs` epochs. `observer` sees each report and the state
/// right after that epoch's aggregation (before expansion).
pub fn run(
    config: &RunConfig,
    agents: Agents<'_>,
    mut observer: impl FnMut(&EpochReport, &RunState),
) -> Result<RunState, RunFailure> {
    let mut state = RunState::default();
    if let Err(e) = config.validate() {
        return Err(RunFailure { error: e.into(), partial: Box::new(state) });
    }
    let mut engine = Engine { config, agents, started: Instant::now(), ticks: 0, last_failures: Vec::new() };
    for epoch in 1..=config.epochs {
        match engine.epoch(&mut state, epoch, &mut observer) {
            Ok(()) => {}
            Err(error) => return Err(RunFailure { error, partial: Box::new(state) }),
        }
    }
    Ok(state)
}

struct Engine<'c, 'a> {
    config: &'c RunConfig,
    agents: Agents<'a>,
    started: Instant,
    ticks: usize,
    /// Flat mode: rejection rationales from the previous epoch.
    last_failures: Vec<String>,
}

/// One node's rollout, before evaluation.
struct Rollout {
    node: NodeId,
    candidates: Vec<Candidate>,
    outputs: Vec<(Language, Result<InvestigatorOutput, BackendError>)>,
}

struct Evaluation {
    report: NodeReport,
    new_assets: Vec<AssetRecord>,
    failures: Vec<String>,
}

impl Engine<'_, '_> {
    fn epoch(
        &mut self,
        state: &mut RunState,
        epoch: u32,
        observer: &mut impl FnMut(&EpochReport, &RunState),
    ) -> Result<(), OrchestratorError> {
        let cfg = self.config;
        let last = epoch == cfg.epochs;
        let mut calls = CallCounts::default();
        let mut warnings = Vec::new();

        // select
        let selected = match cfg.search_mode {
            SearchMode::Tree => state.tree.select_leaves(SelectionBudget { m: cfg.m, c: cfg.c }),
            SearchMode::Flat => self.flat_batch(state, epoch, &mut calls, &mut warnings)?,
        };

        // rollout
        let mut budget = cfg.max_calls_per_epoch.unwrap_or(usize::MAX);
        let rollouts = self.rollout(state, &selected, epoch, &mut budget, &mut calls, &mut warnings);

        // evaluate against a stable store snapshot, then back up
        let mut evaluations = Vec::with_capacity(rollouts.len());
        for r in &rollouts {
            let ev = self.evaluate(state, r, &mut budget, &mut calls, &mut warnings);
            state
                .tree
                .backpropagate(r.node, ev.report.reward)
                .map_err(|source| OrchestratorError::Tree { epoch, source })?;
            evaluations.push(ev);
        }

        // aggregate
        for ev in &evaluations {
            for record in &ev.new_assets {
                match state.store.register_asset(record.clone()) {
                    Ok(Registration::Inserted) => {}
                    Ok(Registration::MergedInto(into)) => {
                        log::debug!("`{}` merged into `{into}`", record.canonical_name)
                    }
                    Err(e) => warnings.push(format!("skipped `{}`: {e}", record.canonical_name)),
                }
            }
        }
        let failures: Vec<(NodeId, Vec<String>)> =
            evaluations.iter().map(|e| (e.report.node, e.failures.clone())).collect();
        self.ticks += calls.total();
        let report = EpochReport {
            epoch,
            selected_nodes: selected.clone(),
            nodes: evaluations.into_iter().map(|e| e.report).collect(),
            cumulative_asset_count: state.store.len(),
            wall_clock: self.clock(),
            calls,
            warnings,
        };
        for w in &report.warnings {
            log::warn!("epoch {epoch}: {w}");
        }
        state.reports.push(report);
        observer(state.reports.last().expect("just pushed"), state);

        // expand
        match cfg.search_mode {
            SearchMode::Flat => {
                self.last_failures = failures.into_iter().flat_map(|(_, f)| f).collect();
            }
            SearchMode::Tree if !last => {
                let mut extra = CallCounts::default();
                let mut notes = Vec::new();
                for (node, f) in &failures {
                    self.expand(state, *node, f, epoch, &mut extra, &mut notes)?;
                }
                self.ticks += extra.total();
                let report = state.reports.last_mut().expect("report exists");
                report.calls.add(&extra);
                report.warnings.extend(notes);
            }
            SearchMode::Tree => {}
        }
        Ok(())
    }

    fn clock(&self) -> f64 {
        match self.config.clock {
            ClockMode::Wall => self.started.elapsed().as_secs_f64(),
            ClockMode::Simulated => self.ticks as f64,
        }
    }

    fn request(&self, state: &RunState, node: NodeId, language: &Language) -> InvestigatorRequest {
        let n = state.tree.get(node).expect("selected node exists");
        InvestigatorRequest {
            query: self.config.query.clone(),
            directive: n.directive.clone(),
            instructions: n.instructions.clone(),
            language: language.clone(),
            known_assets: state.store.canonical_names(),
            known_candidates: if self.config.share_candidates { state.candidates.names() } else { Vec::new() },
        }
    }

    fn rollout(
        &self,
        state: &mut RunState,
        selected: &[NodeId],
        epoch: u32,
        budget: &mut usize,
        calls: &mut CallCounts,
        warnings: &mut Vec<String>,
    ) -> Vec<Rollout> {
        let mut plan: Vec<(NodeId, Language, InvestigatorRequest)> = Vec::new();
        for &node in selected {
            for lang in &self.config.languages {
                if *budget == 0 {
                    warnings.push(format!("{BUDGET_EXHAUSTED}: investigator for {node}/{lang} skipped"));
                    continue;
                }
                *budget -= 1;
                plan.push((node, lang.clone(), self.request(state, node, lang)));
            }
        }
        calls.investigator += plan.len();
        let investigator = self.agents.investigator;
        let results: Vec<Result<InvestigatorOutput, BackendError>> = std::thread::scope(|s| {
            let handles: Vec<_> =
                plan.iter().map(|(_, _, req)| s.spawn(move || investigator.investigate(req))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(BackendError::Transport("investigator panicked".into()))))
                .collect()
        });

        let mut rollouts: Vec<Rollout> =
            selected.iter().map(|&node| Rollout { node, candidates: Vec::new(), outputs: Vec::new() }).collect();
        for ((node, lang, _), result) in plan.into_iter().zip(results) {
            let r = rollouts.iter_mut().find(|r| r.node == node).expect("planned node");
            r.outputs.push((lang, result));
        }
        for r in &mut rollouts {
            let mut seen = BTreeSet::new();
            for (lang, out) in &r.outputs {
                let out = match out {
                    Ok(o) => o,
                    Err(e) => {
                        warnings.push(format!("investigator {}/{lang} failed: {e}", r.node));
                        continue;
                    }
                };
                for q in &out.executed_queries {
                    state.evidence.record_query(q, lang, r.node, epoch);
                }
                for d in &out.visited_domains {
                    state.evidence.record_domain(d, lang, r.node, epoch);
                }
                for lead in &out.leads {
                    let key = normalize_name(&lead.name);
                    if key.is_empty() || !seen.insert(key) {
                        continue;
                    }
                    r.candidates.push(Candidate {
                        raw_name: lead.name.clone(),
                        source_url: lead.source_url.clone(),
                        discovered_by_node: r.node,
                        discovered_language: lang.clone(),
                        epoch,
                    });
                }
            }
            state.candidates.merge_candidates(r.candidates.iter().cloned());
        }
        rollouts
    }

    fn evaluate(
        &self,
        state: &RunState,
        rollout: &Rollout,
        budget: &mut usize,
        calls: &mut CallCounts,
        warnings: &mut Vec<String>,
    ) -> Evaluation {
        let allowed = rollout.candidates.len().min(*budget);
        *budget -= allowed;
        calls.validator += allowed;
        let (to_check, over) = rollout.candidates.split_at(allowed);
        let mut verdicts = self.validate_all(to_check);
        if !over.is_empty() {
            warnings.push(format!("{BUDGET_EXHAUSTED}: {} candidates of {} not validated", over.len(), rollout.node));
            verdicts.extend(over.iter().map(|_| MatchVerdict::rejected(BUDGET_EXHAUSTED)));
        }

        let mut validated = Vec::new();
        let mut failures = Vec::new();
        for (cand, verdict) in rollout.candidates.iter().zip(verdicts) {
            if verdict.is_match {
                validated.push(verdict.normalized.unwrap_or_else(|| {
                    AssetRecord::new(&cand.raw_name, cand.discovered_language.clone(), StageClass::Preclinical)
                }));
            } else {
                failures.push(format!("{}: {}", cand.raw_name, verdict.failure_rationale));
            }
        }
        let p = tree::precision(validated.len(), rollout.candidates.len());
        let validated_count = validated.len();
        let dedup = self.agents.deduplicator;
        let outcome = match self.config.dedup_mode {
            DedupMode::Light => deduplicate_light(dedup, validated, &state.store, self.config.dedup_batch_size),
            DedupMode::Heavy => deduplicate_heavy(dedup, validated, &state.store),
        };
        calls.deduplicator += outcome.passes;
        warnings.extend(outcome.warnings);
        let reward = tree::node_reward(p, outcome.new_assets.len());
        let node = state.tree.get(rollout.node).expect("rolled-out node exists");
        Evaluation {
            report: NodeReport {
                node: rollout.node,
                directive_digest: directive_digest(&node.directive),
                candidate_count: rollout.candidates.len(),
                validated_count,
                precision: p,
                new_unique_count: outcome.new_assets.len(),
                reward,
                failed_languages: rollout.outputs.iter().filter(|(_, o)| o.is_err()).map(|(l, _)| l.clone()).collect(),
            },
            new_assets: outcome.new_assets,
            failures,
        }
    }

    /// Validate concurrently in fixed-size chunks; results keep input order.
    /// A failed call is a conservative non-match.
    fn validate_all(&self, candidates: &[Candidate]) -> Vec<MatchVerdict> {
        let validator = self.agents.validator;
        let query = self.config.query.as_str();
        let mut out = Vec::with_capacity(candidates.len());
        for chunk in candidates.chunks(self.config.validator_parallelism) {
            let verdicts: Vec<MatchVerdict> = std::thread::scope(|s| {
                let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || validator.validate(query, c))).collect();
                handles
                    .into_iter()
                    .map(|h| match h.join() {
                        Ok(Ok(v)) if v.check().is_ok() => v,
                        Ok(Ok(v)) => {
                            log::warn!("inconsistent verdict treated as non-match: {:?}", v.check());
                            MatchVerdict::rejected(crate::backend::VALIDATOR_ERROR)
                        }
                        Ok(Err(e)) => {
                            log::warn!("validator failed: {e}");
                            MatchVerdict::rejected(crate::backend::VALIDATOR_ERROR)
                        }
                        Err(_) => MatchVerdict::rejected(crate::backend::VALIDATOR_ERROR),
                    })
                    .collect()
            });
            out.extend(verdicts);
        }
        out
    }

    fn coach_context(&self, state: &RunState, node: NodeId, failures: &[String], calls: &mut CallCounts) -> CoachContext {
        let n = state.tree.get(node).expect("node exists");
        let lineage = state
            .tree
            .path_to(node)
            .expect("node exists")
            .into_iter()
            .map(|id| {
                let a = state.tree.get(id).expect("ancestor exists");
                (a.directive.clone(), a.instructions.clone())
            })
            .collect();
        if !failures.is_empty() {
            calls.coach += 1;
        }
        let failure_summary = summarize_failures(self.agents.coach, failures, self.config.summary_cap);
        let mut domains: Vec<String> = state.evidence.domains().iter().map(|d| d.domain.clone()).collect();
        domains.sort();
        domains.dedup();
        CoachContext {
            query: self.config.query.clone(),
            node,
            directive: n.directive.clone(),
            instructions: n.instructions.clone(),
            lineage,
            known_assets: state.store.canonical_names(),
            known_candidates: state.candidates.names(),
            executed_queries: state.evidence.queries().to_vec(),
            visited_domains: domains,
            failure_summary,
            investigator_prompt: crate::backend::prompts::PromptSet::default().investigator,
            k: self.config.k,
        }
    }

    fn expand(
        &self,
        state: &mut RunState,
        node: NodeId,
        failures: &[String],
        epoch: u32,
        calls: &mut CallCounts,
        warnings: &mut Vec<String>,
    ) -> Result<(), OrchestratorError> {
        let ctx = self.coach_context(state, node, failures, calls);
        calls.coach += 1;
        let out = coach_expand(self.agents.coach, &ctx)
            .map_err(|source| OrchestratorError::Backend { epoch, node, source })?;
        // a sibling with the same text would be rejected; drop it instead
        let existing: BTreeSet<String> = state
            .tree
            .get(node)
            .expect("node exists")
            .children
            .iter()
            .map(|c| state.tree.get(*c).expect("child exists").directive.clone())
            .collect();
        let pairs: Vec<(String, String)> = out
            .children
            .into_iter()
            .filter(|c| !existing.contains(&c.directive))
            .map(|c| (c.directive, c.instructions))
            .collect();
        if pairs.len() < self.config.k {
            warnings.push(format!("coach produced {} of {} directives for {node}", pairs.len(), self.config.k));
        }
        if pairs.is_empty() {
            return Ok(());
        }
        state
            .tree
            .attach_children(node, &pairs, epoch)
            .map_err(|source| OrchestratorError::Tree { epoch, source })?;
        Ok(())
    }

    /// Flat mode: ask the coach for `k` root refinements given the shared
    /// history. Short batches are padded by re-running earlier directives,
    /// most recent first, so every epoch spends the same number of calls.
    fn flat_batch(
        &mut self,
        state: &mut RunState,
        epoch: u32,
        calls: &mut CallCounts,
        warnings: &mut Vec<String>,
    ) -> Result<Vec<NodeId>, OrchestratorError> {
        let failures = std::mem::take(&mut self.last_failures);
        let ctx = self.coach_context(state, NodeId::ROOT, &failures, calls);
        calls.coach += 1;
        let out = coach_expand(self.agents.coach, &ctx)
            .map_err(|source| OrchestratorError::Backend { epoch, node: NodeId::ROOT, source })?;
        let existing: Vec<NodeId> = state.tree.root().children.clone();
        let known: BTreeSet<String> =
            existing.iter().map(|c| state.tree.get(*c).expect("child exists").directive.clone()).collect();
        let pairs: Vec<(String, String)> = out
            .children
            .into_iter()
            .filter(|c| !known.contains(&c.directive))
            .map(|c| (c.directive, c.instructions))
            .collect();
        let mut batch = if pairs.is_empty() {
            Vec::new()
        } else {
            state.tree.attach_children(NodeId::ROOT, &pairs, epoch).map_err(|source| OrchestratorError::Tree { epoch, source })?
        };
        if batch.len() < self.config.k {
            warnings.push(format!("coach produced {} new directives; repeating earlier ones", batch.len()));
        }
        let mut pad = existing.iter().rev().copied().cycle();
        while batch.len() < self.config.k {
            match pad.next() {
                Some(id) if !batch.contains(&id) => batch.push(id),
                Some(_) if existing.len() > batch.len() => continue,
                _ => {
                    // nothing to repeat: fall back to the unconstrained query
                    if !batch.contains(&NodeId::ROOT) {
                        batch.push(NodeId::ROOT);
                    }
                    break;
                }
            }
        }
        Ok(batch)
    }
}
