mod common;

use std::collections::BTreeMap;

use asset_scout::backend::{Agents, BackendError, VALIDATOR_ERROR};
use asset_scout::model::{Language, NodeId};
use asset_scout::orchestrator::{
    run, ClockMode, DedupMode, EpochReport, OrchestratorError, RunConfig, SearchMode, BUDGET_EXHAUSTED,
};
use asset_scout::sim::SimBudget;
use asset_scout::snapshot;
use common::{u200, FixedCoach, NoGrouping, PrefixValidator, ScriptedLeads, SimAgents};

const CLINICAL: &str = "stage = \"clinical\"";

fn sim_config(epochs: u32) -> RunConfig {
    RunConfig { query: CLINICAL.into(), epochs, clock: ClockMode::Simulated, ..RunConfig::default() }
}

fn en_only(epochs: u32) -> RunConfig {
    RunConfig { languages: vec![Language::english()], ..sim_config(epochs) }
}

type Script = Vec<BTreeMap<&'static str, Result<Vec<&'static str>, BackendError>>>;

fn script(epochs: &[&[(&'static str, &[&'static str])]]) -> Script {
    epochs.iter().map(|e| e.iter().map(|(l, names)| (*l, Ok(names.to_vec()))).collect()).collect()
}

#[test]
fn one_epoch_rolls_out_root_without_expanding() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let state = run(&sim_config(1), sim.agents(), |_, _| {}).unwrap();
    assert_eq!(state.tree.len(), 1);
    assert_eq!(state.reports.len(), 1);
    assert_eq!(state.reports[0].selected_nodes, vec![NodeId::ROOT]);
    assert_eq!(state.reports[0].calls.coach, 0);
    assert_eq!(state.tree.root().visits, 1);
}

#[test]
fn five_epochs_bound_the_tree() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let cfg = sim_config(5);
    let mut len_before_last = 0;
    let state = run(&cfg, sim.agents(), |r, s| {
        if r.epoch == cfg.epochs {
            len_before_last = s.tree.len();
        }
    })
    .unwrap();
    assert_eq!(state.tree.root().visits, 5);
    assert!(state.tree.len() <= 5 * cfg.k + 1, "{} nodes", state.tree.len());
    assert_eq!(state.tree.len(), len_before_last, "no expansion after the final epoch");
}

#[test]
fn ten_epochs_two_languages_make_twenty_investigator_calls() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let state = run(&sim_config(10), sim.agents(), |_, _| {}).unwrap();
    let total: usize = state.reports.iter().map(|r| r.calls.investigator).sum();
    assert_eq!(total, 20);
    for r in &state.reports {
        assert_eq!(r.calls.investigator, r.selected_nodes.len() * 2);
    }
}

#[test]
fn languages_en_is_one_call() {
    let inv = ScriptedLeads::new(script(&[&[("en", &["okA"])]]));
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&en_only(1), agents, |_, _| {}).unwrap();
    assert_eq!(state.reports[0].calls.investigator, 1);
    let req = &inv.requests()[0];
    assert_eq!(req.query, CLINICAL);
    assert!(req.directive.is_empty(), "root carries no directive");
}

#[test]
fn overlapping_languages_merge_to_eight() {
    let inv = ScriptedLeads::new(script(&[&[
        ("en", &["okA", "okB", "okC", "Ok-D", "okE"]),
        ("zh", &["ok-d", " OKE ", "okF", "okG", "okH"]),
    ]]));
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&sim_config(1), agents, |_, _| {}).unwrap();
    // normalization oracle: lowercase, trim, collapse spaces
    let mut forms: Vec<String> = ["okA", "okB", "okC", "Ok-D", "okE", "ok-d", " OKE ", "okF", "okG", "okH"]
        .iter()
        .map(|s| s.trim().to_lowercase())
        .collect();
    forms.sort();
    forms.dedup();
    assert_eq!(forms.len(), 8);
    assert_eq!(state.reports[0].nodes[0].candidate_count, 8);
    assert_eq!(state.candidates.len(), 8);
}

#[test]
fn reward_is_precision_times_new_unique() {
    // epoch 1 learns two assets; epoch 2 returns 10 names, 6 valid, 2 of them known
    let inv = ScriptedLeads::new(script(&[
        &[("en", &["okA", "okB"])],
        &[("en", &["okA", "okB", "okC", "okD", "okE", "okF", "n1", "n2", "n3", "n4"])],
    ]));
    let coach = FixedCoach::new(&["narrower"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&en_only(2), agents, |_, _| {}).unwrap();
    let n = &state.reports[1].nodes[0];
    assert_eq!((n.candidate_count, n.validated_count, n.new_unique_count), (10, 6, 4));
    let (p, r) = (6.0 / 10.0, 6.0 / 10.0 * 4.0);
    assert!((n.precision - p).abs() < 1e-12 && (n.reward - r).abs() < 1e-12, "{n:?}");
    let epoch1 = state.reports[0].nodes[0].reward;
    assert_eq!(epoch1, 2.0, "all valid and novel: reward equals the count");
    assert!((state.tree.root().cumulative_reward - (epoch1 + r)).abs() < 1e-12);
    assert_eq!(state.store.len(), 6);
}

#[test]
fn empty_rollout_has_zero_precision_and_reward() {
    let inv = ScriptedLeads::new(vec![]);
    let coach = FixedCoach::new(&["a"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&en_only(2), agents, |_, _| {}).unwrap();
    for r in &state.reports {
        assert_eq!((r.nodes[0].precision, r.nodes[0].reward), (0.0, 0.0));
    }
    assert_eq!(state.tree.root().visits, 2);
}

#[test]
fn duplicate_coach_children_attach_once_with_warning() {
    let inv = ScriptedLeads::new(vec![]);
    let coach = FixedCoach::new(&["modality = \"ADC\"", "modality = \"ADC\"", "modality = \"siRNA\""]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&en_only(2), agents, |_, _| {}).unwrap();
    assert_eq!(state.tree.root().children.len(), 2);
    assert!(state.reports[0].warnings.iter().any(|w| w.contains("2 of 3")), "{:?}", state.reports[0].warnings);
}

#[test]
fn coach_failure_returns_partial_state() {
    let inv = ScriptedLeads::new(script(&[&[("en", &["okA"])]]));
    let coach = FixedCoach::failing();
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let err = run(&en_only(3), agents, |_, _| {}).unwrap_err();
    assert!(matches!(err.error, OrchestratorError::Backend { epoch: 1, .. }), "{}", err.error);
    assert_eq!(err.partial.reports.len(), 1);
    assert_eq!(err.partial.store.canonical_names(), vec!["okA".to_string()]);
}

#[test]
fn validator_failure_is_a_conservative_non_match() {
    let inv = ScriptedLeads::new(script(&[&[("en", &["okA", "boom1", "nope"])]]));
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&en_only(2), agents, |_, _| {}).unwrap();
    let n = &state.reports[0].nodes[0];
    assert_eq!((n.candidate_count, n.validated_count), (3, 1));
    let summary = &coach.contexts.lock().unwrap()[0].failure_summary;
    assert!(summary.contains(&format!("boom1: {VALIDATOR_ERROR}")), "{summary}");
    assert!(summary.contains("nope: wrong modality"), "rejected rationales reach the coach: {summary}");
    assert!(!summary.contains("okA"), "accepted assets carry no failure rationale");
}

#[test]
fn one_failed_language_degrades_to_the_rest() {
    let mut s = script(&[&[("en", &["okA", "okB"])]]);
    s[0].insert("zh", Err(BackendError::Timeout));
    let inv = ScriptedLeads::new(s);
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&sim_config(1), agents, |_, _| {}).unwrap();
    let n = &state.reports[0].nodes[0];
    assert_eq!(n.candidate_count, 2);
    assert_eq!(n.failed_languages, vec![Language::new("zh")]);
    assert!(state.reports[0].warnings.iter().any(|w| w.contains("zh") && w.contains("failed")));
}

#[test]
fn call_ceiling_truncates_gracefully() {
    let inv = ScriptedLeads::new(script(&[&[("en", &["okA", "okB", "okC"]), ("zh", &["okD", "okE"])]]));
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let cfg = RunConfig { max_calls_per_epoch: Some(4), ..sim_config(1) };
    let state = run(&cfg, agents, |_, _| {}).unwrap();
    let r = &state.reports[0];
    assert_eq!((r.calls.investigator, r.calls.validator), (2, 2));
    assert_eq!(r.nodes[0].validated_count, 2);
    assert!(r.warnings.iter().any(|w| w.starts_with(BUDGET_EXHAUSTED)));
}

#[test]
fn candidate_sharing_follows_the_flag() {
    for share in [true, false] {
        let inv = ScriptedLeads::new(script(&[&[("en", &["okA", "nope"])], &[("en", &[])]]));
        let coach = FixedCoach::new(&["x"]);
        let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
        let cfg = RunConfig { share_candidates: share, ..en_only(2) };
        run(&cfg, agents, |_, _| {}).unwrap();
        let second = &inv.requests()[1];
        assert_eq!(second.known_assets, vec!["okA".to_string()]);
        assert_eq!(second.known_candidates.len(), if share { 2 } else { 0 });
        assert!(second.directive.starts_with("x @"));
    }
}

#[test]
fn evidence_is_tagged_by_node_language_and_epoch() {
    let inv = ScriptedLeads::new(script(&[&[("en", &["okA"]), ("zh", &["okB"])], &[("en", &["okC"])]]));
    let coach = FixedCoach::new(&["x"]);
    let agents = Agents { investigator: &inv, validator: &PrefixValidator, deduplicator: &NoGrouping, coach: &coach };
    let state = run(&sim_config(2), agents, |_, _| {}).unwrap();
    let q = state.evidence.queries();
    assert_eq!(q.len(), 3);
    assert_eq!((q[0].epoch, q[0].node), (1, NodeId::ROOT));
    assert_eq!(q[2].epoch, 2);
    assert_ne!(q[2].node, NodeId::ROOT);
    assert!(q.iter().any(|e| e.language == Language::new("zh")));
}

#[test]
fn store_only_grows() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let mut sizes = Vec::new();
    run(&RunConfig { m: 2, ..sim_config(6) }, sim.agents(), |r, s| {
        assert_eq!(r.cumulative_asset_count, s.store.len());
        let new: usize = r.nodes.iter().map(|n| n.new_unique_count).sum();
        sizes.push((r.cumulative_asset_count, new));
    })
    .unwrap();
    let mut prev = 0;
    for (total, new) in sizes {
        assert!(total >= prev);
        assert_eq!(total, prev + new, "only evaluated novelties enter the store");
        prev = total;
    }
}

#[test]
fn m_two_selects_two_distinct_leaves_once_available() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let state = run(&RunConfig { m: 2, ..sim_config(3) }, sim.agents(), |_, _| {}).unwrap();
    assert_eq!(state.reports[0].selected_nodes.len(), 1);
    for r in &state.reports[1..] {
        assert_eq!(r.selected_nodes.len(), 2);
        assert_ne!(r.selected_nodes[0], r.selected_nodes[1]);
        assert_eq!(r.calls.investigator, 4);
    }
}

#[test]
fn flat_mode_builds_a_star_and_spends_k_rollouts_per_epoch() {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let cfg = RunConfig { search_mode: SearchMode::Flat, ..sim_config(4) };
    let state = run(&cfg, sim.agents(), |_, _| {}).unwrap();
    let calls: usize = state.reports.iter().map(|r| r.calls.investigator).sum();
    assert_eq!(calls, 4 * cfg.k * cfg.languages.len());
    for n in state.tree.nodes().iter().skip(1) {
        assert_eq!(n.parent, Some(NodeId::ROOT), "flat children hang off the root");
    }
}

fn reports_jsonl(cfg: &RunConfig, dedup: DedupMode) -> (String, String, String) {
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let cfg = RunConfig { dedup_mode: dedup, ..cfg.clone() };
    let s = run(&cfg, sim.agents(), |_, _| {}).unwrap();
    (snapshot::to_string::<EpochReport, _>("epoch_report", &s.reports), s.store.to_jsonl(), s.tree.to_jsonl())
}

#[test]
fn replay_is_byte_identical() {
    let cfg = RunConfig { m: 2, seed: 11, ..sim_config(6) };
    assert_eq!(reports_jsonl(&cfg, DedupMode::Light), reports_jsonl(&cfg, DedupMode::Light));
}

#[test]
fn backends_are_substitutable() {
    use asset_scout::backend::{Investigator, InvestigatorOutput, InvestigatorRequest};

    // A pass-through wrapper must leave the control-flow trace unchanged.
    struct Wrapped<'a>(&'a dyn Investigator);
    impl Investigator for Wrapped<'_> {
        fn investigate(&self, req: &InvestigatorRequest) -> Result<InvestigatorOutput, BackendError> {
            self.0.investigate(req)
        }
    }
    let u = u200();
    let sim = SimAgents::new(&u, SimBudget::default());
    let wrapped = Wrapped(&sim.investigator);
    let cfg = sim_config(4);
    let direct = run(&cfg, sim.agents(), |_, _| {}).unwrap();
    let via = run(&cfg, Agents { investigator: &wrapped, ..sim.agents() }, |_, _| {}).unwrap();
    let shape = |rs: &[EpochReport]| rs.iter().map(|r| (r.selected_nodes.clone(), r.calls)).collect::<Vec<_>>();
    assert_eq!(shape(&direct.reports), shape(&via.reports));
}

#[test]
fn heavy_and_light_runs_agree_on_the_store() {
    let cfg = sim_config(5);
    let light = reports_jsonl(&cfg, DedupMode::Light);
    let heavy = reports_jsonl(&cfg, DedupMode::Heavy);
    assert_eq!(light.1, heavy.1);
}
