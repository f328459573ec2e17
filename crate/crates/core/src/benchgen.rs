//! Benchmark construction: mining schedule, discoverability filter,
//! asset-to-query generation with a leakage guard, and a bounded
//! validate-and-revise loop.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, MatchVerdict};
use crate::model::{normalize_name, AssetRecord, Language, Provenance, StageClass};
use crate::sim::{stable_seed, Universe};

pub const REGIONS_FIXTURE: &str = include_str!("../fixtures/regions.json");
pub const QUERY_GROUPS_FIXTURE: &str = include_str!("../fixtures/query_groups.json");
pub const DEFAULT_MAX_ROUNDS: usize = 5;
pub const DEFAULT_PROBES_PER_LANGUAGE: usize = 3;
pub const MAX_ENGLISH_PAGES: u32 = 9;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchgenError {
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("no query group fits the attributes of `{0}`")]
    NoEligibleGroup(String),
    #[error("query leaks identifier `{identifier}`")]
    LeakageDetected { identifier: String },
    #[error("not confirmed after {rounds} rounds: {last_rationale}")]
    Unresolvable { rounds: usize, last_rationale: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSources {
    pub region: String,
    /// `(language, source)`: every source publishes in one language.
    pub sources: Vec<(Language, String)>,
}

pub fn regions_fixture() -> Vec<RegionSources> {
    serde_json::from_str(REGIONS_FIXTURE).expect("bundled regions fixture parses")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MiningTuple {
    pub region: String,
    pub language: Language,
    pub source: String,
    pub stage: StageClass,
}

/// Round-robin over every `(region, language, source, stage)`, forever.
/// Each cycle visits the same tuples in the same order.
#[derive(Debug, Clone)]
pub struct TupleSchedule {
    cycle: Vec<MiningTuple>,
    at: usize,
}

impl TupleSchedule {
    pub fn cycle_len(&self) -> usize {
        self.cycle.len()
    }

    pub fn one_cycle(&self) -> &[MiningTuple] {
        &self.cycle
    }
}

impl Iterator for TupleSchedule {
    type Item = MiningTuple;

    fn next(&mut self) -> Option<MiningTuple> {
        let t = self.cycle.get(self.at % self.cycle.len().max(1))?.clone();
        self.at += 1;
        Some(t)
    }
}

pub fn schedule_tuples(regions: &[RegionSources]) -> Result<TupleSchedule, BenchgenError> {
    let mut cycle = Vec::new();
    for r in regions {
        for (language, source) in &r.sources {
            for stage in [StageClass::Preclinical, StageClass::Clinical] {
                cycle.push(MiningTuple {
                    region: r.region.clone(),
                    language: language.clone(),
                    source: source.clone(),
                    stage,
                });
            }
        }
    }
    if cycle.is_empty() {
        return Err(BenchgenError::Fixture("regions fixture has no sources".into()));
    }
    Ok(TupleSchedule { cycle, at: 0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoverabilityProfile {
    pub english_pages: u32,
    pub local_pages: u32,
}

/// Thin English footprint, some local-language footprint.
pub fn under_radar_filter(p: DiscoverabilityProfile) -> bool {
    p.english_pages <= MAX_ENGLISH_PAGES && p.local_pages > 0
}

/// Result-page counts for a search query (a SERP tool or a fixture).
pub trait PageCounter: Sync {
    fn pages(&self, query: &str, language: &Language) -> Result<u32, BackendError>;
}

/// Probe queries for one language: the asset's names, most specific first.
pub fn probe_queries(asset: &AssetRecord, probes: usize) -> Vec<String> {
    let mut names: Vec<&String> = asset.aliases.iter().collect();
    names.sort_by_key(|n| (n.as_str() != asset.canonical_name, n.as_str()));
    let mut out: Vec<String> = names.iter().map(|n| format!("\"{n}\"")).collect();
    if let Some(t) = asset.targets.first() {
        out.insert(1.min(out.len()), format!("\"{}\" {t}", asset.canonical_name));
    }
    out.truncate(probes.max(1));
    out
}

/// Maximum page count over the probes, in English and in the origin language.
pub fn profile_asset(
    asset: &AssetRecord,
    counter: &dyn PageCounter,
    probes: usize,
) -> Result<DiscoverabilityProfile, BackendError> {
    let queries = probe_queries(asset, probes);
    let max_over = |lang: &Language| -> Result<u32, BackendError> {
        let mut best = 0;
        for q in &queries {
            best = best.max(counter.pages(q, lang)?);
        }
        Ok(best)
    };
    let english_pages = max_over(&Language::english())?;
    let local_pages = if asset.origin_language == Language::english() {
        english_pages
    } else {
        max_over(&asset.origin_language)?
    };
    Ok(DiscoverabilityProfile { english_pages, local_pages })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    ProgramAttrition,
    BusinessDevelopmentScreening,
    IndicationLandscape,
    TargetFirstLandscape,
    PrecisionOncology,
    WhiteSpaceTargetHunting,
    GeographyAndOrigin,
    PlatformAndModality,
    CatalystsAndReadouts,
    CombinationRegimens,
}

impl Intent {
    pub const ALL: [Intent; 10] = [
        Intent::ProgramAttrition,
        Intent::BusinessDevelopmentScreening,
        Intent::IndicationLandscape,
        Intent::TargetFirstLandscape,
        Intent::PrecisionOncology,
        Intent::WhiteSpaceTargetHunting,
        Intent::GeographyAndOrigin,
        Intent::PlatformAndModality,
        Intent::CatalystsAndReadouts,
        Intent::CombinationRegimens,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Intent::ProgramAttrition => "Program attrition and suspended or terminated programs",
            Intent::BusinessDevelopmentScreening => "Business development screening for in-licensing or acquisition",
            Intent::IndicationLandscape => "Indication landscape mapping",
            Intent::TargetFirstLandscape => "Target-first landscape mapping",
            Intent::PrecisionOncology => "Precision oncology sub-landscapes",
            Intent::WhiteSpaceTargetHunting => "White-space and low-competition target hunting",
            Intent::GeographyAndOrigin => "Geography and origin constraints",
            Intent::PlatformAndModality => "Platform and modality scouting",
            Intent::CatalystsAndReadouts => "Catalysts and upcoming readouts",
            Intent::CombinationRegimens => "Combination regimen opportunity discovery",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Broad,
    Tight,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGroup {
    pub id: String,
    pub intent: Intent,
    pub tier: Tier,
    /// Free text with `[bracketed]` slots.
    pub template: String,
}

pub fn query_groups_fixture() -> Vec<QueryGroup> {
    serde_json::from_str(QUERY_GROUPS_FIXTURE).expect("bundled query groups fixture parses")
}

/// Asset attributes a template slot draws on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Need {
    Modality,
    Targets,
    Indications,
    TrialDetail,
    Geography,
}

impl QueryGroup {
    pub fn slots(&self) -> Vec<&str> {
        let mut out = Vec::new();
        let mut rest = self.template.as_str();
        while let Some(a) = rest.find('[') {
            let Some(b) = rest[a..].find(']') else { break };
            out.push(&rest[a + 1..a + b]);
            rest = &rest[a + b + 1..];
        }
        out
    }

    pub fn needs(&self) -> BTreeSet<Need> {
        let mut out = BTreeSet::new();
        for slot in self.slots() {
            let s = slot.to_lowercase();
            if s.contains("region") {
                out.insert(Need::Geography);
            } else if s.contains("modality") {
                out.insert(Need::Modality);
            } else if s.contains("target") || s.contains("pathway") {
                out.insert(Need::Targets);
            } else if s.contains("indication") || s.contains("disease") || s.contains("therapy area") {
                out.insert(Need::Indications);
            } else if s.contains("biomarker") || s.contains("endpoint") || s.contains("efficacy") {
                out.insert(Need::TrialDetail);
            }
        }
        out
    }

    pub fn fits(&self, asset: &AssetRecord) -> bool {
        self.needs().into_iter().all(|n| match n {
            Need::Modality => !asset.modality.is_empty(),
            Need::Targets => !asset.targets.is_empty(),
            Need::Indications => !asset.indications.is_empty(),
            Need::TrialDetail => asset
                .trials
                .iter()
                .any(|t| !t.biomarkers.is_empty() || !t.endpoints.is_empty() || !t.efficacy_data.is_empty()),
            Need::Geography => country_of(asset).is_some(),
        })
    }
}

/// Writes a query for an asset under a group; `feedback` carries the last
/// rejection (leakage or validator rationale) when revising.
pub trait QueryWriter: Sync {
    fn write(&self, asset: &AssetRecord, group: &QueryGroup, feedback: Option<&str>) -> Result<String, BackendError>;
}

/// Judges whether an asset is a correct answer to a query.
pub trait QueryJudge: Sync {
    fn judge(&self, query: &str, asset: &AssetRecord) -> Result<MatchVerdict, BackendError>;
}

/// Case, spacing and punctuation are ignored when matching identifiers, so
/// `HR-1234` is caught as `hr 1234` or `HR1234`.
fn leak_key(s: &str) -> String {
    normalize_name(s).chars().filter(|c| c.is_alphanumeric()).collect()
}

/// Keys shorter than this are too likely to occur inside ordinary words.
const MIN_LEAK_KEY: usize = 3;

/// First alias, patent number or source URL of the asset found in the query.
pub fn leaked_identifier(query: &str, asset: &AssetRecord) -> Option<String> {
    let text = leak_key(query);
    let mut forbidden = asset.normalized_aliases();
    forbidden.extend(asset.patents.iter().map(|p| normalize_name(p)));
    forbidden.extend(asset.provenance.iter().map(|p| normalize_name(&p.source_url)));
    forbidden
        .into_iter()
        .find(|f| {
            let key = leak_key(f);
            key.chars().count() >= MIN_LEAK_KEY && text.contains(&key)
        })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedQuery {
    pub text: String,
    pub group_id: String,
}

/// Pick a group whose slots the asset can fill (stable per asset), write the
/// query, and regenerate up to `retries` times while it leaks an identifier.
pub fn generate_query(
    asset: &AssetRecord,
    groups: &[QueryGroup],
    writer: &dyn QueryWriter,
    retries: usize,
) -> Result<GeneratedQuery, BenchgenError> {
    let eligible: Vec<&QueryGroup> = groups.iter().filter(|g| g.fits(asset)).collect();
    if eligible.is_empty() {
        return Err(BenchgenError::NoEligibleGroup(asset.canonical_name.clone()));
    }
    let pick = stable_seed(0, &[&asset.canonical_name]) as usize % eligible.len();
    write_checked(asset, eligible[pick], writer, None, retries)
}

fn write_checked(
    asset: &AssetRecord,
    group: &QueryGroup,
    writer: &dyn QueryWriter,
    feedback: Option<&str>,
    retries: usize,
) -> Result<GeneratedQuery, BenchgenError> {
    let mut note = feedback.map(String::from);
    let mut leaked = String::new();
    for _ in 0..=retries {
        let text = writer.write(asset, group, note.as_deref())?;
        match leaked_identifier(&text, asset) {
            None => return Ok(GeneratedQuery { text, group_id: group.id.clone() }),
            Some(id) => {
                note = Some(format!("the query must not mention `{id}`"));
                leaked = id;
            }
        }
    }
    Err(BenchgenError::LeakageDetected { identifier: leaked })
}

/// Validate, and on rejection revise with the rationale, for at most
/// `max_rounds` validator calls.
pub fn validate_and_revise(
    query: GeneratedQuery,
    asset: &AssetRecord,
    group: &QueryGroup,
    judge: &dyn QueryJudge,
    writer: &dyn QueryWriter,
    max_rounds: usize,
) -> Result<(GeneratedQuery, AssetRecord), BenchgenError> {
    let mut current = query;
    let mut rationale = String::new();
    for round in 1..=max_rounds.max(1) {
        let verdict = judge
            .judge(&current.text, asset)
            .unwrap_or_else(|e| MatchVerdict::rejected(&format!("{}: {e}", crate::backend::VALIDATOR_ERROR)));
        if verdict.is_match {
            return Ok((current, asset.clone()));
        }
        rationale = verdict.failure_rationale;
        if round < max_rounds {
            current = write_checked(asset, group, writer, Some(&rationale), 0)?;
        }
    }
    Err(BenchgenError::Unresolvable { rounds: max_rounds.max(1), last_rationale: rationale })
}

/// One benchmark record, ready for human review.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub query: String,
    pub group_id: String,
    pub asset: String,
    pub profile: DiscoverabilityProfile,
    pub provenance: Vec<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchgenConfig {
    pub max_rounds: usize,
    pub leakage_retries: usize,
    pub probes_per_language: usize,
    /// Share of assets (in input order) that go through the discoverability filter;
    /// the rest are kept without it.
    pub filter_fraction: f64,
}

impl Default for BenchgenConfig {
    fn default() -> Self {
        Self { max_rounds: DEFAULT_MAX_ROUNDS, leakage_retries: 2, probes_per_language: DEFAULT_PROBES_PER_LANGUAGE, filter_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchgenOutput {
    pub records: Vec<BenchRecord>,
    /// `(asset, reason)` for every asset that did not make it.
    pub skipped: Vec<(String, String)>,
}

/// Profile, filter, generate and confirm one query per asset.
pub fn build_benchmark(
    assets: &[AssetRecord],
    groups: &[QueryGroup],
    counter: &dyn PageCounter,
    writer: &dyn QueryWriter,
    judge: &dyn QueryJudge,
    config: &BenchgenConfig,
) -> BenchgenOutput {
    let mut out = BenchgenOutput::default();
    let filtered = (assets.len() as f64 * config.filter_fraction.clamp(0.0, 1.0)).round() as usize;
    for (i, asset) in assets.iter().enumerate() {
        let skip = |out: &mut BenchgenOutput, why: String| out.skipped.push((asset.canonical_name.clone(), why));
        let profile = match profile_asset(asset, counter, config.probes_per_language) {
            Ok(p) => p,
            Err(e) => {
                skip(&mut out, format!("profiling failed: {e}"));
                continue;
            }
        };
        if i < filtered && !under_radar_filter(profile) {
            skip(&mut out, format!("not under the radar ({} en / {} local pages)", profile.english_pages, profile.local_pages));
            continue;
        }
        let result = generate_query(asset, groups, writer, config.leakage_retries).and_then(|q| {
            let group = groups.iter().find(|g| g.id == q.group_id).expect("chosen group exists");
            validate_and_revise(q, asset, group, judge, writer, config.max_rounds)
        });
        match result {
            Ok((q, a)) => out.records.push(BenchRecord {
                query: q.text,
                group_id: q.group_id,
                asset: a.canonical_name.clone(),
                profile,
                provenance: a.provenance.clone(),
            }),
            Err(e) => skip(&mut out, e.to_string()),
        }
    }
    out
}

/// Walk the schedule and take, for each tuple, the next unused universe asset
/// with that origin language and stage. Stops at `limit` assets or after a
/// full cycle that yields nothing.
pub fn mine_sim_assets(universe: &Universe, schedule: TupleSchedule, limit: usize) -> Vec<(MiningTuple, AssetRecord)> {
    let mut used = BTreeSet::new();
    let mut out = Vec::new();
    let cycle = schedule.cycle_len();
    let mut dry = 0;
    for tuple in schedule {
        if out.len() >= limit || dry >= cycle {
            break;
        }
        let next = universe
            .assets()
            .find(|e| !used.contains(&e.id) && e.origin_language == tuple.language && e.stage == tuple.stage);
        match next {
            Some(e) => {
                used.insert(e.id);
                out.push((tuple, e.to_asset_record()));
                dry = 0;
            }
            None => dry += 1,
        }
    }
    out
}

/// Page counts from a simulated universe: visibility in the language scaled
/// to at most 20 pages; names it does not know have no pages.
#[derive(Debug, Clone, Copy)]
pub struct SimPageCounter<'u> {
    pub universe: &'u Universe,
}

pub const SIM_MAX_PAGES: f64 = 20.0;

impl PageCounter for SimPageCounter<'_> {
    fn pages(&self, query: &str, language: &Language) -> Result<u32, BackendError> {
        let name = query.split('"').nth(1).unwrap_or(query);
        Ok(self
            .universe
            .resolve_one(name)
            .map(|e| (e.visibility_in(language) * SIM_MAX_PAGES).round() as u32)
            .unwrap_or(0))
    }
}

fn country_of(asset: &AssetRecord) -> Option<String> {
    let by_language = match asset.origin_language.as_str() {
        "zh" => Some("China"),
        "ja" => Some("Japan"),
        "ko" => Some("Korea"),
        "de" => Some("Germany"),
        "fr" => Some("France"),
        "es" => Some("Spain"),
        "pt" => Some("Brazil"),
        _ => None,
    };
    by_language.map(String::from).or_else(|| {
        asset.trials.iter().flat_map(|t| t.site_countries.iter()).next().map(|c| match c.as_str() {
            "usa" => "US".to_string(),
            "europe" => "European".to_string(),
            other => {
                let mut cs = other.chars();
                cs.next().map(|f| f.to_uppercase().chain(cs).collect()).unwrap_or_default()
            }
        })
    })
}

fn modality_family(m: &str) -> String {
    match m {
        "antibody" => "monoclonal antibody".into(),
        "bispecific" => "bispecific antibody".into(),
        "ADC" => "antibody-drug conjugate".into(),
        "siRNA" => "RNA interference".into(),
        other => other.into(),
    }
}

fn stage_phrase(asset: &AssetRecord, loosened: bool) -> &'static str {
    match (loosened, asset.stage_class) {
        (true, _) => "preclinical or clinical",
        (false, StageClass::Preclinical) => "preclinical",
        (false, StageClass::Clinical) => "clinical",
    }
}

/// Template-driven writer: fills each known group's slots from the asset at
/// class level. Feedback mentioning the stage loosens the stage window.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedQueryWriter;

impl QueryWriter for ScriptedQueryWriter {
    fn write(&self, asset: &AssetRecord, group: &QueryGroup, feedback: Option<&str>) -> Result<String, BackendError> {
        let loosen = feedback.is_some_and(|f| f.to_lowercase().contains("stage"));
        let first = |xs: &[String]| xs.first().cloned().unwrap_or_default();
        let target = first(&asset.targets);
        let indication = first(&asset.indications);
        let modality = modality_family(&asset.modality);
        let text = match group.id.as_str() {
            "G1" => format!(
                "Find all {stage} {modality} assets targeting {target} for {indication}, reporting early efficacy or safety data and no more than 3 competitors ahead in {stage}; exclude tool compounds not intended for patient use.",
                stage = stage_phrase(asset, loosen)
            ),
            "G2" => format!(
                "Find all drug assets targeting {target}, across any modality, any indication, and any development phase, focusing exclusively on {target} (do not include multi-target assets unless {target} is clearly a primary target)."
            ),
            "G3" => format!(
                "Find {country}-developed {modality} assets in {stage} development for {indication} targeting {target}.",
                country = country_of(asset).unwrap_or_default(),
                stage = stage_phrase(asset, loosen)
            ),
            "G4" => format!("Find all drug assets currently in preclinical or clinical development for treatment of {indication}."),
            other => return Err(BackendError::Config(format!("scripted writer has no phrasing for group `{other}`"))),
        };
        Ok(text)
    }
}

/// Checks the attribute values a query names against the asset.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedQueryJudge;

impl QueryJudge for ScriptedQueryJudge {
    fn judge(&self, query: &str, asset: &AssetRecord) -> Result<MatchVerdict, BackendError> {
        let q = query.to_lowercase();
        let mut fails = Vec::new();
        let both = q.contains("preclinical or clinical");
        if !both {
            let wants_pre = q.contains("preclinical");
            let wants_clin = q.replace("preclinical", "").contains("clinical");
            let ok = match asset.stage_class {
                StageClass::Preclinical => !wants_clin || wants_pre,
                StageClass::Clinical => !wants_pre || wants_clin,
            };
            if !ok {
                fails.push(format!("wrong stage (asset is {})", asset.stage_class.as_str()));
            }
        }
        for i in crate::sim::INDICATIONS {
            if q.contains(&format!("treatment of {}", i.to_lowercase())) && !asset.indications.iter().any(|a| a.eq_ignore_ascii_case(i)) {
                fails.push(format!("wrong indication (query names {i})"));
            }
        }
        for t in crate::sim::TARGETS {
            if q.contains(&format!("targeting {}", t.to_lowercase())) && !asset.targets.iter().any(|a| a.eq_ignore_ascii_case(t)) {
                fails.push(format!("wrong target (query names {t})"));
            }
        }
        Ok(if fails.is_empty() {
            MatchVerdict { is_match: true, per_criterion: vec![], failure_rationale: String::new(), normalized: None }
        } else {
            MatchVerdict::rejected(&fails.join("; "))
        })
    }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;

    fn dmd_asset() -> AssetRecord {
        let mut a = AssetRecord::new("Tamirogene", Language::new("zh"), StageClass::Preclinical)
            .with_alias("HR-1234")
            .with_alias("他米罗基因");
        a.indications = vec!["DMD".into()];
        a.modality = "gene therapy".into();
        a.targets = vec!["dystrophin".into()];
        a.cite("indications", "https://x/1", "for DMD")
            .cite("modality", "https://x/1", "gene therapy")
            .cite("targets", "https://x/1", "dystrophin")
    }

    fn g(id: &str) -> QueryGroup {
        query_groups_fixture().into_iter().find(|q| q.id == id).unwrap()
    }

    #[test]
    fn fixtures_parse() {
        assert_eq!(regions_fixture().len(), 10);
        let groups = query_groups_fixture();
        assert_eq!(groups.len(), 4);
        assert!(groups.iter().all(|g| !g.slots().is_empty()));
    }

    #[test]
    fn g4_example_sentence() {
        let q = ScriptedQueryWriter.write(&dmd_asset(), &g("G4"), None).unwrap();
        assert_eq!(q, "Find all drug assets currently in preclinical or clinical development for treatment of DMD.");
    }

    #[test]
    fn slot_satisfiability() {
        let a = dmd_asset();
        assert!(!g("G1").fits(&a), "no trial detail");
        assert!(g("G2").fits(&a) && g("G3").fits(&a) && g("G4").fits(&a));
        let bare = AssetRecord::new("X", Language::english(), StageClass::Preclinical);
        assert!(matches!(generate_query(&bare, &query_groups_fixture(), &ScriptedQueryWriter, 2), Err(BenchgenError::NoEligibleGroup(_))));
    }

    struct Leaky;

    impl QueryWriter for Leaky {
        fn write(&self, a: &AssetRecord, _: &QueryGroup, _: Option<&str>) -> Result<String, BackendError> {
            Ok(format!("Find programs like hr 1234 for {}", a.indications[0]))
        }
    }

    #[test]
    fn leaking_code_is_detected() {
        let err = generate_query(&dmd_asset(), &[g("G4")], &Leaky, 2).unwrap_err();
        assert!(matches!(err, BenchgenError::LeakageDetected { ref identifier } if identifier == "hr-1234"));
    }

    struct StageOnce(AtomicUsize);

    impl QueryJudge for StageOnce {
        fn judge(&self, q: &str, _: &AssetRecord) -> Result<MatchVerdict, BackendError> {
            if self.0.fetch_add(1, Ordering::SeqCst) == 0 {
                assert!(!q.contains("preclinical or clinical"));
                return Ok(MatchVerdict::rejected("stage constraint too narrow (asset stage unconfirmed)"));
            }
            Ok(MatchVerdict { is_match: true, per_criterion: vec![], failure_rationale: String::new(), normalized: None })
        }
    }

    #[test]
    fn revision_loosens_stage_on_round_two() {
        let a = dmd_asset();
        let first = write_checked(&a, &g("G3"), &ScriptedQueryWriter, None, 0).unwrap();
        let judge = StageOnce(AtomicUsize::new(0));
        let (q, _) = validate_and_revise(first, &a, &g("G3"), &judge, &ScriptedQueryWriter, 5).unwrap();
        assert_eq!(judge.0.load(Ordering::SeqCst), 2);
        assert!(q.text.contains("preclinical or clinical"));
    }

    #[test]
    fn scripted_judge_accepts_own_queries() {
        let a = dmd_asset();
        for id in ["G2", "G3", "G4"] {
            let q = ScriptedQueryWriter.write(&a, &g(id), None).unwrap();
            assert!(ScriptedQueryJudge.judge(&q, &a).unwrap().is_match, "{q}");
        }
        let wrong = "Find all drug assets currently in clinical development for treatment of obesity.";
        let v = ScriptedQueryJudge.judge(wrong, &a).unwrap();
        assert!(v.failure_rationale.contains("wrong stage") && v.failure_rationale.contains("wrong indication"));
    }

    #[test]
    fn sim_pipeline_keeps_under_radar_assets() {
        let u = Universe::generate(&crate::sim::UniverseSpec::default());
        let assets: Vec<AssetRecord> = u.assets().map(|e| e.to_asset_record()).collect();
        let counter = SimPageCounter { universe: &u };
        let out = build_benchmark(&assets, &query_groups_fixture(), &counter, &ScriptedQueryWriter, &ScriptedQueryJudge, &BenchgenConfig::default());
        assert_eq!(out.records.len() + out.skipped.len(), assets.len());
        assert!(!out.records.is_empty());
        for r in &out.records {
            assert!(under_radar_filter(r.profile));
            let a = assets.iter().find(|a| a.canonical_name == r.asset).unwrap();
            assert_eq!(leaked_identifier(&r.query, a), None);
        }
    }

    #[test]
    fn miner_follows_schedule_languages() {
        let u = Universe::generate(&crate::sim::UniverseSpec::default());
        let mined = mine_sim_assets(&u, schedule_tuples(&regions_fixture()).unwrap(), 30);
        assert_eq!(mined.len(), 30);
        let names: BTreeSet<&str> = mined.iter().map(|(_, a)| a.canonical_name.as_str()).collect();
        assert_eq!(names.len(), 30);
        for (t, a) in &mined {
            assert_eq!((&t.language, t.stage), (&a.origin_language, a.stage_class));
        }
        let all = mine_sim_assets(&u, schedule_tuples(&regions_fixture()).unwrap(), usize::MAX);
        assert_eq!(all.len(), u.assets().count());
    }

    #[test]
    fn probes_are_bounded() {
        assert_eq!(probe_queries(&dmd_asset(), 3).len(), 3);
        assert_eq!(probe_queries(&dmd_asset(), 3)[0], "\"Tamirogene\"");
    }
}
