//! Deterministic synthetic universe of drug programs.
//!
//! Each entity has attributes, cross-lingual aliases, a per-language
//! discoverability weight and a prominence score. Distractors are lookalikes
//! of real assets with exactly one attribute changed. Ground truth for any
//! predicate is an exhaustive scan ([`Universe::oracle_answer`]).
//!
//! Simulated search returns only the `horizon` most prominent entities of a
//! slice that are visible in the request language, and at most `per_call` of
//! those per call. A broad query therefore stops yielding new assets once its
//! horizon is exhausted; narrower directives reach deeper.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::InvestigatorRequest;
use crate::criteria::{Attributes, CriteriaError, Expr, Field};
use crate::model::{normalize_name, AssetRecord, Language, StageClass, TrialRecord};

pub const MODALITIES: &[&str] =
    &["small molecule", "antibody", "ADC", "bispecific", "cell therapy", "gene therapy", "siRNA"];
pub const TARGETS: &[&str] =
    &["PD-1", "HER2", "KRAS G12C", "CD19", "GLP-1R", "IL-23", "TSHR", "LAT1", "HBsAg", "Claudin 18.2"];
pub const INDICATIONS: &[&str] = &[
    "NSCLC",
    "breast cancer",
    "lymphoma",
    "obesity",
    "psoriasis",
    "DMD",
    "hepatitis B",
    "thyroid eye disease",
];
/// Region, origin language, sampling weight.
pub const REGIONS: &[(&str, &str, f64)] = &[
    ("china", "zh", 0.35),
    ("usa", "en", 0.2),
    ("japan", "ja", 0.15),
    ("korea", "ko", 0.15),
    ("europe", "en", 0.15),
];

const SYLLABLES: &[[&str; 4]] = &[
    ["ta", "他", "タ", "타"],
    ["mi", "米", "ミ", "미"],
    ["ro", "罗", "ロ", "로"],
    ["li", "利", "リ", "리"],
    ["ve", "维", "ヴェ", "베"],
    ["no", "诺", "ノ", "노"],
    ["sa", "萨", "サ", "사"],
    ["ki", "基", "キ", "키"],
    ["do", "多", "ド", "도"],
    ["ra", "拉", "ラ", "라"],
    ["zo", "佐", "ゾ", "조"],
    ["pe", "佩", "ペ", "페"],
    ["lu", "卢", "ル", "루"],
    ["ga", "加", "ガ", "가"],
    ["ne", "内", "ネ", "네"],
    ["xi", "西", "シ", "시"],
];

fn suffix(modality: &str) -> [&'static str; 4] {
    match modality {
        "antibody" => ["mab", "单抗", "マブ", "맙"],
        "small molecule" => ["tinib", "替尼", "チニブ", "티닙"],
        "ADC" => ["vedotin", "维多汀", "ベドチン", "베도틴"],
        "bispecific" => ["tamab", "他单抗", "タマブ", "타맙"],
        "cell therapy" => ["cel", "赛", "セル", "셀"],
        "gene therapy" => ["gene", "基因", "ジーン", "진"],
        _ => ["siran", "西兰", "シラン", "시란"],
    }
}

fn script_index(lang: &Language) -> Option<usize> {
    match lang.as_str() {
        "zh" => Some(1),
        "ja" => Some(2),
        "ko" => Some(3),
        _ => None,
    }
}

const CODE_PREFIXES: &[&str] = &[
    "HR", "BGB", "JS", "IBI", "SHR", "TQB", "DS", "ONO", "TAK", "HLX", "YH", "ABL", "GC", "CKD", "RMX", "NVX",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseSpec {
    pub seed: u64,
    pub asset_count: usize,
    pub languages: Vec<Language>,
    pub distractor_count: usize,
    pub alias_collision_rate: f64,
    #[serde(default = "default_visibility_threshold")]
    pub visibility_threshold: f64,
}

fn default_visibility_threshold() -> f64 {
    0.5
}

impl Default for UniverseSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            asset_count: 200,
            languages: ["en", "zh", "ja", "ko"].map(Language::new).to_vec(),
            distractor_count: 60,
            alias_collision_rate: 0.0,
            visibility_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alias {
    pub name: String,
    /// `None` for language-neutral identifiers such as development codes.
    pub language: Option<Language>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntityKind {
    Asset,
    Distractor { lookalike_of: u32, perturbed: Field },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub kind: EntityKind,
    pub canonical_name: String,
    pub aliases: Vec<Alias>,
    pub modality: String,
    pub target: String,
    pub indication: String,
    pub stage: StageClass,
    pub phase: String,
    pub region: String,
    pub origin_language: Language,
    pub developer: String,
    pub visibility: BTreeMap<Language, f64>,
    pub prominence: f64,
}

impl Attributes for Entity {
    fn attribute(&self, field: Field) -> &str {
        match field {
            Field::Modality => &self.modality,
            Field::Target => &self.target,
            Field::Indication => &self.indication,
            Field::Stage => self.stage.as_str(),
            Field::Region => &self.region,
            Field::OriginLanguage => self.origin_language.as_str(),
        }
    }
}

impl Entity {
    pub fn is_asset(&self) -> bool {
        matches!(self.kind, EntityKind::Asset)
    }

    pub fn visibility_in(&self, lang: &Language) -> f64 {
        self.visibility.get(lang).copied().unwrap_or(0.0)
    }

    /// The name an investigator searching in `lang` would report.
    pub fn name_in(&self, lang: &Language) -> &str {
        let localized = self.aliases.iter().find(|a| a.language.as_ref() == Some(lang));
        match localized {
            Some(a) => &a.name,
            None if lang.as_str() == "en" => &self.canonical_name,
            None => self.code(),
        }
    }

    /// Development code: the first language-neutral alias.
    pub fn code(&self) -> &str {
        self.aliases.iter().find(|a| a.language.is_none()).map(|a| a.name.as_str()).unwrap_or(&self.canonical_name)
    }

    pub fn alias_names(&self) -> impl Iterator<Item = &str> {
        self.aliases.iter().map(|a| a.name.as_str())
    }

    fn source(&self) -> String {
        format!("https://registry.sim/entity/{}", self.id)
    }

    /// Enriched record with one provenance pair per populated attribute.
    pub fn to_asset_record(&self) -> AssetRecord {
        let src = self.source();
        let mut r = AssetRecord::new(&self.canonical_name, self.origin_language.clone(), self.stage);
        for a in self.alias_names() {
            r.aliases.insert(a.to_string());
        }
        r.modality = self.modality.clone();
        r.targets = vec![self.target.clone()];
        r.indications = vec![self.indication.clone()];
        r.developers = vec![self.developer.clone()];
        r.moa_short = format!("{} modulator", self.target);
        r.stage_detail = self.phase.clone();
        if self.stage == StageClass::Clinical {
            r.trials.push(TrialRecord {
                indication: self.indication.clone(),
                phase: self.phase.clone(),
                site_countries: vec![self.region.clone()],
                ..Default::default()
            });
        }
        let claims = [
            ("modality", format!("{} is a {}", self.canonical_name, self.modality)),
            ("targets", format!("{} targets {}", self.canonical_name, self.target)),
            ("indications", format!("being developed for {}", self.indication)),
            ("developers", format!("developed by {}", self.developer)),
            ("moa_short", format!("acts on {}", self.target)),
            ("stage_detail", format!("currently at {}", self.phase)),
        ];
        for (claim, quote) in claims {
            r = r.cite(claim, &src, &quote);
        }
        if !r.trials.is_empty() {
            r = r.cite("trials", &src, &format!("{} trial in {}", self.phase, self.indication));
        }
        r
    }
}

/// Per-call search limits for simulated investigators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBudget {
    /// Maximum leads returned by one call.
    pub per_call: usize,
    /// Depth of the visible result list for one (query, directive, language).
    pub horizon: usize,
    /// Share of each call's slots filled with near-miss distractors when available.
    pub distractor_rate: f64,
}

impl Default for SimBudget {
    fn default() -> Self {
        Self { per_call: 5, horizon: 12, distractor_rate: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lead {
    pub name: String,
    pub source_url: String,
    pub entity: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SimInvestigation {
    pub leads: Vec<Lead>,
    pub executed_queries: Vec<String>,
    pub visited_domains: Vec<String>,
}

/// Separator between query and directive in executed-query text.
pub const DIRECTIVE_SEPARATOR: &str = " :: ";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub spec: UniverseSpec,
    pub entities: Vec<Entity>,
    #[serde(skip)]
    alias_index: BTreeMap<String, Vec<u32>>,
}

impl Universe {
    pub fn generate(spec: &UniverseSpec) -> Universe {
        Generator::new(spec).run()
    }

    fn from_parts(spec: UniverseSpec, entities: Vec<Entity>) -> Universe {
        let mut u = Universe { spec, entities, alias_index: BTreeMap::new() };
        u.reindex();
        u
    }

    fn reindex(&mut self) {
        self.alias_index.clear();
        for e in &self.entities {
            let mut seen = BTreeSet::new();
            for a in e.alias_names().chain(std::iter::once(e.canonical_name.as_str())) {
                let key = normalize_name(a);
                if seen.insert(key.clone()) {
                    self.alias_index.entry(key).or_default().push(e.id);
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("universe serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Universe, serde_json::Error> {
        let raw: Universe = serde_json::from_str(text)?;
        Ok(Universe::from_parts(raw.spec, raw.entities))
    }

    pub fn entity(&self, id: u32) -> &Entity {
        &self.entities[id as usize]
    }

    pub fn assets(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.is_asset())
    }

    /// Entity ids owning `name` after normalization (more than one only under alias collisions).
    pub fn resolve(&self, name: &str) -> &[u32] {
        self.alias_index.get(&normalize_name(name)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn resolve_one(&self, name: &str) -> Option<&Entity> {
        self.resolve(name).first().map(|&id| self.entity(id))
    }

    /// True if two distinct entities share a normalized alias.
    pub fn has_alias_collisions(&self) -> bool {
        self.alias_index.values().any(|ids| ids.len() > 1)
    }

    /// Ground truth: ids of real assets satisfying `q`, by exhaustive scan.
    pub fn oracle_answer(&self, q: &Expr) -> Vec<u32> {
        self.assets().filter(|e| q.eval(*e)).map(|e| e.id).collect()
    }

    pub fn is_visible(&self, e: &Entity, lang: &Language) -> bool {
        e.visibility_in(lang) >= self.spec.visibility_threshold
    }

    /// Simulated web search for one investigator request.
    pub fn investigate(&self, req: &InvestigatorRequest, budget: &SimBudget) -> Result<SimInvestigation, CriteriaError> {
        let query = Expr::parse(&req.query)?;
        let slice = Expr::parse(&req.directive)?;
        let lang = &req.language;

        let known: BTreeSet<String> =
            req.known_assets.iter().chain(req.known_candidates.iter()).map(|n| normalize_name(n)).collect();
        let is_known = |e: &Entity| e.alias_names().any(|a| known.contains(&normalize_name(a)));

        let horizon = |pred: &dyn Fn(&Entity) -> bool| -> Vec<&Entity> {
            let mut pool: Vec<&Entity> =
                self.entities.iter().filter(|e| pred(e) && self.is_visible(e, lang)).collect();
            pool.sort_by(|a, b| {
                let sa = a.prominence * a.visibility_in(lang);
                let sb = b.prominence * b.visibility_in(lang);
                sb.total_cmp(&sa).then(a.id.cmp(&b.id))
            });
            pool.truncate(budget.horizon);
            pool.retain(|e| !is_known(e));
            pool
        };

        let real = horizon(&|e: &Entity| e.is_asset() && query.eval(e) && slice.eval(e));
        let decoys = horizon(&|e: &Entity| !e.is_asset() && slice.eval(e) && !query.eval(e));

        let decoy_slots = ((budget.per_call as f64) * budget.distractor_rate).round() as usize;
        let decoy_slots = decoy_slots.min(budget.per_call).min(decoys.len());
        let real_slots = budget.per_call - decoy_slots;

        let mut known_sorted: Vec<&String> = known.iter().collect();
        known_sorted.sort();
        let mut seed_parts = vec![req.query.as_str(), req.directive.as_str(), lang.as_str()];
        seed_parts.extend(known_sorted.iter().map(|s| s.as_str()));
        let mut rng = ChaCha8Rng::seed_from_u64(stable_seed(self.spec.seed, &seed_parts));

        let mut picked: Vec<&Entity> = sample_ordered(&mut rng, &real, real_slots);
        picked.extend(sample_ordered(&mut rng, &decoys, decoy_slots));

        let mut out = SimInvestigation {
            executed_queries: vec![format!("{}{DIRECTIVE_SEPARATOR}{}", req.query, req.directive)],
            ..Default::default()
        };
        for e in picked {
            let domain = news_domain(lang, e.id);
            let name = e.name_in(lang).to_string();
            out.leads.push(Lead {
                source_url: format!("https://{domain}/article/{}-{}", e.id, slug(&name)),
                name,
                entity: e.id,
            });
            if !out.visited_domains.contains(&domain) {
                out.visited_domains.push(domain);
            }
        }
        Ok(out)
    }
}

fn sample_ordered<'a>(rng: &mut ChaCha8Rng, pool: &[&'a Entity], amount: usize) -> Vec<&'a Entity> {
    let amount = amount.min(pool.len());
    let mut idx = index::sample(rng, pool.len(), amount).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| pool[i]).collect()
}

/// 64-bit seed from a base seed and string parts, stable across platforms and releases.
pub fn stable_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

fn news_domain(lang: &Language, id: u32) -> String {
    let list: &[&str] = match lang.as_str() {
        "en" => &["fiercebiotech.com", "endpts.com", "biospace.com"],
        "zh" => &["pharmcube.com", "yaozh.com", "vbdata.cn"],
        "ja" => &["bio.nikkeibp.co.jp", "pj.jiho.jp"],
        "ko" => &["medigatenews.com", "biospectator.com", "etnews.com"],
        other => return format!("news.{other}.example"),
    };
    list[id as usize % list.len()].to_string()
}

fn developer_for(code: &str) -> String {
    format!("{} Biopharma", code.split('-').next().unwrap_or("Sim"))
}

fn slug(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' }).collect();
    s.trim_matches('-').to_string()
}

struct Generator<'a> {
    spec: &'a UniverseSpec,
    rng: ChaCha8Rng,
    used_names: BTreeSet<String>,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a UniverseSpec) -> Self {
        Self { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed), used_names: BTreeSet::new() }
    }

    fn pick<'b>(&mut self, xs: &'b [&'b str]) -> &'b str {
        xs[self.rng.random_range(0..xs.len())]
    }

    fn unit(&mut self, lo: f64, hi: f64) -> f64 {
        let x = self.rng.random_range(lo..hi);
        (x * 1000.0).round() / 1000.0
    }

    fn regions(&self) -> Vec<(&'static str, Language, f64)> {
        REGIONS
            .iter()
            .filter(|(_, l, _)| self.spec.languages.contains(&Language::new(l)))
            .map(|(r, l, w)| (*r, Language::new(l), *w))
            .collect()
    }

    fn region(&mut self) -> (&'static str, Language) {
        let regions = self.regions();
        let regions = if regions.is_empty() {
            vec![("global", self.spec.languages.first().cloned().unwrap_or_else(Language::english), 1.0)]
        } else {
            regions
        };
        let total: f64 = regions.iter().map(|r| r.2).sum();
        let mut x = self.rng.random_range(0.0..total);
        for (r, l, w) in &regions {
            if x < *w {
                return (r, l.clone());
            }
            x -= w;
        }
        let (r, l, _) = regions.last().unwrap().clone();
        (r, l)
    }

    fn fresh_code(&mut self) -> String {
        loop {
            let prefix = self.pick(CODE_PREFIXES);
            let code = format!("{prefix}-{}", self.rng.random_range(100..10_000));
            if self.used_names.insert(normalize_name(&code)) {
                return code;
            }
        }
    }

    /// Generic name plus its zh/ja/ko renderings, all unused so far.
    fn fresh_generic(&mut self, modality: &str) -> Option<[String; 4]> {
        let suf = suffix(modality);
        for _ in 0..50 {
            let n = self.rng.random_range(2..=3);
            let mut parts = [String::new(), String::new(), String::new(), String::new()];
            for _ in 0..n {
                let s = SYLLABLES[self.rng.random_range(0..SYLLABLES.len())];
                for k in 0..4 {
                    parts[k].push_str(s[k]);
                }
            }
            for k in 0..4 {
                parts[k].push_str(suf[k]);
            }
            let keys: Vec<String> = parts.iter().map(|p| normalize_name(p)).collect();
            if keys.iter().all(|k| !self.used_names.contains(k)) {
                self.used_names.extend(keys);
                return Some(parts);
            }
        }
        None
    }

    fn visibility(&mut self, origin: &Language) -> BTreeMap<Language, f64> {
        let langs = self.spec.languages.clone();
        let mut out = BTreeMap::new();
        for l in langs {
            let w = if &l == origin {
                self.unit(0.6, 1.0)
            } else if l.as_str() == "en" {
                if self.rng.random_bool(0.45) {
                    self.unit(0.5, 1.0)
                } else {
                    self.unit(0.0, 0.49)
                }
            } else if self.rng.random_bool(0.08) {
                self.unit(0.5, 1.0)
            } else {
                self.unit(0.0, 0.49)
            };
            out.insert(l, w);
        }
        out
    }

    fn names(&mut self, modality: &str, origin: &Language) -> (String, Vec<Alias>) {
        let code = self.fresh_code();
        let mut aliases = vec![Alias { name: code.clone(), language: None }];
        let mut canonical = code;
        if self.rng.random_bool(0.8) {
            if let Some(forms) = self.fresh_generic(modality) {
                canonical = forms[0].clone();
                aliases.push(Alias { name: forms[0].clone(), language: Some(Language::english()) });
                let mut scripts: Vec<usize> = Vec::new();
                if let Some(k) = script_index(origin) {
                    scripts.push(k);
                }
                for k in 1..4 {
                    if !scripts.contains(&k) && self.rng.random_bool(0.25) {
                        scripts.push(k);
                    }
                }
                scripts.sort_unstable();
                for k in scripts {
                    let lang = Language::new(["en", "zh", "ja", "ko"][k]);
                    if self.spec.languages.contains(&lang) {
                        aliases.push(Alias { name: forms[k].clone(), language: Some(lang) });
                    }
                }
            }
        }
        (canonical, aliases)
    }

    fn phase(&mut self, stage: StageClass) -> String {
        match stage {
            StageClass::Preclinical => self.pick(&["IND-enabling", "lead optimization"]).to_string(),
            StageClass::Clinical => self.pick(&["Phase 1", "Phase 1/2", "Phase 2", "Phase 3"]).to_string(),
        }
    }

    fn run(mut self) -> Universe {
        let mut entities = Vec::with_capacity(self.spec.asset_count + self.spec.distractor_count);
        for id in 0..self.spec.asset_count as u32 {
            let modality = self.pick(MODALITIES).to_string();
            let (region, origin) = self.region();
            let stage = if self.rng.random_bool(0.5) { StageClass::Clinical } else { StageClass::Preclinical };
            let (canonical_name, aliases) = self.names(&modality, &origin);
            let developer = developer_for(&aliases[0].name);
            let e = Entity {
                id,
                kind: EntityKind::Asset,
                canonical_name,
                aliases,
                target: self.pick(TARGETS).to_string(),
                indication: self.pick(INDICATIONS).to_string(),
                phase: self.phase(stage),
                stage,
                region: region.to_string(),
                visibility: self.visibility(&origin),
                origin_language: origin,
                developer,
                modality,
                prominence: self.unit(0.0, 1.0),
            };
            entities.push(e);
        }
        // alias collisions: borrow a code from an earlier asset
        if self.spec.alias_collision_rate > 0.0 {
            for i in 1..entities.len() {
                if self.rng.random_bool(self.spec.alias_collision_rate.min(1.0)) && entities[i].aliases.len() < 5 {
                    let j = self.rng.random_range(0..i);
                    let code = entities[j].code().to_string();
                    entities[i].aliases.push(Alias { name: code, language: None });
                }
            }
        }
        let asset_count = entities.len() as u32;
        for k in 0..self.spec.distractor_count as u32 {
            if asset_count == 0 {
                break;
            }
            let base = entities[self.rng.random_range(0..asset_count) as usize].clone();
            let perturbable = [Field::Modality, Field::Target, Field::Indication, Field::Stage];
            let field = perturbable[self.rng.random_range(0..perturbable.len())];
            let mut d = base.clone();
            d.id = asset_count + k;
            d.kind = EntityKind::Distractor { lookalike_of: base.id, perturbed: field };
            match field {
                Field::Modality => d.modality = self.other(MODALITIES, &base.modality),
                Field::Target => d.target = self.other(TARGETS, &base.target),
                Field::Indication => d.indication = self.other(INDICATIONS, &base.indication),
                _ => {
                    d.stage = match base.stage {
                        StageClass::Clinical => StageClass::Preclinical,
                        StageClass::Preclinical => StageClass::Clinical,
                    };
                    d.phase = self.phase(d.stage);
                }
            }
            let (canonical_name, aliases) = self.names(&d.modality, &d.origin_language);
            d.developer = developer_for(&aliases[0].name);
            d.canonical_name = canonical_name;
            d.aliases = aliases;
            d.prominence = self.unit(0.0, 1.0);
            entities.push(d);
        }
        Universe::from_parts(self.spec.clone(), entities)
    }

    fn other(&mut self, pool: &[&str], current: &str) -> String {
        let options: Vec<&str> = pool.iter().copied().filter(|v| *v != current).collect();
        options[self.rng.random_range(0..options.len())].to_string()
    }
}
