use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{normalize_name, Language, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageClass {
    Preclinical,
    Clinical,
}

impl StageClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StageClass::Preclinical => "preclinical",
            StageClass::Clinical => "clinical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplificationFlag {
    MajorUsTradePress,
    LargePharmaDeal,
}

/// A source URL and a verbatim quote supporting one atomic claim.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    /// Attribute the quote supports, e.g. `modality` or `trials`.
    pub claim: String,
    pub source_url: String,
    pub verbatim_quote: String,
}

impl Provenance {
    pub fn new(claim: &str, source_url: &str, quote: &str) -> Self {
        Self { claim: claim.into(), source_url: source_url.into(), verbatim_quote: quote.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub indication: String,
    pub phase: String,
    #[serde(default)]
    pub regimen: String,
    #[serde(default)]
    pub efficacy_data: String,
    #[serde(default)]
    pub safety_data: String,
    #[serde(default)]
    pub line_of_therapy: String,
    #[serde(default)]
    pub biomarkers: Vec<String>,
    #[serde(default)]
    pub site_countries: Vec<String>,
    #[serde(default)]
    pub endpoints: Vec<String>,
}

impl TrialRecord {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.indication.trim().is_empty() || self.phase.trim().is_empty() {
            return Err(ModelError::InvariantViolation("trial requires indication and phase".into()));
        }
        Ok(())
    }
}

/// Validated, enriched program record. Every populated attribute carries at
/// least one provenance pair whose `claim` names it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub canonical_name: String,
    pub aliases: BTreeSet<String>,
    pub origin_language: Language,
    pub is_valid_drug: bool,
    pub is_active: bool,
    pub stage_class: StageClass,
    #[serde(default)]
    pub stage_detail: String,
    #[serde(default)]
    pub developers: Vec<String>,
    #[serde(default)]
    pub modality: String,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub moa_short: String,
    #[serde(default)]
    pub moa_detailed: String,
    #[serde(default)]
    pub indications: Vec<String>,
    #[serde(default)]
    pub patents: Vec<String>,
    #[serde(default)]
    pub trials: Vec<TrialRecord>,
    #[serde(default)]
    pub approved_geographies: Vec<String>,
    #[serde(default)]
    pub regulatory_labels: Vec<String>,
    #[serde(default)]
    pub provenance: Vec<Provenance>,
    #[serde(default)]
    pub amplification_flags: BTreeSet<AmplificationFlag>,
}

impl AssetRecord {
    /// Bare record: only the canonical name (also registered as an alias).
    pub fn new(canonical_name: &str, origin_language: Language, stage_class: StageClass) -> Self {
        Self {
            canonical_name: canonical_name.to_string(),
            aliases: BTreeSet::from([canonical_name.to_string()]),
            origin_language,
            is_valid_drug: true,
            is_active: true,
            stage_class,
            stage_detail: String::new(),
            developers: Vec::new(),
            modality: String::new(),
            targets: Vec::new(),
            moa_short: String::new(),
            moa_detailed: String::new(),
            indications: Vec::new(),
            patents: Vec::new(),
            trials: Vec::new(),
            approved_geographies: Vec::new(),
            regulatory_labels: Vec::new(),
            provenance: Vec::new(),
            amplification_flags: BTreeSet::new(),
        }
    }

    pub fn with_alias(mut self, alias: &str) -> Self {
        self.aliases.insert(alias.to_string());
        self
    }

    pub fn cite(mut self, claim: &str, url: &str, quote: &str) -> Self {
        self.provenance.push(Provenance::new(claim, url, quote));
        self
    }

    /// Normalized alias closure, canonical name included.
    pub fn normalized_aliases(&self) -> BTreeSet<String> {
        self.aliases
            .iter()
            .chain(std::iter::once(&self.canonical_name))
            .map(|a| normalize_name(a))
            .filter(|a| !a.is_empty())
            .collect()
    }

    /// Names of attributes that hold a value.
    pub fn populated_attributes(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut push = |name, populated: bool| {
            if populated {
                out.push(name)
            }
        };
        push("stage_detail", !self.stage_detail.is_empty());
        push("developers", !self.developers.is_empty());
        push("modality", !self.modality.is_empty());
        push("targets", !self.targets.is_empty());
        push("moa_short", !self.moa_short.is_empty());
        push("moa_detailed", !self.moa_detailed.is_empty());
        push("indications", !self.indications.is_empty());
        push("patents", !self.patents.is_empty());
        push("trials", !self.trials.is_empty());
        push("approved_geographies", !self.approved_geographies.is_empty());
        push("regulatory_labels", !self.regulatory_labels.is_empty());
        out
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: String| Err(ModelError::InvariantViolation(m));
        if normalize_name(&self.canonical_name).is_empty() {
            return fail("canonical_name is empty".into());
        }
        if !self.aliases.contains(&self.canonical_name) {
            return fail(format!("canonical_name `{}` missing from aliases", self.canonical_name));
        }
        for attr in self.populated_attributes() {
            if !self.provenance.iter().any(|p| p.claim == attr) {
                return fail(format!("`{}`: attribute `{attr}` has no provenance", self.canonical_name));
            }
        }
        if self.stage_class == StageClass::Clinical
            && self.trials.is_empty()
            && !self.stage_detail.to_lowercase().contains("phase")
        {
            return fail(format!("`{}`: clinical stage without trials or a named phase", self.canonical_name));
        }
        for t in &self.trials {
            t.validate()?;
        }
        Ok(())
    }

    /// Union aliases and provenance from `other` into `self`.
    pub fn absorb(&mut self, other: &AssetRecord) {
        self.aliases.extend(other.aliases.iter().cloned());
        for p in &other.provenance {
            if !self.provenance.contains(p) {
                self.provenance.push(p.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clinical() -> AssetRecord {
        AssetRecord::new("Tamirumab", Language::new("zh"), StageClass::Clinical)
    }

    #[test]
    fn canonical_must_be_alias() {
        let mut r = clinical();
        r.stage_detail = "Phase 2".into();
        r = r.cite("stage_detail", "https://x", "entered Phase 2");
        assert!(r.validate().is_ok());
        r.aliases.clear();
        assert!(r.validate().is_err());
    }

    #[test]
    fn populated_attribute_needs_provenance() {
        let mut r = AssetRecord::new("X", Language::english(), StageClass::Preclinical);
        r.modality = "antibody".into();
        assert!(r.validate().is_err());
        let r = r.cite("modality", "https://x", "a monoclonal antibody");
        assert!(r.validate().is_ok());
    }

    #[test]
    fn clinical_needs_trial_or_phase() {
        let r = clinical();
        assert!(r.validate().is_err());
        let mut r = clinical();
        r.trials.push(TrialRecord { indication: "HBV".into(), phase: "1".into(), ..Default::default() });
        let r = r.cite("trials", "https://x", "first patient dosed");
        assert!(r.validate().is_ok());
    }

    #[test]
    fn trial_requires_indication_and_phase() {
        let mut r = clinical();
        r.trials.push(TrialRecord { indication: "HBV".into(), ..Default::default() });
        let r = r.cite("trials", "https://x", "q");
        assert!(r.validate().is_err());
    }
}
