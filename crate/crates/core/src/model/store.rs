use std::collections::{BTreeMap, BTreeSet};

use super::{normalize_name, AssetRecord, ModelError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Registration {
    Inserted,
    MergedInto(String),
}

/// Validated, deduplicated assets keyed by canonical name, with an index from
/// every normalized alias to the owning canonical name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalAssetStore {
    assets: BTreeMap<String, AssetRecord>,
    alias_index: BTreeMap<String, String>,
}

impl GlobalAssetStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts `record`, or unions its aliases and provenance into the single
    /// existing record it collides with. A record bridging two existing
    /// records is rejected rather than merged transitively.
    pub fn register_asset(&mut self, record: AssetRecord) -> Result<Registration, ModelError> {
        record.validate()?;
        let keys = record.normalized_aliases();
        let hits: BTreeSet<&String> = keys.iter().filter_map(|k| self.alias_index.get(k)).collect();
        match hits.len() {
            0 => {
                let name = record.canonical_name.clone();
                for k in keys {
                    self.alias_index.insert(k, name.clone());
                }
                self.assets.insert(name, record);
                Ok(Registration::Inserted)
            }
            1 => {
                let target = hits.into_iter().next().unwrap().clone();
                let existing = self.assets.get_mut(&target).expect("alias index points at a stored asset");
                existing.absorb(&record);
                for k in keys {
                    self.alias_index.insert(k, target.clone());
                }
                Ok(Registration::MergedInto(target))
            }
            _ => Err(ModelError::InvariantViolation(format!(
                "ambiguous merge: `{}` overlaps {}",
                record.canonical_name,
                hits.iter().map(|h| format!("`{h}`")).collect::<Vec<_>>().join(", ")
            ))),
        }
    }

    /// Canonical name owning `name` after normalization, if any.
    pub fn resolve(&self, name: &str) -> Option<&str> {
        self.alias_index.get(&normalize_name(name)).map(String::as_str)
    }

    pub fn get(&self, canonical: &str) -> Option<&AssetRecord> {
        self.assets.get(canonical)
    }

    pub fn lookup(&self, name: &str) -> Option<&AssetRecord> {
        self.resolve(name).and_then(|c| self.assets.get(c))
    }

    /// True if any alias of `record` is already owned by a stored asset.
    pub fn knows(&self, record: &AssetRecord) -> bool {
        record.normalized_aliases().iter().any(|a| self.alias_index.contains_key(a))
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    /// Assets in canonical-name order.
    pub fn iter(&self) -> impl Iterator<Item = &AssetRecord> {
        self.assets.values()
    }

    pub fn canonical_names(&self) -> Vec<String> {
        self.assets.keys().cloned().collect()
    }

    /// Checks that the alias index is a function consistent with the records.
    pub fn check_invariants(&self) -> Result<(), ModelError> {
        let mut owner: BTreeMap<String, &str> = BTreeMap::new();
        for (name, rec) in &self.assets {
            if &rec.canonical_name != name {
                return Err(ModelError::InvariantViolation(format!("key `{name}` != record name")));
            }
            for a in rec.normalized_aliases() {
                if let Some(prev) = owner.insert(a.clone(), name) {
                    if prev != name {
                        return Err(ModelError::InvariantViolation(format!("alias `{a}` owned twice")));
                    }
                }
                if self.alias_index.get(&a).map(String::as_str) != Some(name.as_str()) {
                    return Err(ModelError::InvariantViolation(format!("alias `{a}` not indexed to `{name}`")));
                }
            }
            if self.resolve(name) != Some(name.as_str()) {
                return Err(ModelError::InvariantViolation(format!("`{name}` does not resolve to itself")));
            }
        }
        if owner.len() != self.alias_index.len() {
            return Err(ModelError::InvariantViolation("stale alias index entries".into()));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        crate::snapshot::to_string("asset", self.assets.values())
    }

    pub fn from_jsonl(text: &str) -> Result<Self, crate::snapshot::SnapshotError> {
        let records: Vec<AssetRecord> = crate::snapshot::read_records(text.as_bytes(), "asset")?;
        let mut store = Self::new();
        for r in records {
            // snapshots are written from valid stores; a bad line is a parse-level problem
            store.register_asset(r).map_err(|e| {
                crate::snapshot::SnapshotError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string()))
            })?;
        }
        Ok(store)
    }
}
