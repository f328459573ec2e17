//! Light and heavy deduplication of validated items against the asset store.
//!
//! Light: one backend pass when the items fit in a batch; otherwise one pass
//! per batch followed by a final pass over the merged list. Heavy: one pass
//! per item, each checked against the store plus everything accepted so far.
//! Either way the result excludes anything whose aliases already resolve in
//! the store, and is sorted by canonical name.

use super::{DedupGroup, DedupRequest, DedupResponse, Deduplicator, ExistingAsset};
use crate::model::{AssetRecord, GlobalAssetStore};

pub const DEFAULT_BATCH_SIZE: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupOutcome {
    pub new_assets: Vec<AssetRecord>,
    pub passes: usize,
    pub warnings: Vec<String>,
}

/// Backend passes light mode spends on `n` items.
pub fn light_pass_count(n: usize, batch_size: usize) -> usize {
    let batch_size = batch_size.max(1);
    match n {
        0 => 0,
        n if n <= batch_size => 1,
        n => n.div_ceil(batch_size) + 1,
    }
}

pub fn deduplicate_light(
    backend: &dyn Deduplicator,
    validated: Vec<AssetRecord>,
    store: &GlobalAssetStore,
    batch_size: usize,
) -> DedupOutcome {
    let mut out = DedupOutcome::default();
    if validated.is_empty() {
        return out;
    }
    let batch_size = batch_size.max(1);
    let existing: Vec<ExistingAsset> = store.iter().map(ExistingAsset::from).collect();
    let pass = |items: Vec<AssetRecord>, out: &mut DedupOutcome| -> Vec<AssetRecord> {
        out.passes += 1;
        let req = DedupRequest { items, existing: existing.clone() };
        match backend.resolve(&req) {
            Ok(resp) => collapse(req.items, &resp, &[]).0,
            Err(e) => {
                out.warnings.push(format!("dedup pass failed ({e}); {} items passed through", req.items.len()));
                req.items
            }
        }
    };
    let survivors = if validated.len() <= batch_size {
        pass(validated, &mut out)
    } else {
        let mut merged = Vec::new();
        let mut rest = validated;
        while !rest.is_empty() {
            let tail = rest.split_off(rest.len().min(batch_size));
            merged.extend(pass(rest, &mut out));
            rest = tail;
        }
        pass(merged, &mut out)
    };
    out.new_assets = finish(survivors, store);
    out
}

pub fn deduplicate_heavy(
    backend: &dyn Deduplicator,
    validated: Vec<AssetRecord>,
    store: &GlobalAssetStore,
) -> DedupOutcome {
    let mut out = DedupOutcome::default();
    let mut accepted: Vec<AssetRecord> = Vec::new();
    for item in validated {
        out.passes += 1;
        let existing: Vec<ExistingAsset> =
            store.iter().chain(accepted.iter()).map(ExistingAsset::from).collect();
        let req = DedupRequest { items: vec![item], existing };
        match backend.resolve(&req) {
            Ok(resp) => {
                let (kept, dup_of) = collapse(req.items, &resp, &accepted);
                if let Some((record, name)) = dup_of.into_iter().next() {
                    if let Some(prev) = accepted.iter_mut().find(|a| a.canonical_name == name) {
                        prev.absorb(&record);
                    }
                }
                accepted.extend(kept);
            }
            Err(e) => {
                let item = req.items.into_iter().next().expect("one item per pass");
                out.warnings.push(format!("dedup pass failed for `{}` ({e}); passed through", item.canonical_name));
                accepted.push(item);
            }
        }
    }
    out.new_assets = finish(accepted, store);
    out
}

/// Apply a response to its request items. Returns the merged survivors and,
/// for groups flagged as duplicates of something in `pending`, the merged
/// record with the pending canonical name it belongs to. Items the response
/// does not mention pass through unchanged.
fn collapse(
    items: Vec<AssetRecord>,
    resp: &DedupResponse,
    pending: &[AssetRecord],
) -> (Vec<AssetRecord>, Vec<(AssetRecord, String)>) {
    let mut covered = vec![false; items.len()];
    let mut kept = Vec::new();
    let mut into_pending = Vec::new();
    for group in &resp.groups {
        let members: Vec<usize> = group
            .members
            .iter()
            .copied()
            .filter(|&i| i < items.len() && !std::mem::replace(&mut covered[i], true))
            .collect();
        let Some(record) = merge_group(&items, &members, group) else { continue };
        match &group.existing {
            None => kept.push(record),
            Some(name) if pending.iter().any(|p| &p.canonical_name == name) => {
                into_pending.push((record, name.clone()))
            }
            Some(_) => {}
        }
    }
    kept.extend(items.into_iter().zip(covered).filter(|(_, c)| !c).map(|(r, _)| r));
    (kept, into_pending)
}

fn merge_group(items: &[AssetRecord], members: &[usize], group: &DedupGroup) -> Option<AssetRecord> {
    let (&first, rest) = members.split_first()?;
    let mut merged = items[first].clone();
    for &i in rest {
        merged.absorb(&items[i]);
    }
    merged.aliases.extend(group.aliases.iter().cloned());
    if !group.canonical_name.trim().is_empty() {
        merged.canonical_name = group.canonical_name.clone();
        merged.aliases.insert(group.canonical_name.clone());
    }
    Some(merged)
}

fn finish(mut records: Vec<AssetRecord>, store: &GlobalAssetStore) -> Vec<AssetRecord> {
    records.retain(|r| !store.knows(r));
    records.sort_by(|a, b| a.canonical_name.cmp(&b.canonical_name));
    records
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;
    use std::sync::atomic::{AtomicUsize, Ordering};

    use super::*;
    use crate::backend::BackendError;
    use crate::model::{normalize_name, Language, StageClass};

    /// Groups items through a fixed alias table: alias -> canonical.
    struct AliasTable {
        table: Vec<(&'static str, &'static str)>,
        calls: AtomicUsize,
        fail_on_call: Option<usize>,
    }

    impl AliasTable {
        fn new(table: Vec<(&'static str, &'static str)>) -> Self {
            Self { table, calls: AtomicUsize::new(0), fail_on_call: None }
        }

        fn canon(&self, name: &str) -> String {
            let n = normalize_name(name);
            self.table
                .iter()
                .find(|(a, _)| normalize_name(a) == n)
                .map(|(_, c)| c.to_string())
                .unwrap_or_else(|| name.to_string())
        }
    }

    impl Deduplicator for AliasTable {
        fn resolve(&self, req: &DedupRequest) -> Result<DedupResponse, BackendError> {
            let call = self.calls.fetch_add(1, Ordering::SeqCst);
            if self.fail_on_call == Some(call) {
                return Err(BackendError::Timeout);
            }
            let mut groups: Vec<DedupGroup> = Vec::new();
            for (i, item) in req.items.iter().enumerate() {
                let c = self.canon(&item.canonical_name);
                match groups.iter_mut().find(|g| g.canonical_name == c) {
                    Some(g) => g.members.push(i),
                    None => {
                        let existing = req
                            .existing
                            .iter()
                            .find(|e| e.aliases.iter().any(|a| self.canon(a) == c))
                            .map(|e| e.canonical_name.clone());
                        groups.push(DedupGroup {
                            members: vec![i],
                            canonical_name: c.clone(),
                            aliases: BTreeSet::from([c]),
                            existing,
                        })
                    }
                }
            }
            Ok(DedupResponse { groups })
        }
    }

    fn rec(name: &str) -> AssetRecord {
        AssetRecord::new(name, Language::english(), StageClass::Preclinical)
    }

    fn names(out: &DedupOutcome) -> Vec<String> {
        out.new_assets.iter().map(|r| r.canonical_name.clone()).collect()
    }

    #[test]
    fn alias_pair_collapses() {
        let b = AliasTable::new(vec![("drugA", "Drug-A")]);
        let out = deduplicate_light(&b, vec![rec("Drug-A"), rec("drugA")], &GlobalAssetStore::new(), 50);
        assert_eq!(names(&out), ["Drug-A"]);
        assert!(out.new_assets[0].aliases.contains("drugA"));
        assert_eq!(out.passes, 1);
        let b = AliasTable::new(vec![("drugA", "Drug-A")]);
        let heavy = deduplicate_heavy(&b, vec![rec("Drug-A"), rec("drugA")], &GlobalAssetStore::new());
        assert_eq!(heavy.new_assets, out.new_assets);
        assert_eq!(heavy.passes, 2);
    }

    #[test]
    fn known_alias_is_excluded() {
        let mut store = GlobalAssetStore::new();
        store.register_asset(rec("Drug-A").with_alias("DA-7")).unwrap();
        let b = AliasTable::new(vec![]);
        let out = deduplicate_light(&b, vec![rec("da-7"), rec("Drug-B")], &store, 50);
        assert_eq!(names(&out), ["Drug-B"]);
    }

    #[test]
    fn batch_formula() {
        assert_eq!(light_pass_count(0, 50), 0);
        assert_eq!(light_pass_count(1, 50), 1);
        assert_eq!(light_pass_count(50, 50), 1);
        assert_eq!(light_pass_count(51, 50), 3);
        assert_eq!(light_pass_count(120, 50), 4);
        let b = AliasTable::new(vec![]);
        let items: Vec<_> = (0..120).map(|i| rec(&format!("X-{i}"))).collect();
        let out = deduplicate_light(&b, items, &GlobalAssetStore::new(), 50);
        assert_eq!(out.passes, 4);
        assert_eq!(b.calls.load(Ordering::SeqCst), 4);
        assert_eq!(out.new_assets.len(), 120);
    }

    #[test]
    fn cross_batch_duplicates_merge_in_final_pass() {
        let b = AliasTable::new(vec![("late-alias", "Drug-0")]);
        let mut items: Vec<_> = (0..4).map(|i| rec(&format!("Drug-{i}"))).collect();
        items.push(rec("late-alias"));
        let out = deduplicate_light(&b, items, &GlobalAssetStore::new(), 2);
        assert_eq!(out.passes, light_pass_count(5, 2));
        assert_eq!(names(&out), ["Drug-0", "Drug-1", "Drug-2", "Drug-3"]);
    }

    #[test]
    fn failing_batch_passes_items_through() {
        let mut b = AliasTable::new(vec![("a2", "A")]);
        b.fail_on_call = Some(0);
        let out = deduplicate_light(&b, vec![rec("A"), rec("a2")], &GlobalAssetStore::new(), 50);
        assert_eq!(out.new_assets.len(), 2);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn heavy_failure_passes_item_through() {
        let mut b = AliasTable::new(vec![]);
        b.fail_on_call = Some(1);
        let out = deduplicate_heavy(&b, vec![rec("A"), rec("B"), rec("C")], &GlobalAssetStore::new());
        assert_eq!(out.passes, 3);
        assert_eq!(names(&out), ["A", "B", "C"]);
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn empty_input() {
        let b = AliasTable::new(vec![]);
        let heavy = deduplicate_heavy(&b, vec![], &GlobalAssetStore::new());
        let light = deduplicate_light(&b, vec![], &GlobalAssetStore::new(), 50);
        assert_eq!((heavy.passes, light.passes), (0, 0));
        assert!(heavy.new_assets.is_empty() && light.new_assets.is_empty());
        assert_eq!(b.calls.load(Ordering::SeqCst), 0);
    }
}
