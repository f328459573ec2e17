//! The directive tree: UCB selection over leaves, precision-gated rewards,
//! backpropagation along the root path and coach-driven expansion.
//!
//! ```text
//! UCB(n) = W(n) / N(n) + c * sqrt( ln(max(1, N(parent(n)))) / N(n) )
//! ```
//!
//! A node with `N(n) = 0` scores `+inf`, so every fresh directive is tried
//! once before any visited sibling.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::NodeId;

pub const DEFAULT_EXPLORATION: f64 = 1.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("directive already present under {parent}: {directive:?}")]
    DuplicateDirective { parent: NodeId, directive: String },
    #[error("no directives to attach")]
    EmptyDirectives,
    #[error("reward must be finite and non-negative, got {0}")]
    InvalidReward(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectiveNode {
    pub id: NodeId,
    pub directive: String,
    pub instructions: String,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    pub visits: u64,
    pub cumulative_reward: f64,
    pub created_epoch: u32,
}

impl DirectiveNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn mean_reward(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.cumulative_reward / self.visits as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionBudget {
    /// Parallel explorations per epoch.
    pub m: usize,
    /// Exploration constant.
    pub c: f64,
}

impl Default for SelectionBudget {
    fn default() -> Self {
        Self { m: 1, c: DEFAULT_EXPLORATION }
    }
}

/// UCB score of a node with `visits` and cumulative `reward` under a parent
/// with `parent_visits`. Natural logarithm.
pub fn ucb_score(visits: u64, reward: f64, parent_visits: u64, c: f64) -> f64 {
    if visits == 0 {
        return f64::INFINITY;
    }
    let n = visits as f64;
    let explore = ((parent_visits.max(1) as f64).ln() / n).sqrt();
    reward / n + c * explore
}

/// Local precision: validated / returned, defined as 0 when nothing was returned.
pub fn precision(validated: usize, returned: usize) -> f64 {
    if returned == 0 {
        0.0
    } else {
        validated as f64 / returned as f64
    }
}

/// Node reward `r = p * |new unique assets|`.
pub fn node_reward(precision: f64, new_unique: usize) -> f64 {
    debug_assert!((0.0..=1.0).contains(&precision), "precision out of range: {precision}");
    precision * new_unique as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectiveTree {
    nodes: Vec<DirectiveNode>,
}

impl Default for DirectiveTree {
    fn default() -> Self {
        Self::new()
    }
}

impl DirectiveTree {
    /// A tree holding only the root, whose directive is empty.
    pub fn new() -> Self {
        Self {
            nodes: vec![DirectiveNode {
                id: NodeId::ROOT,
                directive: String::new(),
                instructions: String::new(),
                parent: None,
                children: Vec::new(),
                visits: 0,
                cumulative_reward: 0.0,
                created_epoch: 0,
            }],
        }
    }

    pub fn root(&self) -> &DirectiveNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, id: NodeId) -> Result<&DirectiveNode, TreeError> {
        self.nodes.get(id.index()).ok_or(TreeError::UnknownNode(id))
    }

    pub fn nodes(&self) -> &[DirectiveNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.id).collect()
    }

    /// Node ids from the root down to `id`, inclusive.
    pub fn path_to(&self, id: NodeId) -> Result<Vec<NodeId>, TreeError> {
        let mut path = vec![id];
        let mut cur = self.get(id)?;
        while let Some(p) = cur.parent {
            path.push(p);
            cur = self.get(p)?;
        }
        path.reverse();
        Ok(path)
    }

    pub fn depth(&self, id: NodeId) -> Result<usize, TreeError> {
        Ok(self.path_to(id)?.len() - 1)
    }

    pub fn ucb(&self, id: NodeId, c: f64) -> Result<f64, TreeError> {
        let node = self.get(id)?;
        let parent_visits = match node.parent {
            Some(p) => self.get(p)?.visits,
            None => 0,
        };
        Ok(ucb_score(node.visits, node.cumulative_reward, parent_visits, c))
    }

    /// Up to `budget.m` distinct leaves, each found by a top-down descent that
    /// picks the highest-UCB child at every internal node.
    ///
    /// Equal scores between children with the same visit count go to the
    /// higher mean reward, then to the earlier child. Additional leaves are
    /// found by repeating the descent with one virtual visit added along each
    /// previously chosen path; virtual visits never touch the stored counts.
    pub fn select_leaves(&self, budget: SelectionBudget) -> Vec<NodeId> {
        let mut virtual_visits = vec![0u64; self.nodes.len()];
        let mut taken = vec![false; self.nodes.len()];
        let mut picked = Vec::new();
        while picked.len() < budget.m {
            let open = self.open_subtrees(&taken);
            if !open[0] {
                break;
            }
            let mut cur = NodeId::ROOT;
            loop {
                let node = &self.nodes[cur.index()];
                if node.is_leaf() {
                    break;
                }
                let parent_visits = node.visits + virtual_visits[cur.index()];
                let next = self.best_child(node, parent_visits, &virtual_visits, &open, budget.c);
                match next {
                    Some(n) => cur = n,
                    None => break,
                }
            }
            taken[cur.index()] = true;
            for id in self.path_to(cur).expect("descent stays inside the tree") {
                virtual_visits[id.index()] += 1;
            }
            picked.push(cur);
        }
        picked
    }

    fn best_child(
        &self,
        node: &DirectiveNode,
        parent_visits: u64,
        virtual_visits: &[u64],
        open: &[bool],
        c: f64,
    ) -> Option<NodeId> {
        let mut best: Option<(NodeId, f64, u64, f64)> = None;
        for &child in &node.children {
            if !open[child.index()] {
                continue;
            }
            let n = &self.nodes[child.index()];
            let visits = n.visits + virtual_visits[child.index()];
            let score = ucb_score(visits, n.cumulative_reward, parent_visits, c);
            let mean = if visits == 0 { 0.0 } else { n.cumulative_reward / visits as f64 };
            let better = match best {
                None => true,
                Some((_, s, v, m)) => score > s || (score == s && visits == v && mean > m),
            };
            if better {
                best = Some((child, score, visits, mean));
            }
        }
        best.map(|b| b.0)
    }

    /// `open[i]` is true when node i's subtree still holds an untaken leaf.
    fn open_subtrees(&self, taken: &[bool]) -> Vec<bool> {
        let mut open = vec![false; self.nodes.len()];
        // children always have larger ids than their parent
        for n in self.nodes.iter().rev() {
            open[n.id.index()] = if n.is_leaf() {
                !taken[n.id.index()]
            } else {
                n.children.iter().any(|c| open[c.index()])
            };
        }
        open
    }

    /// Adds one visit and `reward` to `id` and every ancestor.
    pub fn backpropagate(&mut self, id: NodeId, reward: f64) -> Result<(), TreeError> {
        if !reward.is_finite() || reward < 0.0 {
            return Err(TreeError::InvalidReward(reward));
        }
        for k in self.path_to(id)? {
            let n = &mut self.nodes[k.index()];
            n.visits += 1;
            n.cumulative_reward += reward;
        }
        Ok(())
    }

    /// Appends children in the given order. All-or-nothing: a directive equal
    /// to an existing sibling (or repeated in `directives`) rejects the batch.
    pub fn attach_children(
        &mut self,
        parent: NodeId,
        directives: &[(String, String)],
        epoch: u32,
    ) -> Result<Vec<NodeId>, TreeError> {
        if directives.is_empty() {
            return Err(TreeError::EmptyDirectives);
        }
        let existing: Vec<&str> =
            self.get(parent)?.children.iter().map(|c| self.nodes[c.index()].directive.as_str()).collect();
        for (i, (d, _)) in directives.iter().enumerate() {
            if existing.contains(&d.as_str()) || directives[..i].iter().any(|(p, _)| p == d) {
                return Err(TreeError::DuplicateDirective { parent, directive: d.clone() });
            }
        }
        let mut ids = Vec::with_capacity(directives.len());
        for (d, delta) in directives {
            let id = NodeId(self.nodes.len() as u32);
            self.nodes.push(DirectiveNode {
                id,
                directive: d.clone(),
                instructions: delta.clone(),
                parent: Some(parent),
                children: Vec::new(),
                visits: 0,
                cumulative_reward: 0.0,
                created_epoch: epoch,
            });
            self.nodes[parent.index()].children.push(id);
            ids.push(id);
        }
        Ok(ids)
    }

    /// Indented rendering, one node per line with its statistics.
    pub fn render(&self) -> String {
        let mut out = String::new();
        self.render_into(NodeId::ROOT, 0, &mut out);
        out
    }

    fn render_into(&self, id: NodeId, depth: usize, out: &mut String) {
        let n = &self.nodes[id.index()];
        let label = if n.directive.is_empty() { "<root>" } else { n.directive.as_str() };
        let _ = writeln!(out, "{}{} [{}] N={} W={:.3}", "  ".repeat(depth), label, n.id, n.visits, n.cumulative_reward);
        for &c in &n.children {
            self.render_into(c, depth + 1, out);
        }
    }

    /// Structured snapshot: one node per line with a digest of its directive.
    pub fn to_jsonl(&self) -> String {
        let lines: Vec<NodeLine> = self
            .nodes
            .iter()
            .map(|n| NodeLine {
                id: n.id,
                parent: n.parent,
                visits: n.visits,
                cumulative_reward: n.cumulative_reward,
                directive_digest: directive_digest(&n.directive),
                created_epoch: n.created_epoch,
            })
            .collect();
        crate::snapshot::to_string("node", &lines)
    }

    /// Returns an error describing the first violated structural invariant.
    pub fn check_invariants(&self) -> Result<(), String> {
        for n in &self.nodes {
            for &c in &n.children {
                let child = &self.nodes[c.index()];
                if child.parent != Some(n.id) {
                    return Err(format!("{c} does not point back at {}", n.id));
                }
                if child.visits > n.visits {
                    return Err(format!("N({c})={} > N({})={}", child.visits, n.id, n.visits));
                }
                if child.cumulative_reward > n.cumulative_reward + 1e-9 {
                    return Err(format!("W({c}) > W({})", n.id));
                }
            }
        }
        if !self.root().directive.is_empty() || self.root().parent.is_some() {
            return Err("root must have an empty directive and no parent".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLine {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub visits: u64,
    pub cumulative_reward: f64,
    pub directive_digest: String,
    pub created_epoch: u32,
}

/// First 16 hex chars of the SHA-256 of the directive text.
pub fn directive_digest(directive: &str) -> String {
    let digest = Sha256::digest(directive.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(ds: &[&str]) -> Vec<(String, String)> {
        ds.iter().map(|d| (d.to_string(), String::new())).collect()
    }

    #[test]
    fn unvisited_scores_infinite() {
        assert_eq!(ucb_score(0, 0.0, 10, 1.2), f64::INFINITY);
    }

    #[test]
    fn log_one_kills_exploration() {
        assert_eq!(ucb_score(2, 3.0, 1, 1.2), 1.5);
        assert_eq!(ucb_score(2, 3.0, 0, 1.2), 1.5);
    }

    #[test]
    fn root_only_selects_root() {
        let t = DirectiveTree::new();
        assert_eq!(t.select_leaves(SelectionBudget { m: 1, c: 1.2 }), vec![NodeId::ROOT]);
        assert_eq!(t.select_leaves(SelectionBudget { m: 3, c: 1.2 }), vec![NodeId::ROOT]);
    }

    #[test]
    fn unvisited_child_beats_visited() {
        let mut t = DirectiveTree::new();
        let ids = t.attach_children(NodeId::ROOT, &pairs(&["a", "b"]), 1).unwrap();
        t.backpropagate(ids[0], 100.0).unwrap();
        assert_eq!(t.select_leaves(SelectionBudget::default()), vec![ids[1]]);
    }

    #[test]
    fn higher_mean_wins_at_equal_visits() {
        let mut t = DirectiveTree::new();
        let ids = t.attach_children(NodeId::ROOT, &pairs(&["a", "b"]), 1).unwrap();
        // B(W=2,N=2) listed first to make sure order is not what decides
        t.backpropagate(ids[0], 1.0).unwrap();
        t.backpropagate(ids[0], 1.0).unwrap();
        t.backpropagate(ids[1], 2.0).unwrap();
        t.backpropagate(ids[1], 2.0).unwrap();
        assert_eq!(t.root().visits, 4);
        assert_eq!(t.select_leaves(SelectionBudget::default()), vec![ids[1]]);
    }

    #[test]
    fn equal_everything_prefers_insertion_order() {
        let mut t = DirectiveTree::new();
        let ids = t.attach_children(NodeId::ROOT, &pairs(&["a", "b", "c"]), 1).unwrap();
        assert_eq!(t.select_leaves(SelectionBudget::default()), vec![ids[0]]);
        let all = t.select_leaves(SelectionBudget { m: 3, c: 1.2 });
        assert_eq!(all, ids);
    }

    #[test]
    fn multi_leaf_selection_is_distinct_and_leaves_counts_alone() {
        let mut t = DirectiveTree::new();
        let ids = t.attach_children(NodeId::ROOT, &pairs(&["a", "b"]), 1).unwrap();
        t.backpropagate(ids[0], 3.0).unwrap();
        t.backpropagate(ids[1], 0.0).unwrap();
        let before = t.clone();
        let picked = t.select_leaves(SelectionBudget { m: 5, c: 1.2 });
        assert_eq!(picked, vec![ids[0], ids[1]]);
        assert_eq!(t, before);
    }

    #[test]
    fn backprop_updates_path_only() {
        let mut t = DirectiveTree::new();
        let a = t.attach_children(NodeId::ROOT, &pairs(&["a", "b"]), 1).unwrap();
        let aa = t.attach_children(a[0], &pairs(&["aa"]), 2).unwrap();
        t.backpropagate(aa[0], 2.0).unwrap();
        let touched: Vec<_> = t.nodes().iter().filter(|n| n.visits == 1).map(|n| n.id).collect();
        assert_eq!(touched, vec![NodeId::ROOT, a[0], aa[0]]);
        assert_eq!(t.get(a[1]).unwrap().visits, 0);
        t.backpropagate(aa[0], 1.0).unwrap();
        t.backpropagate(aa[0], 3.0).unwrap();
        assert_eq!(t.root().cumulative_reward, 6.0);
        assert_eq!(t.root().visits, 3);
    }

    #[test]
    fn sibling_backprops_on_five_node_fixture() {
        // root -> {a, b}, a -> {a1, a2}
        let mut t = DirectiveTree::new();
        let ab = t.attach_children(NodeId::ROOT, &pairs(&["a", "b"]), 1).unwrap();
        let kids = t.attach_children(ab[0], &pairs(&["a1", "a2"]), 2).unwrap();
        t.backpropagate(kids[0], 1.0).unwrap();
        t.backpropagate(kids[1], 1.0).unwrap();
        let visits: Vec<u64> = t.nodes().iter().map(|n| n.visits).collect();
        // path sets {root,a,a1} and {root,a,a2}
        assert_eq!(visits, vec![2, 2, 0, 1, 1]);
    }

    #[test]
    fn rejects_bad_reward() {
        let mut t = DirectiveTree::new();
        assert!(t.backpropagate(NodeId::ROOT, -1.0).is_err());
        assert!(t.backpropagate(NodeId::ROOT, f64::NAN).is_err());
        assert!(t.backpropagate(NodeId(9), 1.0).is_err());
    }

    #[test]
    fn attach_rules() {
        let mut t = DirectiveTree::new();
        let ids = t.attach_children(NodeId::ROOT, &pairs(&["x", "y", "z"]), 1).unwrap();
        assert_eq!(ids.len(), 3);
        assert!(ids.iter().all(|&i| t.get(i).unwrap().visits == 0));
        assert!(!t.root().is_leaf());
        assert!(!t.leaves().contains(&NodeId::ROOT));
        let err = t.attach_children(NodeId::ROOT, &pairs(&["w", "y"]), 2).unwrap_err();
        assert!(matches!(err, TreeError::DuplicateDirective { .. }));
        assert_eq!(t.len(), 4, "failed attach leaves the tree unchanged");
        assert_eq!(t.attach_children(NodeId::ROOT, &[], 2), Err(TreeError::EmptyDirectives));
        assert!(t.attach_children(NodeId::ROOT, &pairs(&["q", "q"]), 2).is_err());
    }

    #[test]
    fn reward_law() {
        assert_eq!(node_reward(0.5, 4), 2.0);
        assert_eq!(node_reward(0.3, 0), 0.0);
        assert_eq!(node_reward(1.0, 7), 7.0);
        assert_eq!(precision(0, 0), 0.0);
        assert_eq!(precision(6, 10), 0.6);
    }

    #[test]
    fn render_and_snapshot() {
        let mut t = DirectiveTree::new();
        t.attach_children(NodeId::ROOT, &pairs(&["focus: ADCs"]), 1).unwrap();
        let text = t.render();
        assert!(text.starts_with("<root> [n0] N=0 W=0.000\n  focus: ADCs [n1]"));
        let snap = t.to_jsonl();
        assert_eq!(snap.lines().count(), 2);
        assert!(snap.contains(&directive_digest("focus: ADCs")));
    }
}
