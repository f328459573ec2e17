//! Completeness-first "find-all" asset scouting.
//!
//! A directive tree steers investigator agents toward under-explored slices
//! of a screening query. Each rollout is scored by precision-gated novelty
//! (`r = p * |new unique assets|`), backpropagated to the root, and the
//! selected node is expanded by a coach into narrower child directives.
//!
//! Agent roles are traits in [`backend`]; [`backend::scripted`] binds them to
//! the deterministic [`sim`] universe so runs can be graded exactly with
//! [`eval`]. [`benchgen`] holds the benchmark-construction scaffold.

pub mod backend;
pub mod benchgen;
pub mod cli;
pub mod config;
pub mod criteria;
pub mod eval;
pub mod experiment;
pub mod model;
pub mod orchestrator;
pub mod sim;
pub mod snapshot;
pub mod tree;
