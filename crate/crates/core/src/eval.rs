//! Recall, precision and F1 over a query/ground-truth benchmark.
//!
//! Recall is the mean of per-example binary verdicts. Precision is pooled
//! over every `(query, predicted asset)` pair of the run. Grading goes
//! through [`Grader`]; [`OracleGrader`] decides against a simulated universe.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::Evidence;
use crate::criteria::Expr;
use crate::sim::Universe;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("benchmark has no examples")]
    EmptyBenchmark,
    #[error("correct pair {0:?} is not among the predictions")]
    SubsetViolation((String, String)),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallVerdict {
    pub example_id: String,
    pub verdict: bool,
    pub matched_predicted_name: Option<String>,
    #[serde(default)]
    pub alias_evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionVerdict {
    pub criterion: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionVerdict {
    pub query_id: String,
    pub predicted: String,
    pub is_match: bool,
    /// The query's logic with operators intact; `dimension_verdicts` are its atoms in order.
    pub logic: String,
    pub dimension_verdicts: Vec<DimensionVerdict>,
}

/// Mean of binary verdicts.
pub fn recall_score(verdicts: &[RecallVerdict]) -> Result<f64, EvalError> {
    if verdicts.is_empty() {
        return Err(EvalError::EmptyBenchmark);
    }
    let hits = verdicts.iter().filter(|v| v.verdict).count();
    Ok(hits as f64 / verdicts.len() as f64)
}

pub type Pair = (String, String);

/// `|correct| / |all|`; `None` when nothing was predicted.
pub fn precision_score(all: &BTreeSet<Pair>, correct: &BTreeSet<Pair>) -> Result<Option<f64>, EvalError> {
    if let Some(p) = correct.iter().find(|p| !all.contains(*p)) {
        return Err(EvalError::SubsetViolation(p.clone()));
    }
    if all.is_empty() {
        return Ok(None);
    }
    Ok(Some(correct.len() as f64 / all.len() as f64))
}

/// Harmonic mean; 0 when both inputs are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchQuery {
    pub id: String,
    pub query: String,
    pub ground_truth: Vec<String>,
}

impl BenchQuery {
    pub fn example_id(&self, i: usize) -> String {
        format!("{}#{i}", self.id)
    }
}

pub trait Grader: Sync {
    /// Does any of `predictions` name the ground-truth asset?
    fn recall(&self, example_id: &str, ground_truth: &str, predictions: &[String]) -> Result<RecallVerdict, String>;

    /// Does `predicted` satisfy `query`?
    fn precision(&self, query_id: &str, query: &str, predicted: &str) -> Result<PrecisionVerdict, String>;
}

/// Sim-mode grader: alias resolution and predicate evaluation against the universe.
pub struct OracleGrader<'u> {
    pub universe: &'u Universe,
}

impl Grader for OracleGrader<'_> {
    fn recall(&self, example_id: &str, ground_truth: &str, predictions: &[String]) -> Result<RecallVerdict, String> {
        let gt = self.universe.resolve(ground_truth);
        if gt.is_empty() {
            return Err(format!("ground truth `{ground_truth}` is not in the universe"));
        }
        let hit = predictions.iter().find(|p| self.universe.resolve(p).iter().any(|id| gt.contains(id)));
        Ok(RecallVerdict {
            example_id: example_id.to_string(),
            verdict: hit.is_some(),
            matched_predicted_name: hit.cloned(),
            alias_evidence: hit
                .map(|p| {
                    vec![Evidence {
                        url: format!("https://registry.sim/entity/{}", gt[0]),
                        quote: format!("{p} is an alias of {ground_truth}"),
                    }]
                })
                .unwrap_or_default(),
        })
    }

    fn precision(&self, query_id: &str, query: &str, predicted: &str) -> Result<PrecisionVerdict, String> {
        let q = Expr::parse(query).map_err(|e| e.to_string())?;
        let dims = |pass: &dyn Fn(&crate::criteria::Criterion) -> bool| -> Vec<DimensionVerdict> {
            q.atoms().into_iter().map(|c| DimensionVerdict { criterion: c.to_string(), pass: pass(c) }).collect()
        };
        let (is_match, dimension_verdicts) = match self.universe.resolve_one(predicted) {
            Some(e) if e.is_asset() => (q.eval(e), dims(&|c| c.holds(e))),
            // unknown names and lookalikes of real programs are never correct
            Some(e) => (false, dims(&|c| c.holds(e))),
            None => (false, dims(&|_| false)),
        };
        Ok(PrecisionVerdict {
            query_id: query_id.to_string(),
            predicted: predicted.to_string(),
            is_match,
            logic: q.to_string(),
            dimension_verdicts,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ground_truth: usize,
    pub found: usize,
    pub predicted: usize,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub per_query: Vec<QueryMetrics>,
    pub recall_verdicts: Vec<RecallVerdict>,
    pub precision_verdicts: Vec<PrecisionVerdict>,
    pub recall: f64,
    pub precision: Option<f64>,
    pub f1: f64,
    /// Examples or pairs the grader could not decide, with the reason.
    pub excluded: Vec<String>,
}

impl MetricsTable {
    pub fn to_text(&self) -> String {
        let mut s = String::from("query\tground_truth\tfound\tpredicted\tcorrect\n");
        for q in &self.per_query {
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", q.query_id, q.ground_truth, q.found, q.predicted, q.correct);
        }
        let p = self.precision.map(|p| format!("{p:.4}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(s, "recall {:.4}  precision {p}  f1 {:.4}", self.recall, self.f1);
        for e in &self.excluded {
            let _ = writeln!(s, "excluded: {e}");
        }
        s
    }
}

/// Grade predictions (query id -> predicted names) against a benchmark.
pub fn evaluate_run(
    predictions: &BTreeMap<String, Vec<String>>,
    benchmark: &[BenchQuery],
    grader: &dyn Grader,
) -> Result<MetricsTable, EvalError> {
    let empty = Vec::new();
    let mut recall_verdicts = Vec::new();
    let mut precision_verdicts = Vec::new();
    let mut excluded = Vec::new();
    let mut per_query = Vec::new();
    let mut all = BTreeSet::new();
    let mut correct = BTreeSet::new();
    for q in benchmark {
        let preds = predictions.get(&q.id).unwrap_or(&empty);
        let mut found = 0;
        for (i, gt) in q.ground_truth.iter().enumerate() {
            match grader.recall(&q.example_id(i), gt, preds) {
                Ok(v) => {
                    found += usize::from(v.verdict);
                    recall_verdicts.push(v);
                }
                Err(e) => excluded.push(format!("{}: {e}", q.example_id(i))),
            }
        }
        let mut n_correct = 0;
        let distinct: BTreeSet<&String> = preds.iter().collect();
        for p in &distinct {
            match grader.precision(&q.id, &q.query, p) {
                Ok(v) => {
                    let pair = (q.id.clone(), p.to_string());
                    if v.is_match {
                        n_correct += 1;
                        correct.insert(pair.clone());
                    }
                    all.insert(pair);
                    precision_verdicts.push(v);
                }
                Err(e) => excluded.push(format!("{} / {p}: {e}", q.id)),
            }
        }
        per_query.push(QueryMetrics {
            query_id: q.id.clone(),
            ground_truth: q.ground_truth.len(),
            found,
            predicted: distinct.len(),
            correct: n_correct,
        });
    }
    let recall = recall_score(&recall_verdicts)?;
    let precision = precision_score(&all, &correct)?;
    Ok(MetricsTable {
        per_query,
        recall_verdicts,
        precision_verdicts,
        recall,
        precision,
        f1: f1(precision.unwrap_or(0.0), recall),
        excluded,
    })
}

/// One row of a quality-over-time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityPoint {
    pub epoch: u32,
    pub clock: f64,
    pub investigator_calls: usize,
    pub assets: usize,
    pub recall: f64,
    pub precision: Option<f64>,
    pub f1: f64,
}

pub fn quality_tsv(points: &[QualityPoint]) -> String {
    let mut s = String::from("epoch\tclock\tinvestigator_calls\tassets\trecall\tprecision\tf1\n");
    for p in points {
        let prec = p.precision.map(|v| format!("{v:.6}")).unwrap_or_else(|| "NA".into());
        let _ = writeln!(
            s,
            "{}\t{:.3}\t{}\t{}\t{:.6}\t{prec}\t{:.6}",
            p.epoch, p.clock, p.investigator_calls, p.assets, p.recall, p.f1
        );
    }
    s
}

/// A single-query benchmark whose ground truth is the universe's exhaustive answer.
pub fn oracle_benchmark(universe: &Universe, id: &str, query: &str) -> Result<BenchQuery, crate::criteria::CriteriaError> {
    let q = Expr::parse(query)?;
    Ok(BenchQuery {
        id: id.to_string(),
        query: query.to_string(),
        ground_truth: universe.oracle_answer(&q).into_iter().map(|i| universe.entity(i).canonical_name.clone()).collect(),
    })
}
