//! Scoring extracted machines against hand-built ground truth.
//!
//! Transition matching reuses the ensemble's alignment predicate (exact
//! endpoints, token overlap on both label spans) and resolves it into a
//! one-to-one assignment greedily: the closest aligned (prediction, truth)
//! pair is accepted first, ties broken by truth index then prediction index,
//! and each side is consumed at most once. Matched pairs are true positives;
//! leftover predictions are false positives; leftover truths are false
//! negatives.
//!
//! Zero denominators are never hidden: a metric whose denominator is empty
//! scores 0 and is listed in the report's `undefined` field.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{span_overlap, transitions_aligned, AlignmentParams, TransitionLike};
use crate::fsm::{canonical_state_text, StateName, Transition};
use crate::text::normalize_ws;

/// Layer bucket for content that cannot be attributed to any labeled layer.
pub const UNLAYERED: &str = "unlayered";

/// Errors from loading or validating ground truth.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read ground truth {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("ground truth is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ground truth is malformed: {0}")]
    Schema(String),
}

/// A reference state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthState {
    pub name: String,
    #[serde(default)]
    pub initial: bool,
    #[serde(default, rename = "final")]
    pub is_final: bool,
}

/// A reference transition, optionally tagged with the sub-procedure layer it
/// belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTransition {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub condition: String,
    #[serde(default)]
    pub action: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<String>,
}

impl TransitionLike for TruthTransition {
    fn source_state(&self) -> &str {
        &self.from
    }
    fn target_state(&self) -> &str {
        &self.to
    }
    fn condition(&self) -> &str {
        &self.condition
    }
    fn action(&self) -> &str {
        &self.action
    }
}

/// The reference machine a run is scored against.
///
/// The loader is deliberately lenient about extra fields, so an exported
/// machine file can serve as ground truth directly; names and label spans
/// are canonicalized on load so comparisons never hinge on whitespace or
/// letter case.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default)]
    pub protocol: String,
    #[serde(default)]
    pub spec_version: String,
    pub states: Vec<TruthState>,
    pub transitions: Vec<TruthTransition>,
}

impl GroundTruth {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, EvalError> {
        let mut truth: GroundTruth = serde_json::from_slice(bytes)?;
        for state in &mut truth.states {
            state.name = canonical_state_text(&state.name);
            if state.name.is_empty() {
                return Err(EvalError::Schema("state with an empty name".to_string()));
            }
        }
        for (idx, t) in truth.transitions.iter_mut().enumerate() {
            t.from = canonical_state_text(&t.from);
            t.to = canonical_state_text(&t.to);
            t.condition = normalize_ws(&t.condition);
            t.action = normalize_ws(&t.action);
            if t.from.is_empty() || t.to.is_empty() {
                return Err(EvalError::Schema(format!(
                    "transition {idx} has an empty endpoint"
                )));
            }
            if let Some(layer) = &t.layer {
                if layer.trim().is_empty() {
                    t.layer = None;
                }
            }
        }
        Ok(truth)
    }

    pub fn from_file(path: &Path) -> Result<Self, EvalError> {
        let bytes = std::fs::read(path).map_err(|source| EvalError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_slice(&bytes)
    }

    /// Layer names present in the truth, in sorted order.
    #[must_use]
    pub fn layers(&self) -> Vec<&str> {
        let mut layers: Vec<&str> = self
            .transitions
            .iter()
            .filter_map(|t| t.layer.as_deref())
            .collect();
        layers.sort_unstable();
        layers.dedup();
        layers
    }
}

/// Outcome of the one-to-one assignment between predictions and truths.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPartition {
    /// Accepted `(prediction index, truth index)` pairs, in acceptance
    /// order.
    pub matched: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
    /// For unmatched predictions that share endpoints with some truth: the
    /// closest such truth, used to attribute the false positive to a layer.
    pub nearest_truth: BTreeMap<usize, usize>,
}

/// Greedy one-to-one matching of predicted transitions against the truth.
#[must_use]
pub fn match_transitions(
    predicted: &[Transition],
    truth: &GroundTruth,
    params: &AlignmentParams,
) -> MatchPartition {
    // All aligned pairs, scored by summed label overlap.
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (pred_idx, pred) in predicted.iter().enumerate() {
        for (truth_idx, t) in truth.transitions.iter().enumerate() {
            if transitions_aligned(pred, t, params) {
                let score = span_overlap(pred.condition(), t.condition())
                    + span_overlap(pred.action(), t.action());
                pairs.push((pred_idx, truth_idx, score));
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| a.1.cmp(&b.1))
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut pred_taken = vec![false; predicted.len()];
    let mut truth_taken = vec![false; truth.transitions.len()];
    let mut matched = Vec::new();
    for (pred_idx, truth_idx, _) in pairs {
        if pred_taken[pred_idx] || truth_taken[truth_idx] {
            continue;
        }
        pred_taken[pred_idx] = true;
        truth_taken[truth_idx] = true;
        matched.push((pred_idx, truth_idx));
    }

    let unmatched_predictions: Vec<usize> =
        (0..predicted.len()).filter(|&i| !pred_taken[i]).collect();
    let unmatched_truths: Vec<usize> = (0..truth.transitions.len())
        .filter(|&i| !truth_taken[i])
        .collect();

    // Attribute leftover predictions to the closest truth sharing their
    // endpoints (matched or not), for per-layer reporting.
    let mut nearest_truth = BTreeMap::new();
    for &pred_idx in &unmatched_predictions {
        let pred = &predicted[pred_idx];
        let mut best: Option<(usize, f64)> = None;
        for (truth_idx, t) in truth.transitions.iter().enumerate() {
            if pred.source_state() != t.source_state() || pred.target_state() != t.target_state() {
                continue;
            }
            let score = span_overlap(pred.condition(), t.condition())
                + span_overlap(pred.action(), t.action());
            let better = match best {
                None => true,
                Some((_, best_score)) => score > best_score,
            };
            if better {
                best = Some((truth_idx, score));
            }
        }
        if let Some((truth_idx, _)) = best {
            nearest_truth.insert(pred_idx, truth_idx);
        }
    }

    MatchPartition {
        matched,
        unmatched_predictions,
        unmatched_truths,
        nearest_truth,
    }
}

/// F1 as the harmonic mean of precision and recall; 0 when both inputs are
/// 0. Works on fractions and on percentages alike.
#[must_use]
pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Counts plus the derived metrics for one scoring bucket.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Fractions in `[0, 1]`; rendering converts to percent.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LayerScore {
    fn from_counts(
        tp: usize,
        fp: usize,
        fn_count: usize,
        undefined: &mut Vec<String>,
        prefix: &str,
    ) -> Self {
        let precision = if tp + fp == 0 {
            undefined.push(format!("{prefix}precision (no predictions)"));
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_count == 0 {
            undefined.push(format!("{prefix}recall (no reference items)"));
            0.0
        } else {
            tp as f64 / (tp + fn_count) as f64
        };
        if precision + recall == 0.0 {
            undefined.push(format!("{prefix}f1 (precision and recall both zero)"));
        }
        LayerScore {
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_count,
            precision,
            recall,
            f1: harmonic_f1(precision, recall),
        }
    }
}

/// Full scoring output: overall metrics, per-layer breakdown, the assignment
/// itself, and which metrics were undefined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Metrics that had an empty denominator and were reported as 0.
    pub undefined: Vec<String>,
    pub per_layer: BTreeMap<String, LayerScore>,
    pub matched: Vec<(usize, usize)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Scores a transition assignment. Per-layer buckets come from the truth's
/// `layer` tags: a matched pair and a missed truth count toward the truth's
/// layer, a false positive toward its nearest endpoint-sharing truth's
/// layer, and anything without a layer toward [`UNLAYERED`].
#[must_use]
pub fn score(partition: &MatchPartition, truth: &GroundTruth) -> EvalReport {
    let mut undefined = Vec::new();
    let overall = LayerScore::from_counts(
        partition.matched.len(),
        partition.unmatched_predictions.len(),
        partition.unmatched_truths.len(),
        &mut undefined,
        "",
    );

    let layer_of = |truth_idx: usize| -> String {
        truth.transitions[truth_idx]
            .layer
            .clone()
            .unwrap_or_else(|| UNLAYERED.to_string())
    };
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for layer in truth.layers() {
        counts.entry(layer.to_string()).or_default();
    }
    for &(_, truth_idx) in &partition.matched {
        counts.entry(layer_of(truth_idx)).or_default().0 += 1;
    }
    for &pred_idx in &partition.unmatched_predictions {
        let layer = partition
            .nearest_truth
            .get(&pred_idx)
            .map(|&truth_idx| layer_of(truth_idx))
            .unwrap_or_else(|| UNLAYERED.to_string());
        counts.entry(layer).or_default().1 += 1;
    }
    for &truth_idx in &partition.unmatched_truths {
        counts.entry(layer_of(truth_idx)).or_default().2 += 1;
    }

    let mut per_layer = BTreeMap::new();
    for (layer, (tp, fp, fn_count)) in counts {
        let prefix = format!("{layer}: ");
        per_layer.insert(
            layer,
            LayerScore::from_counts(tp, fp, fn_count, &mut undefined, &prefix),
        );
    }

    EvalReport {
        true_positives: overall.true_positives,
        false_positives: overall.false_positives,
        false_negatives: overall.false_negatives,
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        undefined,
        per_layer,
        matched: partition.matched.clone(),
        unmatched_predictions: partition.unmatched_predictions.clone(),
        unmatched_truths: partition.unmatched_truths.clone(),
    }
}

/// Scores predicted states against the truth's state list by exact canonical
/// name. One-to-one by construction (both sides are sets of names).
#[must_use]
pub fn state_score(predicted: &[StateName], truth: &GroundTruth) -> EvalReport {
    let truth_index: BTreeMap<&str, usize> = truth
        .states
        .iter()
        .enumerate()
        .map(|(idx, s)| (s.name.as_str(), idx))
        .collect();
    let mut matched = Vec::new();
    let mut unmatched_predictions = Vec::new();
    let mut truth_taken = vec![false; truth.states.len()];
    for (pred_idx, name) in predicted.iter().enumerate() {
        match truth_index.get(name.as_str()) {
            Some(&truth_idx) if !truth_taken[truth_idx] => {
                truth_taken[truth_idx] = true;
                matched.push((pred_idx, truth_idx));
            }
            _ => unmatched_predictions.push(pred_idx),
        }
    }
    let unmatched_truths: Vec<usize> = (0..truth.states.len())
        .filter(|&i| !truth_taken[i])
        .collect();

    let mut undefined = Vec::new();
    let overall = LayerScore::from_counts(
        matched.len(),
        unmatched_predictions.len(),
        unmatched_truths.len(),
        &mut undefined,
        "",
    );
    EvalReport {
        true_positives: overall.true_positives,
        false_positives: overall.false_positives,
        false_negatives: overall.false_negatives,
        precision: overall.precision,
        recall: overall.recall,
        f1: overall.f1,
        undefined,
        per_layer: BTreeMap::new(),
        matched,
        unmatched_predictions,
        unmatched_truths,
    }
}

/// Renders a report as an aligned text table, one row overall plus one per
/// layer.
#[must_use]
pub fn render_eval_table(title: &str, report: &EvalReport) -> String {
    let mut rows: Vec<(String, &LayerScore)> = Vec::new();
    let overall = LayerScore {
        true_positives: report.true_positives,
        false_positives: report.false_positives,
        false_negatives: report.false_negatives,
        precision: report.precision,
        recall: report.recall,
        f1: report.f1,
    };
    rows.push(("overall".to_string(), &overall));
    for (layer, score) in &report.per_layer {
        rows.push((layer.clone(), score));
    }

    let mut width = 0usize;
    for (label, _) in &rows {
        width = width.max(label.len());
    }
    let mut out = format!("{title}\n");
    out.push_str(&format!(
        "{:<width$}  {:>13}  {:>10}  {:>7}  {:>4}  {:>4}  {:>4}\n",
        "", "Precision (%)", "Recall (%)", "F1 (%)", "TP", "FP", "FN"
    ));
    for (label, s) in rows {
        out.push_str(&format!(
            "{label:<width$}  {:>13.2}  {:>10.2}  {:>7.2}  {:>4}  {:>4}  {:>4}\n",
            s.precision * 100.0,
            s.recall * 100.0,
            s.f1 * 100.0,
            s.true_positives,
            s.false_positives,
            s.false_negatives
        ));
    }
    if !report.undefined.is_empty() {
        out.push_str(&format!(
            "undefined (reported as 0): {}\n",
            report.undefined.join("; ")
        ));
    }
    out
}
