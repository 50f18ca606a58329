//! Rank-based and propensity-scored evaluation.
//!
//! P@k and NDCG@k follow the usual conventions (DCG with log base 2, ideal
//! DCG over min(k, #relevant)). PSP@k and PSN@k weight hits by inverse
//! propensity and are normalized per document by the best achievable value,
//! where the ideal ranking places true labels sorted by descending reward.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::inference::RankedPrediction;
use crate::Real;

pub const PROPENSITY_A: f64 = 0.55;
pub const PROPENSITY_B: f64 = 1.5;

/// Per-document relevant label sets.
#[derive(Debug, Clone, Default)]
pub struct GroundTruth {
    pub labels: BTreeMap<String, BTreeSet<String>>,
}

impl GroundTruth {
    /// Collect ground truth from documents that carry labels.
    pub fn from_documents(docs: &[Document]) -> Self {
        GroundTruth {
            labels: docs
                .iter()
                .filter_map(|d| d.labels.clone().map(|l| (d.doc_id.clone(), l)))
                .collect(),
        }
    }

    pub fn get(&self, doc_id: &str) -> Option<&BTreeSet<String>> {
        self.labels.get(doc_id)
    }
}

/// Propensity of observing each label, fitted from training-split label
/// frequencies: 1/p_l = 1 + C (N_l + B)^(-A) with C = (ln|D| - 1)(B + 1)^A.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PropensityModel<F: Real> {
    pub a: F,
    pub b: F,
    pub c: F,
    pub corpus_size: usize,
    pub counts: BTreeMap<String, usize>,
}

impl<F: Real> PropensityModel<F> {
    /// Uniform propensities: every p_l = 1, degenerating PSP/PSN to P/NDCG.
    pub fn uniform() -> Self {
        PropensityModel {
            a: F::from_f64_lossy(PROPENSITY_A),
            b: F::from_f64_lossy(PROPENSITY_B),
            c: F::zero(),
            corpus_size: 0,
            counts: BTreeMap::new(),
        }
    }

    /// Propensity of a label; unseen labels use N_l = 0.
    pub fn p(&self, label_id: &str) -> F {
        let n_l = F::from_usize_lossy(self.counts.get(label_id).copied().unwrap_or(0));
        let inv = F::one() + self.c * (n_l + self.b).powf(-self.a);
        // C can only go negative for corpora smaller than e documents; keep
        // propensities in (0, 1] regardless.
        (F::one() / inv).min(F::one())
    }

    /// Inverse propensity, the reward for a correct prediction of this label.
    pub fn reward(&self, label_id: &str) -> F {
        F::one() / self.p(label_id)
    }
}

/// Fit the propensity model from per-label training frequencies.
pub fn fit_propensity<F: Real>(
    train_freqs: BTreeMap<String, usize>,
    corpus_size: usize,
) -> Result<PropensityModel<F>> {
    if corpus_size < 2 {
        return Err(Error::Validation(format!(
            "corpus size {corpus_size} is too small to fit propensities"
        )));
    }
    let a = F::from_f64_lossy(PROPENSITY_A);
    let b = F::from_f64_lossy(PROPENSITY_B);
    let c = (F::from_usize_lossy(corpus_size).ln() - F::one()) * (b + F::one()).powf(a);
    Ok(PropensityModel {
        a,
        b,
        c,
        corpus_size,
        counts: train_freqs,
    })
}

/// Count label occurrences over a labeled training split.
pub fn label_frequencies(docs: &[Document]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for doc in docs {
        if let Some(labels) = &doc.labels {
            for label in labels {
                *counts.entry(label.clone()).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn hit<F: Real>(ranked: &[(String, F)], truth: &BTreeSet<String>, i: usize) -> bool {
    ranked.get(i).is_some_and(|(l, _)| truth.contains(l))
}

fn log2_discount<F: Real>(position: usize) -> F {
    F::from_usize_lossy(position + 2).log2()
}

/// Fraction of the top k positions that are relevant.
pub fn precision_at_k<F: Real>(
    pred: &RankedPrediction<F>,
    truth: &BTreeSet<String>,
    k: usize,
) -> F {
    let hits = (0..k).filter(|&i| hit(&pred.ranked, truth, i)).count();
    F::from_usize_lossy(hits) / F::from_usize_lossy(k)
}

/// DCG@k over binary relevance normalized by the ideal DCG over
/// min(k, #relevant); `None` when the document has no relevant labels.
pub fn ndcg_at_k<F: Real>(
    pred: &RankedPrediction<F>,
    truth: &BTreeSet<String>,
    k: usize,
) -> Option<F> {
    if truth.is_empty() {
        return None;
    }
    let mut dcg = F::zero();
    for i in 0..k {
        if hit(&pred.ranked, truth, i) {
            dcg += F::one() / log2_discount(i);
        }
    }
    let ideal: F = (0..k.min(truth.len()))
        .map(|i| F::one() / log2_discount(i))
        .sum();
    Some(dcg / ideal)
}

/// Ideal rewards for this document: true labels' 1/p_l in descending order.
fn ideal_rewards<F: Real>(truth: &BTreeSet<String>, pm: &PropensityModel<F>) -> Vec<F> {
    let mut rewards: Vec<F> = truth.iter().map(|l| pm.reward(l)).collect();
    rewards.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    rewards
}

/// Propensity-scored precision normalized by its per-document maximum.
/// 0 when the document has no relevant labels.
pub fn psp_at_k<F: Real>(
    pred: &RankedPrediction<F>,
    truth: &BTreeSet<String>,
    pm: &PropensityModel<F>,
    k: usize,
) -> F {
    if truth.is_empty() {
        return F::zero();
    }
    let mut raw = F::zero();
    for i in 0..k {
        if hit(&pred.ranked, truth, i) {
            raw += pm.reward(&pred.ranked[i].0);
        }
    }
    let best: F = ideal_rewards(truth, pm).into_iter().take(k).sum();
    raw / best
}

/// Propensity-scored NDCG normalized by its per-document maximum; `None` when
/// the document has no relevant labels.
pub fn psn_at_k<F: Real>(
    pred: &RankedPrediction<F>,
    truth: &BTreeSet<String>,
    pm: &PropensityModel<F>,
    k: usize,
) -> Option<F> {
    if truth.is_empty() {
        return None;
    }
    let mut raw = F::zero();
    for i in 0..k {
        if hit(&pred.ranked, truth, i) {
            raw += pm.reward(&pred.ranked[i].0) / log2_discount(i);
        }
    }
    let best: F = ideal_rewards(truth, pm)
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, r)| r / log2_discount(i))
        .sum();
    Some(raw / best)
}

/// Macro-averaged metric table over a prediction set.
///
/// P and PSP average over all documents (empty-truth documents contribute 0);
/// NDCG and PSN skip empty-truth documents, whose count is reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MetricsReport<F: Real> {
    pub k: Vec<usize>,
    #[serde(rename = "P")]
    pub p: Vec<F>,
    #[serde(rename = "NDCG")]
    pub ndcg: Vec<F>,
    #[serde(rename = "PSP")]
    pub psp: Vec<F>,
    #[serde(rename = "PSN")]
    pub psn: Vec<F>,
    pub psp1_over_p1: Option<F>,
    pub excluded_docs: usize,
    pub mean_labels_per_doc: F,
}

pub const DEFAULT_KS: [usize; 3] = [1, 3, 5];

/// Evaluate predictions against ground truth. Prediction and truth documents
/// must coincide exactly.
pub fn evaluate<F: Real>(
    preds: &[RankedPrediction<F>],
    truth: &GroundTruth,
    pm: &PropensityModel<F>,
    ks: &[usize],
) -> Result<MetricsReport<F>> {
    if preds.is_empty() {
        return Err(Error::Validation("no predictions to evaluate".into()));
    }
    let pred_ids: BTreeSet<&str> = preds.iter().map(|p| p.doc_id.as_str()).collect();
    if pred_ids.len() != preds.len() {
        return Err(Error::Validation("duplicate documents in predictions".into()));
    }
    let truth_ids: BTreeSet<&str> = truth.labels.keys().map(String::as_str).collect();
    if pred_ids != truth_ids {
        let missing: Vec<&&str> = truth_ids.difference(&pred_ids).take(5).collect();
        let extra: Vec<&&str> = pred_ids.difference(&truth_ids).take(5).collect();
        return Err(Error::Validation(format!(
            "prediction/truth document mismatch; missing predictions for {missing:?}, unexpected predictions for {extra:?}"
        )));
    }

    let empty = BTreeSet::new();
    let n_docs = F::from_usize_lossy(preds.len());
    let mut report = MetricsReport {
        k: ks.to_vec(),
        p: Vec::new(),
        ndcg: Vec::new(),
        psp: Vec::new(),
        psn: Vec::new(),
        psp1_over_p1: None,
        excluded_docs: preds
            .iter()
            .filter(|p| truth.get(&p.doc_id).is_none_or(BTreeSet::is_empty))
            .count(),
        mean_labels_per_doc: truth
            .labels
            .values()
            .map(|l| F::from_usize_lossy(l.len()))
            .sum::<F>()
            / n_docs,
    };

    for &k in ks {
        if k == 0 {
            return Err(Error::Validation("k must be at least 1".into()));
        }
        let mut p_sum = F::zero();
        let mut psp_sum = F::zero();
        let mut ndcg_sum = F::zero();
        let mut psn_sum = F::zero();
        let mut defined = 0usize;
        for pred in preds {
            let t = truth.get(&pred.doc_id).unwrap_or(&empty);
            p_sum += precision_at_k(pred, t, k);
            psp_sum += psp_at_k(pred, t, pm, k);
            if let (Some(n), Some(pn)) = (ndcg_at_k(pred, t, k), psn_at_k(pred, t, pm, k)) {
                ndcg_sum += n;
                psn_sum += pn;
                defined += 1;
            }
        }
        report.p.push(p_sum / n_docs);
        report.psp.push(psp_sum / n_docs);
        let defined = F::from_usize_lossy(defined.max(1));
        report.ndcg.push(ndcg_sum / defined);
        report.psn.push(psn_sum / defined);
    }

    if let Some(pos) = ks.iter().position(|&k| k == 1) {
        let p1 = report.p[pos];
        if p1 > F::zero() {
            report.psp1_over_p1 = Some(report.psp[pos] / p1);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pred(doc: &str, labels: &[&str]) -> RankedPrediction<f64> {
        RankedPrediction {
            doc_id: doc.into(),
            ranked: labels
                .iter()
                .enumerate()
                .map(|(i, l)| (l.to_string(), 1.0 - 0.1 * i as f64))
                .collect(),
            shortfall: 0,
        }
    }

    fn truth_set(labels: &[&str]) -> BTreeSet<String> {
        labels.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn precision_basics() {
        let t = truth_set(&["a", "b", "c"]);
        assert_eq!(precision_at_k(&pred("d", &["a", "b", "c"]), &t, 3), 1.0);
        let two_thirds = precision_at_k(&pred("d", &["a", "x", "b"]), &t, 3);
        assert!((two_thirds - 2.0 / 3.0).abs() < 1e-15);
        // positions beyond the ranked list count zero
        assert_eq!(precision_at_k(&pred("d", &["a"]), &t, 5), 0.2);
    }

    #[test]
    fn ndcg_hand_value() {
        // ranked [hit, miss, hit], 2 relevant labels, k = 3
        let t = truth_set(&["a", "b"]);
        let n = ndcg_at_k(&pred("d", &["a", "x", "b"]), &t, 3).unwrap();
        let expected = (1.0 + 0.5) / (1.0 + 1.0 / 3.0f64.log2());
        assert!((n - expected).abs() < 1e-12);
        assert!((n - 0.9197).abs() < 1e-4);
    }

    #[test]
    fn ndcg_perfect_is_one() {
        let t = truth_set(&["a", "b", "c", "d"]);
        let n = ndcg_at_k(&pred("d", &["a", "b", "c"]), &t, 3).unwrap();
        assert!((n - 1.0).abs() < 1e-15);
        assert!(ndcg_at_k(&pred("d", &["a"]), &truth_set(&[]), 3).is_none());
    }

    #[test]
    fn propensity_anchor_mag_cs() {
        // C = (ln 634874 - 1) * 2.5^0.55, N_l = 0 => p ~ 0.0576
        let pm: PropensityModel<f64> = fit_propensity(BTreeMap::new(), 634_874).unwrap();
        let expected_c = (634_874f64.ln() - 1.0) * 2.5f64.powf(0.55);
        assert!((pm.c - expected_c).abs() < 1e-12);
        let p = pm.p("anything");
        let expected_p = 1.0 / (1.0 + expected_c * 1.5f64.powf(-0.55));
        assert!((p - expected_p).abs() < 1e-15);
        assert!((p - 0.0576).abs() < 1e-4, "{p}");
    }

    #[test]
    fn propensity_monotone_and_limit() {
        let counts: BTreeMap<String, usize> =
            [("rare", 1usize), ("mid", 100), ("huge", 100_000_000)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let pm: PropensityModel<f64> = fit_propensity(counts, 1000).unwrap();
        assert!(pm.p("none") < pm.p("rare"));
        assert!(pm.p("rare") < pm.p("mid"));
        assert!(pm.p("mid") < pm.p("huge"));
        assert!(pm.p("huge") > 0.999);
        assert!(pm.p("none") > 0.0);
    }

    #[test]
    fn propensity_small_corpus_rejected() {
        assert!(fit_propensity::<f64>(BTreeMap::new(), 1).is_err());
    }

    #[test]
    fn uniform_propensity_degenerates() {
        let pm = PropensityModel::<f64>::uniform();
        let t = truth_set(&["a", "b", "c", "d", "e"]);
        let p = pred("d", &["a", "x", "b", "y", "c"]);
        for k in [1usize, 3, 5] {
            assert_eq!(psp_at_k(&p, &t, &pm, k), precision_at_k(&p, &t, k));
            assert_eq!(psn_at_k(&p, &t, &pm, k), ndcg_at_k(&p, &t, k));
        }
    }

    #[test]
    fn ideal_prediction_is_one() {
        let counts: BTreeMap<String, usize> = [("a", 5usize), ("b", 50), ("c", 500)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let pm: PropensityModel<f64> = fit_propensity(counts, 1000).unwrap();
        let t = truth_set(&["a", "b", "c"]);
        // ideal places rarest (highest reward) first
        let ideal = pred("d", &["a", "b", "c"]);
        assert!((psp_at_k(&ideal, &t, &pm, 3) - 1.0).abs() < 1e-12);
        assert!((psn_at_k(&ideal, &t, &pm, 3).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_single_perfect_doc() {
        let truth = GroundTruth {
            labels: [("d1".to_string(), truth_set(&["a", "b", "c", "d", "e"]))]
                .into_iter()
                .collect(),
        };
        let preds = vec![pred("d1", &["a", "b", "c", "d", "e"])];
        let pm = PropensityModel::uniform();
        let report = evaluate(&preds, &truth, &pm, &DEFAULT_KS).unwrap();
        for v in report.p.iter().chain(&report.ndcg).chain(&report.psp).chain(&report.psn) {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(report.psp1_over_p1, Some(1.0));
        assert_eq!(report.excluded_docs, 0);
        assert_eq!(report.mean_labels_per_doc, 5.0);
    }

    #[test]
    fn evaluate_rejects_mismatched_docs() {
        let truth = GroundTruth {
            labels: [("d1".to_string(), truth_set(&["a"]))].into_iter().collect(),
        };
        let preds = vec![pred("d2", &["a"])];
        let err = evaluate(&preds, &truth, &PropensityModel::uniform(), &[1]).unwrap_err();
        assert!(err.to_string().contains("d1"));
        assert!(err.to_string().contains("d2"));
    }

    #[test]
    fn report_shape() {
        let truth = GroundTruth {
            labels: [
                ("d1".to_string(), truth_set(&["a"])),
                ("d2".to_string(), truth_set(&[])),
            ]
            .into_iter()
            .collect(),
        };
        let preds = vec![pred("d1", &["a"]), pred("d2", &["a"])];
        let report = evaluate(&preds, &truth, &PropensityModel::uniform(), &DEFAULT_KS).unwrap();
        assert_eq!(report.k, vec![1, 3, 5]);
        assert_eq!(report.p.len(), 3);
        assert_eq!(report.ndcg.len(), 3);
        assert_eq!(report.psp.len(), 3);
        assert_eq!(report.psn.len(), 3);
        assert_eq!(report.excluded_docs, 1);
    }
}
