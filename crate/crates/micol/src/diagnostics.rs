//! Meta-path quality diagnostic.
//!
//! For a labeled diagnostic subset, compares two ways of drawing a positive
//! partner for a document d: uniform over the meta-path neighborhood N_M(d),
//! and uniform over the documents sharing at least one label with d. Their
//! Jensen-Shannon divergence (natural log, so bounded by ln 2) is low exactly
//! when the meta-path's pairs track label overlap.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::hin::{Hin, MetaPattern};
use crate::Real;

/// Divergence summary for one document under one pattern.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DocJs<F: Real> {
    pub doc_id: String,
    /// |N_M(d)|
    pub x: usize,
    /// number of labeled documents sharing at least one label with d
    pub y: usize,
    /// |N_M(d) ∩ label-overlap set|
    pub overlap: usize,
    /// undefined (skipped) when x = 0 or y = 0
    pub js: Option<F>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PatternJs<F: Real> {
    pub pattern: MetaPattern,
    /// mean over documents where the divergence is defined
    pub mean_js: Option<F>,
    pub defined_docs: usize,
    pub skipped_docs: usize,
    pub per_doc: Vec<DocJs<F>>,
}

/// Patterns ordered by ascending mean divergence (best-aligned first).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct JsReport<F: Real> {
    pub labeled_subset_size: usize,
    pub patterns: Vec<PatternJs<F>>,
}

/// Documents sharing at least one label with `doc_id`, within the labeled
/// subset and excluding the document itself.
fn label_overlap_set<'a>(truth: &'a GroundTruth, doc_id: &str) -> Result<BTreeSet<&'a str>> {
    let own = truth
        .get(doc_id)
        .filter(|l| !l.is_empty())
        .ok_or_else(|| {
            Error::Validation(format!("document {doc_id:?} has no ground-truth labels"))
        })?;
    Ok(truth
        .labels
        .iter()
        .filter(|(other, labels)| other.as_str() != doc_id && !labels.is_disjoint(own))
        .map(|(other, _)| other.as_str())
        .collect())
}

/// Closed-form Jensen-Shannon divergence between the meta-path pair
/// distribution and the label-overlap pair distribution for one document.
/// `None` when either support is empty.
pub fn js_divergence<F: Real>(
    hin: &Hin,
    truth: &GroundTruth,
    doc_id: &str,
    pattern: MetaPattern,
) -> Result<Option<F>> {
    Ok(js_parts(hin, truth, doc_id, pattern)?.js)
}

fn js_parts<F: Real>(
    hin: &Hin,
    truth: &GroundTruth,
    doc_id: &str,
    pattern: MetaPattern,
) -> Result<DocJs<F>> {
    let reachable = hin.neighbors(doc_id, pattern)?;
    let overlap_set = label_overlap_set(truth, doc_id)?;
    let x = reachable.len();
    let y = overlap_set.len();
    let overlap = reachable
        .iter()
        .filter(|d| overlap_set.contains(d.as_str()))
        .count();

    let js = if x == 0 || y == 0 {
        None
    } else {
        let xf = F::from_usize_lossy(x);
        let yf = F::from_usize_lossy(y);
        let two = F::from_f64_lossy(2.0);
        let half = F::from_f64_lossy(0.5);
        // reachable-only and overlap-only masses each contribute one term
        let reach_only = F::from_usize_lossy(x - overlap) / xf;
        let overlap_only = F::from_usize_lossy(y - overlap) / yf;
        let value = half * (two * xf / (xf + yf)).ln()
            + half * reach_only * (F::one() + xf / yf).ln()
            + half * (two * yf / (xf + yf)).ln()
            + half * overlap_only * (F::one() + yf / xf).ln();
        Some(value)
    };
    Ok(DocJs {
        doc_id: doc_id.to_owned(),
        x,
        y,
        overlap,
        js,
    })
}

/// Run the diagnostic for each pattern over a labeled document subset.
pub fn diagnose<F: Real>(
    hin: &Hin,
    truth: &GroundTruth,
    docs: &[String],
    patterns: &[MetaPattern],
) -> Result<JsReport<F>> {
    let mut report = JsReport {
        labeled_subset_size: truth.labels.values().filter(|l| !l.is_empty()).count(),
        patterns: Vec::with_capacity(patterns.len()),
    };
    for &pattern in patterns {
        let mut per_doc = Vec::with_capacity(docs.len());
        let mut sum = F::zero();
        let mut defined = 0usize;
        for doc_id in docs {
            let parts = js_parts::<F>(hin, truth, doc_id, pattern)?;
            if let Some(js) = parts.js {
                sum += js;
                defined += 1;
            }
            per_doc.push(parts);
        }
        report.patterns.push(PatternJs {
            pattern,
            mean_js: (defined > 0).then(|| sum / F::from_usize_lossy(defined)),
            defined_docs: defined,
            skipped_docs: per_doc.len() - defined,
            per_doc,
        });
    }
    report.patterns.sort_by(|a, b| match (a.mean_js, b.mean_js) {
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(report)
}
