//! First-stage candidate generation: exact label-name matching plus BM25
//! sparse retrieval over label texts.
//!
//! Documents are the queries, labels are the items being ranked. Query-side
//! term multiplicity is ignored: each shared term contributes once.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{label_text, Label, TokenizerConfig};
use crate::error::{Error, Result};
use crate::Real;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;
pub const DEFAULT_ETA: f64 = 400.0;

/// Which quantity enters the BM25 length normalizer. `LabelLength` is the
/// standard |t_l|/avgdl form and the default; `LabelSpaceSize` substitutes
/// |L|/avgdl, kept only for side-by-side comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LengthNorm {
    #[default]
    LabelLength,
    LabelSpaceSize,
}

/// BM25 index over label texts.
#[derive(Debug, Clone)]
pub struct Bm25Index<F: Real> {
    label_ids: Vec<String>,
    label_pos: BTreeMap<String, usize>,
    /// Token frequency per label text.
    tf: Vec<BTreeMap<String, usize>>,
    /// Number of label texts containing each token.
    df: BTreeMap<String, usize>,
    label_len: Vec<usize>,
    avgdl: F,
    pub k1: F,
    pub b: F,
    pub length_norm: LengthNorm,
}

impl<F: Real> Bm25Index<F> {
    pub fn n_labels(&self) -> usize {
        self.label_ids.len()
    }

    pub fn avgdl(&self) -> F {
        self.avgdl
    }

    pub fn label_ids(&self) -> &[String] {
        &self.label_ids
    }

    /// Lucene-style non-negative IDF.
    pub fn idf(&self, token: &str) -> F {
        let n = F::from_usize_lossy(self.label_ids.len());
        let df = F::from_usize_lossy(self.df.get(token).copied().unwrap_or(0));
        let half = F::from_f64_lossy(0.5);
        ((n - df + half) / (df + half) + F::one()).ln()
    }

    /// BM25 score of a tokenized document against one indexed label. Each
    /// distinct shared token contributes once.
    pub fn score(&self, doc_tokens: &[String], label_id: &str) -> Option<F> {
        let pos = *self.label_pos.get(label_id)?;
        Some(self.score_at(doc_tokens, pos))
    }

    fn score_at(&self, doc_tokens: &[String], pos: usize) -> F {
        let tf = &self.tf[pos];
        let norm_len = match self.length_norm {
            LengthNorm::LabelLength => F::from_usize_lossy(self.label_len[pos]),
            LengthNorm::LabelSpaceSize => F::from_usize_lossy(self.label_ids.len()),
        };
        let seen: BTreeSet<&str> = doc_tokens.iter().map(String::as_str).collect();
        let mut score = F::zero();
        for token in seen {
            let Some(&freq) = tf.get(token) else { continue };
            let freq = F::from_usize_lossy(freq);
            let num = freq * (self.k1 + F::one());
            let den = freq + self.k1 * (F::one() - self.b + self.b * norm_len / self.avgdl);
            score += self.idf(token) * num / den;
        }
        score
    }
}

/// Candidate labels for one document: exact-name matches, thresholded BM25
/// matches with scores, and their union.
#[derive(Debug, Clone)]
pub struct CandidateSet<F: Real> {
    pub doc_id: String,
    pub exact: BTreeSet<String>,
    pub bm25: BTreeMap<String, F>,
}

impl<F: Real> CandidateSet<F> {
    pub fn union(&self) -> BTreeSet<String> {
        self.exact
            .iter()
            .chain(self.bm25.keys())
            .cloned()
            .collect()
    }
}

// Dump format: {"paper": str, "exact": [str], "bm25": [{"label": str, "score": float}]}
#[derive(Serialize, Deserialize)]
struct CandidateSetWire<F> {
    paper: String,
    exact: Vec<String>,
    bm25: Vec<ScoredLabel<F>>,
}

#[derive(Serialize, Deserialize)]
struct ScoredLabel<F> {
    label: String,
    score: F,
}

impl<F: Real> Serialize for CandidateSet<F> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CandidateSetWire {
            paper: self.doc_id.clone(),
            exact: self.exact.iter().cloned().collect(),
            bm25: self
                .bm25
                .iter()
                .map(|(label, &score)| ScoredLabel {
                    label: label.clone(),
                    score,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de, F: Real> Deserialize<'de> for CandidateSet<F> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = CandidateSetWire::<F>::deserialize(d)?;
        Ok(CandidateSet {
            doc_id: wire.paper,
            exact: wire.exact.into_iter().collect(),
            bm25: wire
                .bm25
                .into_iter()
                .map(|sl| (sl.label, sl.score))
                .collect(),
        })
    }
}

/// Build the BM25 index from the label space.
pub fn build_index<F: Real>(
    labels: &[Label],
    cfg: &TokenizerConfig,
    length_norm: LengthNorm,
) -> Result<Bm25Index<F>> {
    if labels.is_empty() {
        return Err(Error::Validation("empty label space".into()));
    }
    let mut label_ids = Vec::with_capacity(labels.len());
    let mut label_pos = BTreeMap::new();
    let mut tf = Vec::with_capacity(labels.len());
    let mut df: BTreeMap<String, usize> = BTreeMap::new();
    let mut label_len = Vec::with_capacity(labels.len());
    let mut total_len = 0usize;

    for label in labels {
        let tokens = label_text(label, cfg);
        let mut freqs: BTreeMap<String, usize> = BTreeMap::new();
        for token in &tokens {
            *freqs.entry(token.clone()).or_insert(0) += 1;
        }
        for token in freqs.keys() {
            *df.entry(token.clone()).or_insert(0) += 1;
        }
        total_len += tokens.len();
        label_len.push(tokens.len());
        label_pos.insert(label.label_id.clone(), label_ids.len());
        label_ids.push(label.label_id.clone());
        tf.push(freqs);
    }

    Ok(Bm25Index {
        avgdl: F::from_usize_lossy(total_len) / F::from_usize_lossy(label_ids.len()),
        label_ids,
        label_pos,
        tf,
        df,
        label_len,
        k1: F::from_f64_lossy(DEFAULT_K1),
        b: F::from_f64_lossy(DEFAULT_B),
        length_norm,
    })
}

/// Labels any of whose names occurs as a contiguous token subsequence of the
/// document's tokens.
pub fn exact_match(
    doc_tokens: &[String],
    labels: &[Label],
    cfg: &TokenizerConfig,
) -> BTreeSet<String> {
    let mut matched = BTreeSet::new();
    for label in labels {
        for name in &label.names {
            let name_tokens = crate::corpus::tokenize(name, cfg);
            if !name_tokens.is_empty() && contains_subsequence(doc_tokens, &name_tokens) {
                matched.insert(label.label_id.clone());
                break;
            }
        }
    }
    matched
}

fn contains_subsequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.len() > haystack.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}

/// Exact matches unioned with BM25 matches scoring strictly above `eta`.
pub fn retrieve<F: Real>(
    index: &Bm25Index<F>,
    doc_id: &str,
    doc_tokens: &[String],
    labels: &[Label],
    cfg: &TokenizerConfig,
    eta: F,
) -> CandidateSet<F> {
    let exact = exact_match(doc_tokens, labels, cfg);
    let mut bm25 = BTreeMap::new();
    for (pos, label_id) in index.label_ids.iter().enumerate() {
        let score = index.score_at(doc_tokens, pos);
        if score > eta {
            bm25.insert(label_id.clone(), score);
        }
    }
    CandidateSet {
        doc_id: doc_id.to_owned(),
        exact,
        bm25,
    }
}
