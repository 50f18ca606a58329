//! Two-stage inference: retrieve candidate labels, re-rank with the trained
//! scorer, return the top-k.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{label_text, tokenize, Document, Label, TokenizerConfig};
use crate::encoder::EncoderParams;
use crate::error::{Error, Result};
use crate::retrieval::{retrieve, Bm25Index};
use crate::training::Arch;
use crate::Real;

/// Ordered candidate labels for one document. `shortfall` records how many
/// positions short of `k` the candidate set fell.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPrediction<F: Real> {
    pub doc_id: String,
    pub ranked: Vec<(String, F)>,
    pub shortfall: usize,
}

#[derive(Serialize, Deserialize)]
struct RankedPredictionWire<F> {
    paper: String,
    ranked: Vec<RankedEntry<F>>,
    shortfall: usize,
}

#[derive(Serialize, Deserialize)]
struct RankedEntry<F> {
    label: String,
    score: F,
}

impl<F: Real> Serialize for RankedPrediction<F> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RankedPredictionWire {
            paper: self.doc_id.clone(),
            ranked: self
                .ranked
                .iter()
                .map(|(label, score)| RankedEntry {
                    label: label.clone(),
                    score: *score,
                })
                .collect(),
            shortfall: self.shortfall,
        }
        .serialize(s)
    }
}

impl<'de, F: Real> Deserialize<'de> for RankedPrediction<F> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = RankedPredictionWire::<F>::deserialize(d)?;
        Ok(RankedPrediction {
            doc_id: wire.paper,
            ranked: wire.ranked.into_iter().map(|e| (e.label, e.score)).collect(),
            shortfall: wire.shortfall,
        })
    }
}

/// Sort (label, score) pairs by descending score, ties broken by ascending
/// label id, and truncate to `k`.
pub fn rank_top_k<F: Real>(mut scored: Vec<(String, F)>, k: usize) -> (Vec<(String, F)>, usize) {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let shortfall = k.saturating_sub(scored.len());
    scored.truncate(k);
    (scored, shortfall)
}

/// Retrieve candidates for one document and re-rank them with the trained
/// scorer. Documents with empty candidate sets yield an empty ranking.
pub fn predict<F: Real>(
    params: &EncoderParams<F>,
    arch: Arch,
    index: &Bm25Index<F>,
    labels: &[Label],
    doc: &Document,
    k: usize,
    eta: F,
    tok_cfg: &TokenizerConfig,
) -> Result<RankedPrediction<F>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let doc_tokens = tokenize(&doc.text, tok_cfg);
    let candidates = retrieve(index, &doc.doc_id, &doc_tokens, labels, tok_cfg, eta).union();
    let label_by_id: BTreeMap<&str, &Label> =
        labels.iter().map(|l| (l.label_id.as_str(), l)).collect();

    let mut scored = Vec::with_capacity(candidates.len());
    for label_id in candidates {
        let label = label_by_id
            .get(label_id.as_str())
            .ok_or_else(|| Error::Validation(format!("candidate {label_id:?} not in label space")))?;
        let lt = label_text(label, tok_cfg);
        let score = match arch {
            Arch::Bi => params.bi_score(&doc_tokens, &lt),
            Arch::Cross => params.cross_score(&doc_tokens, &lt),
        };
        scored.push((label_id, score));
    }
    let (ranked, shortfall) = rank_top_k(scored, k);
    Ok(RankedPrediction {
        doc_id: doc.doc_id.clone(),
        ranked,
        shortfall,
    })
}

/// Elementwise [`predict`], parallel over documents, input order preserved.
#[allow(clippy::too_many_arguments)]
pub fn predict_batch<F: Real>(
    params: &EncoderParams<F>,
    arch: Arch,
    index: &Bm25Index<F>,
    labels: &[Label],
    docs: &[Document],
    k: usize,
    eta: F,
    tok_cfg: &TokenizerConfig,
) -> Result<Vec<RankedPrediction<F>>> {
    docs.par_iter()
        .map(|doc| predict(params, arch, index, labels, doc, k, eta, tok_cfg))
        .collect()
}

pub fn load_predictions<F: Real>(path: impl AsRef<Path>) -> Result<Vec<RankedPrediction<F>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    use std::io::BufRead;
    let mut preds = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        preds.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?);
    }
    Ok(preds)
}

pub fn save_predictions<F: Real>(
    path: impl AsRef<Path>,
    preds: &[RankedPrediction<F>],
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    use std::io::Write;
    for pred in preds {
        serde_json::to_writer(&mut out, pred).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
