//! Planted-cluster synthetic corpus generator.
//!
//! Labels are grouped into clusters. Each document gets a primary label (and
//! sometimes a second label from the same cluster), authors drawn from a
//! per-label pool, a venue drawn uniformly at random, and citations to earlier
//! documents in the same cluster. Consequences, by construction:
//!
//! - `PAP` pairs always share a label (author pools never cross labels), while
//!   `PVP` pairs are label-agnostic (venues are global), so the divergence
//!   diagnostic separates the two.
//! - Test documents carry the discriminative signal only as a *repeated*
//!   document-side token that never occurs in any label text. First-stage
//!   BM25 sees the shared cluster token only and ties across the cluster's
//!   labels; an encoder can beat it only by learning, from training documents
//!   that carry both the document-side and the label-side signal tokens, that
//!   the two co-occur.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Label};
use crate::error::{Error, Result};

/// Size of the shared filler vocabulary. Large enough that two documents
/// rarely overlap much in filler, which keeps same-label documents distinct:
/// if they were near-duplicates the contrastive loss would saturate at
/// initialization and the only surviving gradient (from occasional in-batch
/// same-label collisions) would amplify the filler instead of the signal.
const NOISE_VOCAB: usize = 200;
/// Filler tokens per document.
const NOISE_PER_DOC: usize = 10;
/// Repetitions of the document-side signal token for the primary label.
const PRIMARY_REPS: usize = 3;
/// Repetitions for the optional second label.
const SECONDARY_REPS: usize = 2;
/// Repetitions of the label-side signal token in training documents.
const BRIDGE_REPS: usize = 2;
/// Probability of a second label from the same cluster.
const SECOND_LABEL_PROB: f64 = 0.3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub n_labels: usize,
    pub n_clusters: usize,
    pub n_venues: usize,
    /// Fraction of documents held out as the labeled test split.
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_docs: 500,
            n_labels: 20,
            n_clusters: 5,
            n_venues: 10,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(Error::Config("need at least 2 clusters".into()));
        }
        if self.n_labels % self.n_clusters != 0 || self.n_labels / self.n_clusters < 2 {
            return Err(Error::Config(
                "n_labels must be a multiple of n_clusters with at least 2 labels per cluster"
                    .into(),
            ));
        }
        if self.n_venues < 2 {
            return Err(Error::Config("need at least 2 venues".into()));
        }
        if self.n_docs < 4 * self.n_labels {
            return Err(Error::Config(
                "need at least 4 documents per label for stable splits".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config("test_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Generated corpus: an unlabeled training split, the same split with its
/// hidden labels attached (for diagnostics and propensity fitting only), a
/// labeled test split, and the label space.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub train: Vec<Document>,
    pub train_truth: Vec<Document>,
    pub test: Vec<Document>,
    pub labels: Vec<Label>,
}

fn label_id(l: usize) -> String {
    format!("l{l:02}")
}

fn doc_signal(l: usize) -> String {
    format!("word{l:02}")
}

fn label_signal(l: usize) -> String {
    format!("sig{l:02}")
}

fn topic(c: usize) -> String {
    format!("topic{c:02}")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let per_cluster = cfg.n_labels / cfg.n_clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let labels: Vec<Label> = (0..cfg.n_labels)
        .map(|l| Label {
            label_id: label_id(l),
            names: vec![format!("{} kind{l:02}", topic(l / per_cluster))],
            description: format!("{0} {0} {0}", label_signal(l)),
            primary_name_index: 0,
        })
        .collect();

    let mut out = SynthCorpus {
        train: Vec::new(),
        train_truth: Vec::new(),
        test: Vec::new(),
        labels,
    };
    let mut cluster_docs: Vec<Vec<String>> = vec![Vec::new(); cfg.n_clusters];

    for i in 0..cfg.n_docs {
        let doc_id = format!("doc{i:04}");
        let primary = rng.gen_range(0..cfg.n_labels);
        let cluster = primary / per_cluster;
        let is_test = rng.gen_bool(cfg.test_fraction);

        let mut doc_labels = vec![primary];
        if rng.gen_bool(SECOND_LABEL_PROB) {
            let base = cluster * per_cluster;
            let second = base + rng.gen_range(0..per_cluster);
            if second != primary {
                doc_labels.push(second);
            }
        }

        let pool: Vec<String> = (0..3).map(|j| format!("a{primary:02}n{j}")).collect();
        let authors: Vec<String> = pool.choose_multiple(&mut rng, 2).cloned().collect();
        let venue = format!("venue{:02}", rng.gen_range(0..cfg.n_venues));
        let n_refs = rng.gen_range(0..=3).min(cluster_docs[cluster].len());
        let references: Vec<String> = cluster_docs[cluster]
            .choose_multiple(&mut rng, n_refs)
            .cloned()
            .collect();

        let mut tokens = vec![topic(cluster)];
        for (pos, &l) in doc_labels.iter().enumerate() {
            let reps = if pos == 0 { PRIMARY_REPS } else { SECONDARY_REPS };
            tokens.extend(std::iter::repeat(doc_signal(l)).take(reps));
            if !is_test {
                tokens.extend(std::iter::repeat(label_signal(l)).take(BRIDGE_REPS));
            }
        }
        for _ in 0..NOISE_PER_DOC {
            tokens.push(format!("n{:03}", rng.gen_range(0..NOISE_VOCAB)));
        }

        let labeled = Document {
            doc_id: doc_id.clone(),
            text: tokens.join(" "),
            authors,
            venue: Some(venue),
            references,
            labels: Some(doc_labels.iter().map(|&l| label_id(l)).collect()),
        };
        cluster_docs[cluster].push(doc_id);
        if is_test {
            out.test.push(labeled);
        } else {
            out.train.push(Document {
                labels: None,
                ..labeled.clone()
            });
            out.train_truth.push(labeled);
        }
    }

    if out.train.is_empty() || out.test.is_empty() {
        return Err(Error::Config(
            "degenerate split: one side is empty; adjust n_docs or test_fraction".into(),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn seeds_differ() {
        let a = generate(&SynthConfig::default()).unwrap();
        let b = generate(&SynthConfig {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        assert_ne!(a.train, b.train);
    }

    #[test]
    fn split_shapes_and_label_space() {
        let cfg = SynthConfig::default();
        let c = generate(&cfg).unwrap();
        assert_eq!(c.train.len() + c.test.len(), cfg.n_docs);
        assert_eq!(c.train.len(), c.train_truth.len());
        assert_eq!(c.labels.len(), cfg.n_labels);

        let ids: BTreeSet<&str> = c
            .train
            .iter()
            .chain(&c.test)
            .map(|d| d.doc_id.as_str())
            .collect();
        assert_eq!(ids.len(), cfg.n_docs);

        assert!(c.train.iter().all(|d| !d.has_labels()));
        assert!(c.train_truth.iter().all(Document::has_labels));
        assert!(c.test.iter().all(Document::has_labels));
        for (plain, truth) in c.train.iter().zip(&c.train_truth) {
            assert_eq!(plain.doc_id, truth.doc_id);
            assert_eq!(plain.text, truth.text);
        }
    }

    #[test]
    fn test_docs_carry_no_label_side_signal() {
        let c = generate(&SynthConfig::default()).unwrap();
        assert!(c.test.iter().all(|d| !d.text.contains("sig")));
        assert!(c.train.iter().all(|d| d.text.contains("sig")));
    }

    #[test]
    fn metadata_stays_within_cluster() {
        let cfg = SynthConfig::default();
        let per_cluster = cfg.n_labels / cfg.n_clusters;
        let c = generate(&cfg).unwrap();
        let cluster_of = |d: &Document| -> usize {
            let labels = d.labels.as_ref().unwrap();
            let clusters: BTreeSet<usize> = labels
                .iter()
                .map(|l| l[1..].parse::<usize>().unwrap() / per_cluster)
                .collect();
            assert_eq!(clusters.len(), 1, "labels cross clusters in {}", d.doc_id);
            *clusters.first().unwrap()
        };
        let by_id: std::collections::BTreeMap<&str, usize> = c
            .train_truth
            .iter()
            .chain(&c.test)
            .map(|d| (d.doc_id.as_str(), cluster_of(d)))
            .collect();
        for d in c.train_truth.iter().chain(&c.test) {
            for r in &d.references {
                assert_eq!(by_id[r.as_str()], by_id[d.doc_id.as_str()]);
            }
        }
    }

    #[test]
    fn author_pools_imply_shared_labels() {
        // any two documents sharing an author share their primary label
        let c = generate(&SynthConfig::default()).unwrap();
        let all: Vec<&Document> = c.train_truth.iter().chain(&c.test).collect();
        for (i, a) in all.iter().enumerate() {
            for b in &all[i + 1..] {
                let shared = a.authors.iter().any(|x| b.authors.contains(x));
                if shared {
                    let la = a.labels.as_ref().unwrap();
                    let lb = b.labels.as_ref().unwrap();
                    assert!(!la.is_disjoint(lb), "{} / {}", a.doc_id, b.doc_id);
                }
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            SynthConfig {
                n_clusters: 1,
                ..Default::default()
            },
            SynthConfig {
                n_labels: 21,
                ..Default::default()
            },
            SynthConfig {
                n_docs: 10,
                ..Default::default()
            },
            SynthConfig {
                test_fraction: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(generate(&cfg).is_err());
        }
    }
}
