//! Heterogeneous network over papers, authors, and venues.
//!
//! The ten supported meta-paths/meta-graphs are realized as closed-form
//! intersection predicates over adjacency lists. Neighborhoods are computed by
//! walking inverse adjacency, never by scanning the whole corpus.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

/// The ten meta-paths/meta-graphs between two paper nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MetaPattern {
    /// `P>P`: the anchor cites the other paper.
    Cites,
    /// `P<P`: the anchor is cited by the other paper.
    CitedBy,
    /// `PAP`: at least one shared author.
    CommonAuthor,
    /// `PVP`: same (non-null) venue.
    CommonVenue,
    /// `P>P<P`: both cite at least one common paper.
    CommonReference,
    /// `P<P>P`: both are cited by at least one common paper.
    CommonCiter,
    /// `P(AA)P`: at least two shared authors.
    TwoCommonAuthors,
    /// `P(AV)P`: same venue and at least one shared author.
    CommonAuthorAndVenue,
    /// `P>(PP)<P`: both cite at least two common papers.
    TwoCommonReferences,
    /// `P<(PP)>P`: both are cited by at least two common papers.
    TwoCommonCiters,
}

impl MetaPattern {
    pub const ALL: [MetaPattern; 10] = [
        MetaPattern::Cites,
        MetaPattern::CitedBy,
        MetaPattern::CommonAuthor,
        MetaPattern::CommonVenue,
        MetaPattern::CommonReference,
        MetaPattern::CommonCiter,
        MetaPattern::TwoCommonAuthors,
        MetaPattern::CommonAuthorAndVenue,
        MetaPattern::TwoCommonReferences,
        MetaPattern::TwoCommonCiters,
    ];

    /// ASCII name used in CLI flags and pair files.
    pub fn name(&self) -> &'static str {
        match self {
            MetaPattern::Cites => "P>P",
            MetaPattern::CitedBy => "P<P",
            MetaPattern::CommonAuthor => "PAP",
            MetaPattern::CommonVenue => "PVP",
            MetaPattern::CommonReference => "P>P<P",
            MetaPattern::CommonCiter => "P<P>P",
            MetaPattern::TwoCommonAuthors => "P(AA)P",
            MetaPattern::CommonAuthorAndVenue => "P(AV)P",
            MetaPattern::TwoCommonReferences => "P>(PP)<P",
            MetaPattern::TwoCommonCiters => "P<(PP)>P",
        }
    }
}

impl fmt::Display for MetaPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetaPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetaPattern::ALL
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownPattern(s.to_owned()))
    }
}

impl Serialize for MetaPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for MetaPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One contrastive pair: `positive` is reachable from `anchor` via `pattern`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairSample {
    pub anchor: String,
    pub positive: String,
    pub pattern: MetaPattern,
}

/// Typed adjacency over papers (P), authors (A), and venues (V), with every
/// inverse maintained. Citation edges are restricted to in-corpus targets.
#[derive(Debug, Clone, Default)]
pub struct Hin {
    docs: BTreeSet<String>,
    doc_authors: BTreeMap<String, BTreeSet<String>>,
    author_docs: BTreeMap<String, BTreeSet<String>>,
    doc_venue: BTreeMap<String, String>,
    venue_docs: BTreeMap<String, BTreeSet<String>>,
    cites: BTreeMap<String, BTreeSet<String>>,
    cited_by: BTreeMap<String, BTreeSet<String>>,
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

impl Hin {
    pub fn doc_ids(&self) -> impl Iterator<Item = &String> {
        self.docs.iter()
    }

    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.docs.contains(doc_id)
    }

    pub fn authors(&self, doc_id: &str) -> &BTreeSet<String> {
        self.doc_authors.get(doc_id).unwrap_or(&EMPTY)
    }

    pub fn venue(&self, doc_id: &str) -> Option<&str> {
        self.doc_venue.get(doc_id).map(String::as_str)
    }

    pub fn cites(&self, doc_id: &str) -> &BTreeSet<String> {
        self.cites.get(doc_id).unwrap_or(&EMPTY)
    }

    pub fn cited_by(&self, doc_id: &str) -> &BTreeSet<String> {
        self.cited_by.get(doc_id).unwrap_or(&EMPTY)
    }

    pub fn author_docs(&self, author: &str) -> &BTreeSet<String> {
        self.author_docs.get(author).unwrap_or(&EMPTY)
    }

    pub fn venue_docs(&self, venue: &str) -> &BTreeSet<String> {
        self.venue_docs.get(venue).unwrap_or(&EMPTY)
    }

    pub fn n_authors(&self) -> usize {
        self.author_docs.len()
    }

    pub fn n_venues(&self) -> usize {
        self.venue_docs.len()
    }

    pub fn n_author_edges(&self) -> usize {
        self.doc_authors.values().map(BTreeSet::len).sum()
    }

    pub fn n_venue_edges(&self) -> usize {
        self.doc_venue.len()
    }

    pub fn n_citation_edges(&self) -> usize {
        self.cites.values().map(BTreeSet::len).sum()
    }

    fn check(&self, doc_id: &str) -> Result<()> {
        if self.contains(doc_id) {
            Ok(())
        } else {
            Err(Error::UnknownDoc(doc_id.to_owned()))
        }
    }

    /// Whether `d2` is reachable from `d1` via `pattern`.
    pub fn is_reachable(&self, d1: &str, d2: &str, pattern: MetaPattern) -> Result<bool> {
        self.check(d1)?;
        self.check(d2)?;
        if d1 == d2 {
            return Err(Error::Validation(
                "reachability requires two distinct documents".into(),
            ));
        }
        let shared_authors = || self.authors(d1).intersection(self.authors(d2)).count();
        let same_venue = || match (self.venue(d1), self.venue(d2)) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        };
        Ok(match pattern {
            MetaPattern::Cites => self.cites(d1).contains(d2),
            MetaPattern::CitedBy => self.cites(d2).contains(d1),
            MetaPattern::CommonAuthor => shared_authors() >= 1,
            MetaPattern::CommonVenue => same_venue(),
            MetaPattern::CommonReference => {
                !self.cites(d1).is_disjoint(self.cites(d2))
            }
            MetaPattern::CommonCiter => {
                !self.cited_by(d1).is_disjoint(self.cited_by(d2))
            }
            MetaPattern::TwoCommonAuthors => shared_authors() >= 2,
            MetaPattern::CommonAuthorAndVenue => same_venue() && shared_authors() >= 1,
            MetaPattern::TwoCommonReferences => {
                self.cites(d1).intersection(self.cites(d2)).count() >= 2
            }
            MetaPattern::TwoCommonCiters => {
                self.cited_by(d1).intersection(self.cited_by(d2)).count() >= 2
            }
        })
    }

    /// All documents reachable from `doc_id` via `pattern`, excluding itself.
    pub fn neighbors(&self, doc_id: &str, pattern: MetaPattern) -> Result<BTreeSet<String>> {
        self.check(doc_id)?;
        let mut out: BTreeSet<String> = match pattern {
            MetaPattern::Cites => self.cites(doc_id).clone(),
            MetaPattern::CitedBy => self.cited_by(doc_id).clone(),
            MetaPattern::CommonAuthor => self
                .authors(doc_id)
                .iter()
                .flat_map(|a| self.author_docs(a).iter().cloned())
                .collect(),
            MetaPattern::CommonVenue => match self.venue(doc_id) {
                Some(v) => self.venue_docs(v).clone(),
                None => BTreeSet::new(),
            },
            MetaPattern::CommonReference => self
                .cites(doc_id)
                .iter()
                .flat_map(|p| self.cited_by(p).iter().cloned())
                .collect(),
            MetaPattern::CommonCiter => self
                .cited_by(doc_id)
                .iter()
                .flat_map(|p| self.cites(p).iter().cloned())
                .collect(),
            MetaPattern::TwoCommonAuthors => at_least(
                self.authors(doc_id).iter().map(|a| self.author_docs(a)),
                2,
            ),
            MetaPattern::CommonAuthorAndVenue => {
                let by_author: BTreeSet<String> = self
                    .authors(doc_id)
                    .iter()
                    .flat_map(|a| self.author_docs(a).iter().cloned())
                    .collect();
                match self.venue(doc_id) {
                    Some(v) => {
                        let venue_docs = self.venue_docs(v);
                        by_author
                            .into_iter()
                            .filter(|d| venue_docs.contains(d))
                            .collect()
                    }
                    None => BTreeSet::new(),
                }
            }
            MetaPattern::TwoCommonReferences => {
                at_least(self.cites(doc_id).iter().map(|p| self.cited_by(p)), 2)
            }
            MetaPattern::TwoCommonCiters => {
                at_least(self.cited_by(doc_id).iter().map(|p| self.cites(p)), 2)
            }
        };
        out.remove(doc_id);
        Ok(out)
    }
}

/// Documents appearing in at least `min` of the given witness sets.
fn at_least<'a>(sets: impl Iterator<Item = &'a BTreeSet<String>>, min: usize) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for set in sets {
        for d in set {
            *counts.entry(d.as_str()).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .filter(|&(_, c)| c >= min)
        .map(|(d, _)| d.to_owned())
        .collect()
}

/// Build the network from a validated corpus. Citation edges pointing outside
/// the corpus are omitted so reachability only witnesses in-corpus structure.
pub fn build_hin(corpus: &[Document]) -> Hin {
    let mut hin = Hin::default();
    for doc in corpus {
        hin.docs.insert(doc.doc_id.clone());
    }
    for doc in corpus {
        for author in &doc.authors {
            hin.doc_authors
                .entry(doc.doc_id.clone())
                .or_default()
                .insert(author.clone());
            hin.author_docs
                .entry(author.clone())
                .or_default()
                .insert(doc.doc_id.clone());
        }
        if let Some(venue) = &doc.venue {
            hin.doc_venue.insert(doc.doc_id.clone(), venue.clone());
            hin.venue_docs
                .entry(venue.clone())
                .or_default()
                .insert(doc.doc_id.clone());
        }
        for target in &doc.references {
            if hin.docs.contains(target) && target != &doc.doc_id {
                hin.cites
                    .entry(doc.doc_id.clone())
                    .or_default()
                    .insert(target.clone());
                hin.cited_by
                    .entry(target.clone())
                    .or_default()
                    .insert(doc.doc_id.clone());
            }
        }
    }
    hin
}

pub const N_TRAIN_PAIRS_DEFAULT: usize = 50_000;
pub const N_VAL_PAIRS_DEFAULT: usize = 5_000;

/// Sample contrastive pairs: anchors uniform (with replacement) over documents
/// with a non-empty neighborhood under at least one requested pattern; per
/// anchor one eligible pattern uniform, then one positive uniform from its
/// neighborhood. Validation pairs never repeat a training pair.
pub fn sample_pairs(
    hin: &Hin,
    patterns: &[MetaPattern],
    n_train: usize,
    n_val: usize,
    seed: u64,
) -> Result<(Vec<PairSample>, Vec<PairSample>)> {
    if patterns.is_empty() {
        return Err(Error::Config("no meta-patterns requested".into()));
    }
    // Precompute neighborhoods once; sorted Vecs keep draws deterministic.
    let mut eligible: Vec<(String, Vec<(MetaPattern, Vec<String>)>)> = Vec::new();
    for doc in hin.doc_ids() {
        let mut per_pattern = Vec::new();
        for &pattern in patterns {
            let hood = hin.neighbors(doc, pattern)?;
            if !hood.is_empty() {
                per_pattern.push((pattern, hood.into_iter().collect::<Vec<_>>()));
            }
        }
        if !per_pattern.is_empty() {
            eligible.push((doc.clone(), per_pattern));
        }
    }
    if eligible.is_empty() && (n_train > 0 || n_val > 0) {
        return Err(Error::Sampling(
            "no document has any neighbor under the requested patterns".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> PairSample {
        let (anchor, per_pattern) = &eligible[rng.gen_range(0..eligible.len())];
        let (pattern, hood) = &per_pattern[rng.gen_range(0..per_pattern.len())];
        let positive = hood.choose(rng).expect("non-empty neighborhood").clone();
        PairSample {
            anchor: anchor.clone(),
            positive,
            pattern: *pattern,
        }
    };

    let train: Vec<PairSample> = (0..n_train).map(|_| draw(&mut rng)).collect();
    let train_set: std::collections::HashSet<&PairSample> = train.iter().collect();

    let mut val = Vec::with_capacity(n_val);
    let mut attempts = 0usize;
    let max_attempts = 1000 * (n_val + 1);
    while val.len() < n_val {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Sampling(
                "could not draw validation pairs disjoint from the training pairs".into(),
            ));
        }
        let pair = draw(&mut rng);
        if !train_set.contains(&pair) {
            val.push(pair);
        }
    }
    Ok((train, val))
}

/// Read pairs from JSONL.
pub fn load_pairs(path: impl AsRef<std::path::Path>) -> Result<Vec<PairSample>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    use std::io::BufRead;
    let mut pairs = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: e.to_string(),
            })?,
        );
    }
    Ok(pairs)
}

/// Write pairs to JSONL.
pub fn save_pairs(path: impl AsRef<std::path::Path>, pairs: &[PairSample]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    use std::io::Write;
    for pair in pairs {
        serde_json::to_writer(&mut out, pair).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(
        id: &str,
        authors: &[&str],
        venue: Option<&str>,
        refs: &[&str],
    ) -> Document {
        Document {
            doc_id: id.into(),
            text: String::new(),
            authors: authors.iter().map(|s| s.to_string()).collect(),
            venue: venue.map(String::from),
            references: refs.iter().map(|s| s.to_string()).collect(),
            labels: None,
        }
    }

    #[test]
    fn single_edge_and_inverse() {
        let hin = build_hin(&[doc("d1", &[], None, &["d2"]), doc("d2", &[], None, &[])]);
        assert!(hin.cites("d1").contains("d2"));
        assert!(hin.cited_by("d2").contains("d1"));
        assert!(hin.is_reachable("d1", "d2", MetaPattern::Cites).unwrap());
        assert!(hin.is_reachable("d2", "d1", MetaPattern::CitedBy).unwrap());
    }

    #[test]
    fn venue_inverse() {
        let hin = build_hin(&[doc("d1", &[], Some("WWW"), &[])]);
        assert!(hin.venue_docs("WWW").contains("d1"));
    }

    #[test]
    fn out_of_corpus_reference_omitted() {
        let hin = build_hin(&[doc("d1", &[], None, &["ghost"])]);
        assert!(hin.cites("d1").is_empty());
    }

    #[test]
    fn two_shared_authors() {
        let hin = build_hin(&[
            doc("d1", &["tomkins", "kumar"], None, &[]),
            doc("d2", &["tomkins", "kumar", "other"], None, &[]),
        ]);
        assert!(hin
            .is_reachable("d1", "d2", MetaPattern::TwoCommonAuthors)
            .unwrap());
        let hood = hin.neighbors("d1", MetaPattern::TwoCommonAuthors).unwrap();
        assert!(hood.contains("d2"));
        assert!(hin.neighbors("d1", MetaPattern::CommonAuthor).unwrap().contains("d2"));
    }

    #[test]
    fn self_pair_rejected() {
        let hin = build_hin(&[doc("d1", &[], None, &[])]);
        assert!(hin.is_reachable("d1", "d1", MetaPattern::Cites).is_err());
    }

    #[test]
    fn unknown_doc_rejected() {
        let hin = build_hin(&[doc("d1", &[], None, &[])]);
        assert!(matches!(
            hin.neighbors("nope", MetaPattern::Cites),
            Err(Error::UnknownDoc(_))
        ));
    }

    #[test]
    fn isolated_doc_has_no_neighbors() {
        let hin = build_hin(&[doc("d1", &[], None, &[]), doc("d2", &["a"], Some("v"), &[])]);
        for pattern in MetaPattern::ALL {
            assert!(hin.neighbors("d1", pattern).unwrap().is_empty(), "{pattern}");
        }
    }

    #[test]
    fn null_venue_matches_nothing() {
        let hin = build_hin(&[doc("d1", &["a"], None, &[]), doc("d2", &["a"], None, &[])]);
        assert!(!hin.is_reachable("d1", "d2", MetaPattern::CommonVenue).unwrap());
        assert!(!hin
            .is_reachable("d1", "d2", MetaPattern::CommonAuthorAndVenue)
            .unwrap());
    }

    #[test]
    fn pattern_names_roundtrip() {
        for pattern in MetaPattern::ALL {
            assert_eq!(pattern.name().parse::<MetaPattern>().unwrap(), pattern);
        }
        assert!("PXP".parse::<MetaPattern>().is_err());
    }

    #[test]
    fn forced_single_pair() {
        let hin = build_hin(&[doc("d1", &[], None, &["d2"]), doc("d2", &[], None, &[])]);
        let (train, val) = sample_pairs(&hin, &[MetaPattern::Cites], 1, 0, 0).unwrap();
        assert_eq!(val.len(), 0);
        assert_eq!(train[0].anchor, "d1");
        assert_eq!(train[0].positive, "d2");
    }

    #[test]
    fn sampling_deterministic() {
        // enough distinct (anchor, positive, pattern) tuples that a held-out
        // set disjoint from the training draws exists
        let docs: Vec<Document> = (0..8)
            .map(|i| {
                let cited = format!("d{}", (i + 1) % 8);
                doc(
                    &format!("d{i}"),
                    &[["a", "b"][i % 2]],
                    Some(["v1", "v2"][i / 4]),
                    &[cited.as_str()],
                )
            })
            .collect();
        let hin = build_hin(&docs);
        let patterns = [MetaPattern::Cites, MetaPattern::CommonAuthor];
        let s1 = sample_pairs(&hin, &patterns, 20, 5, 42).unwrap();
        let s2 = sample_pairs(&hin, &patterns, 20, 5, 42).unwrap();
        assert_eq!(s1, s2);
        // every pair re-checks against its witnessing predicate
        for pair in s1.0.iter().chain(s1.1.iter()) {
            assert!(hin
                .is_reachable(&pair.anchor, &pair.positive, pair.pattern)
                .unwrap());
        }
        // train/val disjoint
        for v in &s1.1 {
            assert!(!s1.0.contains(v));
        }
    }

    #[test]
    fn sampling_impossible() {
        let hin = build_hin(&[doc("d1", &[], None, &[]), doc("d2", &[], None, &[])]);
        assert!(matches!(
            sample_pairs(&hin, &[MetaPattern::Cites], 1, 0, 0),
            Err(Error::Sampling(_))
        ));
    }
}
