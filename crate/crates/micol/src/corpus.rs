//! Document and label loading, validation, and tokenization.
//!
//! Everything downstream consumes the token conventions defined here: text is
//! lowercased (Unicode-aware) and split on non-alphanumeric runs by default.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One document: text plus metadata. `labels` is only ever consulted by
/// evaluation and diagnostics; the training path rejects labeled corpora.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "paper")]
    pub doc_id: String,
    pub text: String,
    #[serde(rename = "author", default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: Option<String>,
    #[serde(rename = "reference", default)]
    pub references: Vec<String>,
    #[serde(rename = "label", default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<BTreeSet<String>>,
}

impl Document {
    pub fn has_labels(&self) -> bool {
        self.labels.as_ref().is_some_and(|l| !l.is_empty())
    }
}

/// A label with one or more surface names and an optional description.
/// `primary_name_index` selects the name used for BM25 label text; exact
/// matching always considers all names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    #[serde(rename = "label")]
    pub label_id: String,
    pub names: Vec<String>,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub primary_name_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub min_token_length: usize,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            strip_punctuation: true,
            min_token_length: 1,
        }
    }
}

/// What the loader saw: counts worth surfacing but not worth failing on.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LoadReport {
    pub documents: usize,
    pub self_citations_dropped: usize,
    pub dangling_references: usize,
    pub labeled_documents: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LabelLoadReport {
    pub labels: usize,
    pub empty_descriptions: usize,
}

/// Load documents from JSONL. Duplicate ids are rejected; self-citations are
/// dropped and counted; references to out-of-corpus ids are kept but counted.
pub fn load_documents(path: impl AsRef<Path>) -> Result<(Vec<Document>, LoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs: Vec<Document> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut report = LoadReport::default();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: Document = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate doc_id {:?} at {}:{}",
                doc.doc_id,
                path.display(),
                lineno + 1
            )));
        }
        let before = doc.references.len();
        let id = doc.doc_id.clone();
        doc.references.retain(|r| *r != id);
        report.self_citations_dropped += before - doc.references.len();
        if doc.has_labels() {
            report.labeled_documents += 1;
        }
        docs.push(doc);
    }

    let ids: HashSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    report.dangling_references = docs
        .iter()
        .flat_map(|d| d.references.iter())
        .filter(|r| !ids.contains(r.as_str()))
        .count();
    report.documents = docs.len();
    Ok((docs, report))
}

/// Write documents back out as JSONL (same schema the loader reads).
pub fn save_documents(path: impl AsRef<Path>, docs: &[Document]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        serde_json::to_writer(&mut out, doc).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Load and validate the label space from JSONL.
pub fn load_labels(path: impl AsRef<Path>) -> Result<(Vec<Label>, LabelLoadReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels: Vec<Label> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    let mut report = LabelLoadReport::default();
    let cfg = TokenizerConfig::default();

    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let label: Label = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno + 1,
            message: e.to_string(),
        })?;
        validate_label(&label, &cfg)?;
        if !seen.insert(label.label_id.clone()) {
            return Err(Error::Validation(format!(
                "duplicate label_id {:?} at {}:{}",
                label.label_id,
                path.display(),
                lineno + 1
            )));
        }
        if label.description.is_empty() {
            report.empty_descriptions += 1;
        }
        labels.push(label);
    }
    report.labels = labels.len();
    Ok((labels, report))
}

fn validate_label(label: &Label, cfg: &TokenizerConfig) -> Result<()> {
    if label.names.is_empty() {
        return Err(Error::Validation(format!(
            "label {:?} has no names",
            label.label_id
        )));
    }
    if label.primary_name_index >= label.names.len() {
        return Err(Error::Validation(format!(
            "label {:?}: primary_name_index {} out of range",
            label.label_id, label.primary_name_index
        )));
    }
    for name in &label.names {
        if tokenize(name, cfg).is_empty() {
            return Err(Error::Validation(format!(
                "label {:?}: name {:?} is empty after normalization",
                label.label_id, name
            )));
        }
    }
    Ok(())
}

/// Deterministic tokenization: lowercase, split on non-alphanumeric runs,
/// drop tokens shorter than `min_token_length` characters.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let lowered;
    let text = if cfg.lowercase {
        lowered = text.to_lowercase();
        &lowered
    } else {
        text
    };
    let parts: Vec<&str> = if cfg.strip_punctuation {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|s| !s.is_empty())
            .collect()
    } else {
        text.split_whitespace().collect()
    };
    parts
        .into_iter()
        .filter(|t| t.chars().count() >= cfg.min_token_length)
        .map(str::to_owned)
        .collect()
}

/// Label text for sparse retrieval: primary name followed by description.
pub fn label_text(label: &Label, cfg: &TokenizerConfig) -> Vec<String> {
    let mut tokens = tokenize(&label.names[label.primary_name_index], cfg);
    tokens.extend(tokenize(&label.description, cfg));
    tokens
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    #[test]
    fn tokenize_defaults() {
        let cfg = TokenizerConfig::default();
        assert_eq!(tokenize("Web-Graph Mining!", &cfg), ["web", "graph", "mining"]);
        assert_eq!(tokenize("", &cfg), Vec::<String>::new());
        assert_eq!(tokenize("A a A", &cfg), ["a", "a", "a"]);
    }

    #[test]
    fn tokenize_min_length() {
        let cfg = TokenizerConfig {
            min_token_length: 3,
            ..Default::default()
        };
        assert_eq!(tokenize("a bb ccc dddd", &cfg), ["ccc", "dddd"]);
    }

    #[test]
    fn load_documents_maps_fields() {
        let f = write_lines(&[
            r#"{"paper":"d1","text":"web graphs","author":["a1"],"venue":"v1","reference":["d2"]}"#,
        ]);
        let (docs, report) = load_documents(f.path()).unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].doc_id, "d1");
        assert_eq!(docs[0].authors, ["a1"]);
        assert_eq!(docs[0].venue.as_deref(), Some("v1"));
        assert_eq!(docs[0].references, ["d2"]);
        assert_eq!(report.dangling_references, 1);
    }

    #[test]
    fn load_documents_empty_file() {
        let f = write_lines(&[]);
        let (docs, _) = load_documents(f.path()).unwrap();
        assert!(docs.is_empty());
    }

    #[test]
    fn load_documents_duplicate_id() {
        let f = write_lines(&[
            r#"{"paper":"d1","text":"x"}"#,
            r#"{"paper":"d1","text":"y"}"#,
        ]);
        let err = load_documents(f.path()).unwrap_err();
        assert!(err.to_string().contains("d1"), "{err}");
    }

    #[test]
    fn load_documents_malformed_line_reports_number() {
        let f = write_lines(&[r#"{"paper":"d1","text":"x"}"#, "not json"]);
        let err = load_documents(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn self_citations_dropped() {
        let f = write_lines(&[r#"{"paper":"d1","text":"x","reference":["d1","d2"]}"#]);
        let (docs, report) = load_documents(f.path()).unwrap();
        assert_eq!(docs[0].references, ["d2"]);
        assert_eq!(report.self_citations_dropped, 1);
    }

    #[test]
    fn document_roundtrip() {
        let f = write_lines(&[
            r#"{"paper":"d1","text":"x","author":["a"],"venue":"v","reference":["d2"],"label":["l1"]}"#,
            r#"{"paper":"d2","text":"y"}"#,
        ]);
        let (docs, _) = load_documents(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_documents(out.path(), &docs).unwrap();
        let (docs2, _) = load_documents(out.path()).unwrap();
        assert_eq!(docs, docs2);
    }

    #[test]
    fn load_labels_multi_name() {
        let f = write_lines(&[
            r#"{"label":"webgraph","names":["Webgraph"],"description":"A graph whose nodes are web pages"}"#,
            r#"{"label":"beta","names":["Betacoronavirus","β-Coronavirus"],"description":"a genus"}"#,
        ]);
        let (labels, report) = load_labels(f.path()).unwrap();
        assert_eq!(labels[0].names.len(), 1);
        assert_eq!(labels[1].names.len(), 2);
        assert_eq!(report.empty_descriptions, 0);
    }

    #[test]
    fn load_labels_missing_names() {
        let f = write_lines(&[r#"{"label":"x","description":"d"}"#]);
        assert!(load_labels(f.path()).is_err());
    }

    #[test]
    fn label_text_concatenates() {
        let cfg = TokenizerConfig::default();
        let l = Label {
            label_id: "webgraph".into(),
            names: vec!["Webgraph".into()],
            description: "graph of web pages".into(),
            primary_name_index: 0,
        };
        assert_eq!(label_text(&l, &cfg), ["webgraph", "graph", "of", "web", "pages"]);
    }

    #[test]
    fn label_text_empty_description_and_primary_only() {
        let cfg = TokenizerConfig::default();
        let l = Label {
            label_id: "beta".into(),
            names: vec!["MeSH Heading".into(), "Entry Term".into()],
            description: String::new(),
            primary_name_index: 0,
        };
        assert_eq!(label_text(&l, &cfg), ["mesh", "heading"]);
    }
}
