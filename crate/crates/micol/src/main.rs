//! `micol` — zero-shot multi-label classification pipeline as subcommands.
//!
//! Every stage reads and writes JSON/JSONL artifacts, so any stage can be
//! rerun or swapped in isolation. Flags may also be supplied through a TOML
//! config file (`--config`, sections named after subcommands) and selected
//! flags through `MICOL_*` environment variables; precedence is
//! flag > environment > config file > built-in default.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use micol::corpus::{self, TokenizerConfig};
use micol::diagnostics;
use micol::encoder::{DEFAULT_DIM, DEFAULT_MAX_LEN};
use micol::error::{Error, Result};
use micol::evaluation::{self, GroundTruth, DEFAULT_KS};
use micol::hin::{self, MetaPattern, N_TRAIN_PAIRS_DEFAULT, N_VAL_PAIRS_DEFAULT};
use micol::inference;
use micol::retrieval::{self, LengthNorm, DEFAULT_ETA};
use micol::synth::{self, SynthConfig};
use micol::training::{self, Arch, DEFAULT_BATCH_BI, DEFAULT_BATCH_CROSS, DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_TAU};
use micol::{EncoderParams, PropensityModel, Scalar, TrainConfig};

#[derive(Parser, Debug)]
#[command(name = "micol", version, about = "Zero-shot multi-label text classification: metadata-induced contrastive training, retrieve-then-rerank inference, propensity-scored evaluation")]
struct Cli {
    /// TOML config file; sections mirror subcommand flags
    #[arg(long, global = true, env = "MICOL_CONFIG")]
    config: Option<PathBuf>,

    /// worker threads for document-parallel stages [default: all cores]
    #[arg(long, global = true, env = "MICOL_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate the planted-cluster synthetic corpus
    Synth(SynthArgs),
    /// Validate a document corpus (and optionally a label space)
    Ingest(IngestArgs),
    /// Build the paper/author/venue network and report its shape
    BuildHin(BuildHinArgs),
    /// Sample contrastive document pairs via meta-path reachability
    SamplePairs(SamplePairsArgs),
    /// Contrastively train the relevance scorer on sampled pairs
    Train(TrainArgs),
    /// Retrieve candidate labels and re-rank them with a trained scorer
    Predict(PredictArgs),
    /// Score predictions with rank-based and propensity-scored metrics
    Evaluate(EvaluateArgs),
    /// Measure how well each meta-path's pairs track label overlap
    Diagnose(DiagnoseArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// output directory for train/train_truth/test/labels files
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// number of documents [default: 500]
    #[arg(long)]
    n_docs: Option<usize>,
    /// number of labels [default: 20]
    #[arg(long)]
    n_labels: Option<usize>,
    /// number of label clusters [default: 5]
    #[arg(long)]
    n_clusters: Option<usize>,
    /// number of venues [default: 10]
    #[arg(long)]
    n_venues: Option<usize>,
    /// fraction of documents held out as the test split [default: 0.2]
    #[arg(long)]
    test_fraction: Option<f64>,
    /// RNG seed [default: 0]
    #[arg(long, env = "MICOL_SEED")]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// document corpus, JSONL
    #[arg(long)]
    docs: Option<PathBuf>,
    /// label space, JSONL
    #[arg(long)]
    labels: Option<PathBuf>,
    /// also write the load report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildHinArgs {
    /// document corpus, JSONL
    #[arg(long)]
    docs: Option<PathBuf>,
    /// also write the network statistics here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SamplePairsArgs {
    /// document corpus, JSONL
    #[arg(long)]
    docs: Option<PathBuf>,
    /// comma-separated meta-pattern names [default: all 10]
    #[arg(long, value_delimiter = ',')]
    patterns: Option<Vec<String>>,
    /// training pairs to draw [default: 50000]
    #[arg(long)]
    n_train: Option<usize>,
    /// validation pairs to draw, disjoint from training [default: 5000]
    #[arg(long)]
    n_val: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long, env = "MICOL_SEED")]
    seed: Option<u64>,
    /// output JSONL for training pairs
    #[arg(long)]
    train_out: Option<PathBuf>,
    /// output JSONL for validation pairs
    #[arg(long)]
    val_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// unlabeled document corpus, JSONL
    #[arg(long)]
    docs: Option<PathBuf>,
    /// training pairs, JSONL
    #[arg(long)]
    pairs: Option<PathBuf>,
    /// held-out pairs for per-epoch validation loss, JSONL
    #[arg(long)]
    val_pairs: Option<PathBuf>,
    /// scorer architecture [default: bi]
    #[arg(long, value_enum)]
    arch: Option<Arch>,
    /// softmax temperature tau, bi only [default: 0.05]
    #[arg(long)]
    tau: Option<f64>,
    /// batch size beta [default: 8 for bi, 4 for cross]
    #[arg(long)]
    batch: Option<usize>,
    /// training epochs [default: 3]
    #[arg(long)]
    epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// RNG seed [default: 0]
    #[arg(long, env = "MICOL_SEED")]
    seed: Option<u64>,
    /// encoding dimension [default: 64]
    #[arg(long)]
    dim: Option<usize>,
    /// per-side token truncation length [default: 256]
    #[arg(long)]
    max_len: Option<usize>,
    /// checkpoint output path (JSON)
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// also write the training report here
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// documents to classify, JSONL
    #[arg(long)]
    docs: Option<PathBuf>,
    /// label space, JSONL
    #[arg(long)]
    labels: Option<PathBuf>,
    /// trained checkpoint (JSON)
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// scorer architecture; must match the checkpoint's training [default: bi]
    #[arg(long, value_enum)]
    arch: Option<Arch>,
    /// number of labels to return per document [default: 5]
    #[arg(long)]
    topk: Option<usize>,
    /// BM25 score threshold for candidate retrieval [default: 400]
    #[arg(long, env = "MICOL_ETA")]
    eta: Option<f64>,
    /// BM25 length normalizer: label-length or label-space [default: label-length]
    #[arg(long)]
    length_norm: Option<String>,
    /// output predictions, JSONL
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// predictions, JSONL
    #[arg(long)]
    pred: Option<PathBuf>,
    /// labeled test documents, JSONL
    #[arg(long)]
    truth: Option<PathBuf>,
    /// labeled training documents for propensity fitting; omitted = uniform propensities
    #[arg(long)]
    train_truth: Option<PathBuf>,
    /// comma-separated cutoffs [default: 1,3,5]
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// also write the metrics report here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// labeled diagnostic documents, JSONL
    #[arg(long)]
    truth: Option<PathBuf>,
    /// comma-separated meta-pattern names [default: all 10]
    #[arg(long, value_delimiter = ',')]
    pattern: Option<Vec<String>>,
    /// also write the divergence report here
    #[arg(long)]
    out: Option<PathBuf>,
}

/// TOML file mirror of the flags; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    tokenizer: TokenizerConfig,
    synth: SynthSection,
    ingest: IngestSection,
    build_hin: BuildHinSection,
    sample_pairs: SamplePairsSection,
    train: TrainSection,
    predict: PredictSection,
    evaluate: EvaluateSection,
    diagnose: DiagnoseSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SynthSection {
    out_dir: Option<PathBuf>,
    n_docs: Option<usize>,
    n_labels: Option<usize>,
    n_clusters: Option<usize>,
    n_venues: Option<usize>,
    test_fraction: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestSection {
    docs: Option<PathBuf>,
    labels: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BuildHinSection {
    docs: Option<PathBuf>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SamplePairsSection {
    docs: Option<PathBuf>,
    patterns: Option<Vec<String>>,
    n_train: Option<usize>,
    n_val: Option<usize>,
    seed: Option<u64>,
    train_out: Option<PathBuf>,
    val_out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    docs: Option<PathBuf>,
    pairs: Option<PathBuf>,
    val_pairs: Option<PathBuf>,
    arch: Option<Arch>,
    tau: Option<f64>,
    batch: Option<usize>,
    epochs: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    dim: Option<usize>,
    max_len: Option<usize>,
    ckpt: Option<PathBuf>,
    report: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PredictSection {
    docs: Option<PathBuf>,
    labels: Option<PathBuf>,
    ckpt: Option<PathBuf>,
    arch: Option<Arch>,
    topk: Option<usize>,
    eta: Option<f64>,
    length_norm: Option<String>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvaluateSection {
    pred: Option<PathBuf>,
    truth: Option<PathBuf>,
    train_truth: Option<PathBuf>,
    k: Option<Vec<usize>>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DiagnoseSection {
    truth: Option<PathBuf>,
    pattern: Option<Vec<String>>,
    out: Option<PathBuf>,
}

fn require<T>(value: Option<T>, what: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required {what} (flag or config file)")))
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn parse_patterns(names: Option<Vec<String>>) -> Result<Vec<MetaPattern>> {
    match names {
        None => Ok(MetaPattern::ALL.to_vec()),
        Some(names) => names.iter().map(|s| s.trim().parse()).collect(),
    }
}

fn parse_length_norm(name: Option<String>) -> Result<LengthNorm> {
    match name.as_deref() {
        None | Some("label-length") => Ok(LengthNorm::LabelLength),
        Some("label-space") => Ok(LengthNorm::LabelSpaceSize),
        Some(other) => Err(Error::Config(format!(
            "unknown length normalizer {other:?}; expected label-length or label-space"
        ))),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Validation(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Error::Validation(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    print_json(value)?;
    if let Some(path) = out {
        write_json(path, value)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs, file: SynthSection) -> Result<()> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_docs: args.n_docs.or(file.n_docs).unwrap_or(defaults.n_docs),
        n_labels: args.n_labels.or(file.n_labels).unwrap_or(defaults.n_labels),
        n_clusters: args
            .n_clusters
            .or(file.n_clusters)
            .unwrap_or(defaults.n_clusters),
        n_venues: args.n_venues.or(file.n_venues).unwrap_or(defaults.n_venues),
        test_fraction: args
            .test_fraction
            .or(file.test_fraction)
            .unwrap_or(defaults.test_fraction),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    let out_dir = require(args.out_dir.or(file.out_dir), "--out-dir")?;
    let data = synth::generate(&cfg)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    corpus::save_documents(out_dir.join("train.jsonl"), &data.train)?;
    corpus::save_documents(out_dir.join("train_truth.jsonl"), &data.train_truth)?;
    corpus::save_documents(out_dir.join("test.jsonl"), &data.test)?;
    save_labels(&out_dir.join("labels.jsonl"), &data.labels)?;

    print_json(&serde_json::json!({
        "out_dir": out_dir,
        "train_docs": data.train.len(),
        "test_docs": data.test.len(),
        "labels": data.labels.len(),
        "seed": cfg.seed,
    }))
}

fn save_labels(path: &Path, labels: &[corpus::Label]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for label in labels {
        serde_json::to_writer(&mut out, label).map_err(|e| Error::Validation(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

fn cmd_ingest(args: IngestArgs, file: IngestSection) -> Result<()> {
    let docs_path = require(args.docs.or(file.docs), "--docs")?;
    let (_, doc_report) = corpus::load_documents(&docs_path)?;
    let label_report = match args.labels.or(file.labels) {
        Some(path) => Some(corpus::load_labels(path)?.1),
        None => None,
    };
    emit(
        &serde_json::json!({ "documents": doc_report, "labels": label_report }),
        args.out.or(file.out).as_deref(),
    )
}

fn cmd_build_hin(args: BuildHinArgs, file: BuildHinSection) -> Result<()> {
    let docs_path = require(args.docs.or(file.docs), "--docs")?;
    let (docs, _) = corpus::load_documents(&docs_path)?;
    let net = hin::build_hin(&docs);
    emit(
        &serde_json::json!({
            "papers": net.n_docs(),
            "authors": net.n_authors(),
            "venues": net.n_venues(),
            "author_edges": net.n_author_edges(),
            "venue_edges": net.n_venue_edges(),
            "citation_edges": net.n_citation_edges(),
        }),
        args.out.or(file.out).as_deref(),
    )
}

fn cmd_sample_pairs(args: SamplePairsArgs, file: SamplePairsSection) -> Result<()> {
    let docs_path = require(args.docs.or(file.docs), "--docs")?;
    let train_out = require(args.train_out.or(file.train_out), "--train-out")?;
    let val_out = args.val_out.or(file.val_out);
    let patterns = parse_patterns(args.patterns.or(file.patterns))?;
    let n_train = args.n_train.or(file.n_train).unwrap_or(N_TRAIN_PAIRS_DEFAULT);
    let n_val = args.n_val.or(file.n_val).unwrap_or(N_VAL_PAIRS_DEFAULT);
    let seed = args.seed.or(file.seed).unwrap_or(0);

    if n_val > 0 && val_out.is_none() {
        return Err(Error::Config("--val-out required when n_val > 0".into()));
    }
    let (docs, _) = corpus::load_documents(&docs_path)?;
    let net = hin::build_hin(&docs);
    let (train, val) = hin::sample_pairs(&net, &patterns, n_train, n_val, seed)?;
    hin::save_pairs(&train_out, &train)?;
    if let Some(val_out) = &val_out {
        hin::save_pairs(val_out, &val)?;
    }
    print_json(&serde_json::json!({
        "train_pairs": train.len(),
        "val_pairs": val.len(),
        "patterns": patterns.iter().map(|p| p.name()).collect::<Vec<_>>(),
        "seed": seed,
        "train_out": train_out,
        "val_out": val_out,
    }))
}

fn cmd_train(args: TrainArgs, file: TrainSection, tok_cfg: &TokenizerConfig) -> Result<()> {
    let docs_path = require(args.docs.or(file.docs), "--docs")?;
    let pairs_path = require(args.pairs.or(file.pairs), "--pairs")?;
    let ckpt_path = require(args.ckpt.or(file.ckpt), "--ckpt")?;
    let arch = args.arch.or(file.arch).unwrap_or(Arch::Bi);

    let mut cfg = TrainConfig::new(arch);
    cfg.tau = args.tau.or(file.tau).unwrap_or(DEFAULT_TAU);
    cfg.batch = args.batch.or(file.batch).unwrap_or(match arch {
        Arch::Bi => DEFAULT_BATCH_BI,
        Arch::Cross => DEFAULT_BATCH_CROSS,
    });
    cfg.epochs = args.epochs.or(file.epochs).unwrap_or(DEFAULT_EPOCHS);
    cfg.lr = args.lr.or(file.lr).unwrap_or(DEFAULT_LR);
    cfg.seed = args.seed.or(file.seed).unwrap_or(0);
    cfg.dim = args.dim.or(file.dim).unwrap_or(DEFAULT_DIM);
    cfg.max_len = args.max_len.or(file.max_len).unwrap_or(DEFAULT_MAX_LEN);

    let (docs, _) = corpus::load_documents(&docs_path)?;
    let train_pairs = hin::load_pairs(&pairs_path)?;
    let val_pairs = match args.val_pairs.or(file.val_pairs) {
        Some(path) => hin::load_pairs(path)?,
        None => Vec::new(),
    };

    let (params, mut report) = training::train(&docs, &train_pairs, &val_pairs, &cfg, tok_cfg)?;
    params.save_checkpoint(&ckpt_path)?;
    report.checkpoint = Some(ckpt_path.display().to_string());
    if let Some(path) = args.report.or(file.report) {
        write_json(&path, &report)?;
    }
    print_json(&report)
}

fn cmd_predict(args: PredictArgs, file: PredictSection, tok_cfg: &TokenizerConfig) -> Result<()> {
    let docs_path = require(args.docs.or(file.docs), "--docs")?;
    let labels_path = require(args.labels.or(file.labels), "--labels")?;
    let ckpt_path = require(args.ckpt.or(file.ckpt), "--ckpt")?;
    let out_path = require(args.out.or(file.out), "--out")?;
    let arch = args.arch.or(file.arch).unwrap_or(Arch::Bi);
    let topk = args.topk.or(file.topk).unwrap_or(5);
    let eta = args.eta.or(file.eta).unwrap_or(DEFAULT_ETA);
    let length_norm = parse_length_norm(args.length_norm.or(file.length_norm))?;

    let (docs, _) = corpus::load_documents(&docs_path)?;
    let (labels, _) = corpus::load_labels(&labels_path)?;
    let params = EncoderParams::load_checkpoint(&ckpt_path)?;
    let index = retrieval::build_index::<Scalar>(&labels, tok_cfg, length_norm)?;

    let preds = inference::predict_batch(&params, arch, &index, &labels, &docs, topk, eta, tok_cfg)?;
    inference::save_predictions(&out_path, &preds)?;
    print_json(&serde_json::json!({
        "documents": preds.len(),
        "topk": topk,
        "eta": eta,
        "arch": arch.to_string(),
        "short_candidate_docs": preds.iter().filter(|p| p.shortfall > 0).count(),
        "out": out_path,
    }))
}

fn cmd_evaluate(args: EvaluateArgs, file: EvaluateSection) -> Result<()> {
    let pred_path = require(args.pred.or(file.pred), "--pred")?;
    let truth_path = require(args.truth.or(file.truth), "--truth")?;
    let ks = args.k.or(file.k).unwrap_or_else(|| DEFAULT_KS.to_vec());

    let preds = inference::load_predictions::<Scalar>(&pred_path)?;
    let (truth_docs, _) = corpus::load_documents(&truth_path)?;
    let truth = GroundTruth::from_documents(&truth_docs);

    let pm: PropensityModel = match args.train_truth.or(file.train_truth) {
        Some(path) => {
            let (train_docs, _) = corpus::load_documents(path)?;
            evaluation::fit_propensity(evaluation::label_frequencies(&train_docs), train_docs.len())?
        }
        None => PropensityModel::uniform(),
    };

    let report = evaluation::evaluate(&preds, &truth, &pm, &ks)?;
    emit(&report, args.out.or(file.out).as_deref())
}

fn cmd_diagnose(args: DiagnoseArgs, file: DiagnoseSection) -> Result<()> {
    let truth_path = require(args.truth.or(file.truth), "--truth")?;
    let patterns = parse_patterns(args.pattern.or(file.pattern))?;

    let (docs, _) = corpus::load_documents(&truth_path)?;
    let net = hin::build_hin(&docs);
    let truth = GroundTruth::from_documents(&docs);
    let labeled: Vec<String> = docs
        .iter()
        .filter(|d| d.has_labels())
        .map(|d| d.doc_id.clone())
        .collect();
    if labeled.is_empty() {
        return Err(Error::Validation(
            "diagnostic corpus carries no labeled documents".into(),
        ));
    }
    let report = diagnostics::diagnose::<Scalar>(&net, &truth, &labeled, &patterns)?;
    emit(&report, args.out.or(file.out).as_deref())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let file = load_file_config(cli.config.as_deref())?;
    let tok_cfg = file.tokenizer;
    match cli.cmd {
        Cmd::Synth(args) => cmd_synth(args, file.synth),
        Cmd::Ingest(args) => cmd_ingest(args, file.ingest),
        Cmd::BuildHin(args) => cmd_build_hin(args, file.build_hin),
        Cmd::SamplePairs(args) => cmd_sample_pairs(args, file.sample_pairs),
        Cmd::Train(args) => cmd_train(args, file.train, &tok_cfg),
        Cmd::Predict(args) => cmd_predict(args, file.predict, &tok_cfg),
        Cmd::Evaluate(args) => cmd_evaluate(args, file.evaluate),
        Cmd::Diagnose(args) => cmd_diagnose(args, file.diagnose),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            // the panic hook has already printed the message
            eprintln!("error: internal invariant breached");
            ExitCode::from(3)
        }
    }
}
