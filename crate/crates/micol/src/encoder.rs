//! The trainable relevance scorer.
//!
//! The reference encoder maps a token sequence to a fixed vector: mean of
//! embedding rows, projection, tanh. Two scoring heads sit on top of it:
//! cosine between separately encoded texts (bi) and a linear head over the
//! jointly encoded pair (cross). Anything implementing the same
//! tokens-to-vector contract can replace the reference encoder without
//! touching training or inference.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Reserved separator token for joint encoding. The default tokenizer strips
/// brackets, so this can never collide with a corpus token.
pub const SEP_TOKEN: &str = "[SEP]";

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_MAX_LEN: usize = 256;

const CHECKPOINT_VERSION: u32 = 1;

/// All trainable state: token embeddings `embed` (|vocab| x dim, row-major),
/// projection `proj` (dim x dim, row-major), and cross-scoring vector `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams<F: Real> {
    pub vocab: BTreeMap<String, usize>,
    pub embed: Vec<F>,
    pub proj: Vec<F>,
    pub w: Vec<F>,
    pub dim: usize,
    pub max_len: usize,
}

/// Parameter-shaped gradient accumulator.
#[derive(Debug, Clone)]
pub struct Grads<F: Real> {
    pub embed: Vec<F>,
    pub proj: Vec<F>,
    pub w: Vec<F>,
}

impl<F: Real> Grads<F> {
    pub fn zeros_like(params: &EncoderParams<F>) -> Self {
        Grads {
            embed: vec![F::zero(); params.embed.len()],
            proj: vec![F::zero(); params.proj.len()],
            w: vec![F::zero(); params.w.len()],
        }
    }

    pub fn scale(&mut self, factor: F) {
        for g in self
            .embed
            .iter_mut()
            .chain(self.proj.iter_mut())
            .chain(self.w.iter_mut())
        {
            *g *= factor;
        }
    }
}

/// Cached forward pass of the reference encoder, kept for backprop.
#[derive(Debug, Clone)]
pub struct Forward<F: Real> {
    /// Vocab rows of the in-vocab tokens that survived truncation.
    pub token_rows: Vec<usize>,
    /// Mean-pooled input vector.
    pub pooled: Vec<F>,
    /// tanh(proj * pooled); the encoding.
    pub hidden: Vec<F>,
}

impl<F: Real> EncoderParams<F> {
    /// Initialize from a sorted vocabulary. `embed` and `proj` entries are
    /// i.i.d. uniform in [-0.1, 0.1]; `w` starts at zero. The separator token
    /// is appended to the vocabulary automatically.
    pub fn init(tokens: impl IntoIterator<Item = String>, dim: usize, max_len: usize, seed: u64) -> Self {
        let mut vocab: BTreeMap<String, usize> = BTreeMap::new();
        for token in tokens {
            let next = vocab.len();
            vocab.entry(token).or_insert(next);
        }
        let next = vocab.len();
        vocab.entry(SEP_TOKEN.to_owned()).or_insert(next);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |n: usize| -> Vec<F> {
            (0..n)
                .map(|_| F::from_f64_lossy(rng.gen_range(-0.1..0.1)))
                .collect()
        };
        let embed = uniform(vocab.len() * dim);
        let proj = uniform(dim * dim);
        EncoderParams {
            vocab,
            embed,
            proj,
            w: vec![F::zero(); dim],
            dim,
            max_len,
        }
    }

    /// Forward pass with an explicit truncation limit.
    pub fn forward_with_limit(&self, tokens: &[String], limit: usize) -> Forward<F> {
        let token_rows: Vec<usize> = tokens
            .iter()
            .take(limit)
            .filter_map(|t| self.vocab.get(t).copied())
            .collect();
        let mut pooled = vec![F::zero(); self.dim];
        if !token_rows.is_empty() {
            let inv = F::one() / F::from_usize_lossy(token_rows.len());
            for &row in &token_rows {
                let base = row * self.dim;
                for (j, p) in pooled.iter_mut().enumerate() {
                    *p += self.embed[base + j] * inv;
                }
            }
        }
        let mut hidden = vec![F::zero(); self.dim];
        for i in 0..self.dim {
            let mut z = F::zero();
            let base = i * self.dim;
            for (j, &p) in pooled.iter().enumerate() {
                z += self.proj[base + j] * p;
            }
            hidden[i] = z.tanh();
        }
        Forward {
            token_rows,
            pooled,
            hidden,
        }
    }

    pub fn forward(&self, tokens: &[String]) -> Forward<F> {
        self.forward_with_limit(tokens, self.max_len)
    }

    /// Encode a token sequence to a fixed vector, entries in (-1, 1).
    pub fn encode(&self, tokens: &[String]) -> Vec<F> {
        self.forward(tokens).hidden
    }

    /// Accumulate gradients of a scalar loss through one cached forward pass,
    /// given the loss gradient w.r.t. the hidden vector.
    pub fn backward(&self, fwd: &Forward<F>, grad_hidden: &[F], grads: &mut Grads<F>) {
        let dim = self.dim;
        // through tanh
        let mut dz = vec![F::zero(); dim];
        for i in 0..dim {
            dz[i] = grad_hidden[i] * (F::one() - fwd.hidden[i] * fwd.hidden[i]);
        }
        // through projection
        let mut dpooled = vec![F::zero(); dim];
        for i in 0..dim {
            let base = i * dim;
            for j in 0..dim {
                grads.proj[base + j] += dz[i] * fwd.pooled[j];
                dpooled[j] += self.proj[base + j] * dz[i];
            }
        }
        // through mean pooling
        if !fwd.token_rows.is_empty() {
            let inv = F::one() / F::from_usize_lossy(fwd.token_rows.len());
            for &row in &fwd.token_rows {
                let base = row * dim;
                for j in 0..dim {
                    grads.embed[base + j] += dpooled[j] * inv;
                }
            }
        }
    }

    /// Joint token sequence for cross encoding: both sides truncated to
    /// `max_len`, separated by the reserved token.
    pub fn joint_tokens(&self, a: &[String], b: &[String]) -> Vec<String> {
        let mut joint = Vec::with_capacity(a.len().min(self.max_len) + b.len().min(self.max_len) + 1);
        joint.extend(a.iter().take(self.max_len).cloned());
        joint.push(SEP_TOKEN.to_owned());
        joint.extend(b.iter().take(self.max_len).cloned());
        joint
    }

    pub fn cross_forward(&self, a: &[String], b: &[String]) -> Forward<F> {
        let joint = self.joint_tokens(a, b);
        self.forward_with_limit(&joint, 2 * self.max_len + 1)
    }

    /// Joint encoding of a (document, label-text) pair.
    pub fn cross_encode(&self, a: &[String], b: &[String]) -> Vec<F> {
        self.cross_forward(a, b).hidden
    }

    /// Linear head over the joint encoding.
    pub fn cross_score(&self, a: &[String], b: &[String]) -> F {
        dot(&self.w, &self.cross_encode(a, b))
    }

    /// Cosine of the two separate encodings; 0 when either has zero norm.
    pub fn bi_score(&self, a: &[String], b: &[String]) -> F {
        cosine(&self.encode(a), &self.encode(b))
    }

    /// Order-independent digest of the vocabulary (FNV-1a).
    pub fn vocab_hash(&self) -> u64 {
        let mut hash: u64 = 0xcbf29ce484222325;
        for (token, &index) in &self.vocab {
            for byte in token
                .as_bytes()
                .iter()
                .copied()
                .chain((index as u64).to_le_bytes())
            {
                hash ^= byte as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
        hash
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let wire = Checkpoint {
            version: CHECKPOINT_VERSION,
            dim: self.dim,
            max_len: self.max_len,
            vocab_hash: self.vocab_hash(),
            vocab: self.vocab.clone(),
            embed: self.embed.clone(),
            proj: self.proj.clone(),
            w: self.w.clone(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(BufWriter::new(file), &wire)
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let wire: Checkpoint<F> = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint {}: {e}", path.display())))?;
        if wire.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {})",
                wire.version, CHECKPOINT_VERSION
            )));
        }
        let params = EncoderParams {
            vocab: wire.vocab,
            embed: wire.embed,
            proj: wire.proj,
            w: wire.w,
            dim: wire.dim,
            max_len: wire.max_len,
        };
        if params.embed.len() != params.vocab.len() * params.dim
            || params.proj.len() != params.dim * params.dim
            || params.w.len() != params.dim
        {
            return Err(Error::Checkpoint("parameter shapes are inconsistent".into()));
        }
        if params.vocab_hash() != wire.vocab_hash {
            return Err(Error::Checkpoint(
                "vocabulary hash mismatch: checkpoint was built over a different corpus".into(),
            ));
        }
        Ok(params)
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<F> {
    version: u32,
    dim: usize,
    max_len: usize,
    vocab_hash: u64,
    vocab: BTreeMap<String, usize>,
    embed: Vec<F>,
    proj: Vec<F>,
    w: Vec<F>,
}

pub fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<F: Real>(a: &[F]) -> F {
    dot(a, a).sqrt()
}

/// Cosine similarity, defined as 0 when either vector has zero norm so that
/// rankings stay totally ordered.
pub fn cosine<F: Real>(a: &[F], b: &[F]) -> F {
    let (na, nb) = (norm(a), norm(b));
    if na.is_zero() || nb.is_zero() {
        F::zero()
    } else {
        dot(a, b) / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn small_params(seed: u64) -> EncoderParams<f64> {
        EncoderParams::init(
            ["alpha", "beta", "gamma", "delta"].map(String::from),
            8,
            16,
            seed,
        )
    }

    #[test]
    fn empty_and_oov_encode_to_zero() {
        let p = small_params(1);
        assert!(p.encode(&[]).iter().all(|&x| x == 0.0));
        assert!(p.encode(&toks(&["zzz", "yyy"])).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_token_is_projected_row() {
        let p = small_params(2);
        let row = p.vocab["alpha"];
        let h = p.encode(&toks(&["alpha"]));
        for i in 0..p.dim {
            let mut z = 0.0;
            for j in 0..p.dim {
                z += p.proj[i * p.dim + j] * p.embed[row * p.dim + j];
            }
            assert!((h[i] - z.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn encode_is_order_invariant_and_bounded() {
        let p = small_params(3);
        let a = p.encode(&toks(&["alpha", "beta", "gamma"]));
        let b = p.encode(&toks(&["gamma", "alpha", "beta"]));
        // mean pooling is order-invariant up to summation rounding
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!(a.iter().all(|&x| x > -1.0 && x < 1.0));
    }

    #[test]
    fn bi_score_identity_and_symmetry() {
        let p = small_params(4);
        let a = toks(&["alpha", "beta"]);
        let b = toks(&["gamma"]);
        assert!((p.bi_score(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(p.bi_score(&a, &b), p.bi_score(&b, &a));
        let s = p.bi_score(&a, &b);
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn cross_encode_degenerate_inputs() {
        let p = small_params(5);
        let b = toks(&["beta"]);
        let sep_then_b = p.cross_encode(&[], &b);
        let joint = p.joint_tokens(&[], &b);
        assert_eq!(joint[0], SEP_TOKEN);
        assert_eq!(sep_then_b, p.forward_with_limit(&joint, 33).hidden);
        let sep_only = p.cross_encode(&[], &[]);
        assert_eq!(sep_only, p.encode(&toks(&[SEP_TOKEN])));
    }

    #[test]
    fn cross_score_projections() {
        let mut p = small_params(6);
        let a = toks(&["alpha"]);
        let b = toks(&["beta"]);
        assert_eq!(p.cross_score(&a, &b), 0.0); // w starts at zero
        p.w[3] = 1.0;
        let joint = p.cross_encode(&a, &b);
        assert_eq!(p.cross_score(&a, &b), joint[3]);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let p = small_params(7);
        let f = tempfile::NamedTempFile::new().unwrap();
        p.save_checkpoint(f.path()).unwrap();
        let q = EncoderParams::<f64>::load_checkpoint(f.path()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let p = small_params(8);
        let f = tempfile::NamedTempFile::new().unwrap();
        p.save_checkpoint(f.path()).unwrap();
        let bytes = std::fs::read(f.path()).unwrap();
        std::fs::write(f.path(), &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            EncoderParams::<f64>::load_checkpoint(f.path()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn vocab_hash_guards_corpus_mismatch() {
        let p = small_params(9);
        let f = tempfile::NamedTempFile::new().unwrap();
        p.save_checkpoint(f.path()).unwrap();
        // swap one vocab token in the serialized form
        let text = std::fs::read_to_string(f.path()).unwrap();
        let tampered = text.replace("\"alpha\"", "\"omega\"");
        std::fs::write(f.path(), tampered).unwrap();
        assert!(matches!(
            EncoderParams::<f64>::load_checkpoint(f.path()),
            Err(Error::Checkpoint(_))
        ));
    }

    #[test]
    fn works_in_f32() {
        let p: EncoderParams<f32> =
            EncoderParams::init(["alpha", "beta"].map(String::from), 4, 8, 0);
        let s = p.bi_score(&toks(&["alpha"]), &toks(&["beta"]));
        assert!((-1.0..=1.0).contains(&s));
    }
}
