//! Zero-shot multi-label text classification over metadata-rich corpora.
//!
//! The pipeline has four stages:
//!
//! 1. **Pair sampling** ([`hin`]): build a heterogeneous network over papers,
//!    authors, and venues, and sample similar document pairs witnessed by
//!    meta-path / meta-graph reachability.
//! 2. **Contrastive training** ([`training`]): fine-tune a document/label
//!    relevance scorer ([`encoder`]) on those pairs, with no labels involved.
//! 3. **Retrieve-then-rerank inference** ([`retrieval`], [`inference`]):
//!    exact name matching plus BM25 generates candidate labels, the trained
//!    scorer re-ranks them.
//! 4. **Evaluation and diagnostics** ([`evaluation`], [`diagnostics`]):
//!    rank-based and propensity-scored metrics, plus a divergence score that
//!    measures how well a meta-path's pair distribution tracks label overlap.
//!
//! Numeric code is generic over the scalar type via [`Real`]; the crate-root
//! aliases fix `f64` as the default precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod corpus;
pub mod diagnostics;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod hin;
pub mod inference;
pub mod retrieval;
pub mod synth;
pub mod training;

pub use error::{Error, Result};

/// Scalar bound for all numeric code in this crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Default scalar precision for the pipeline.
pub type Scalar = f64;

pub type Bm25Index = retrieval::Bm25Index<Scalar>;
pub type CandidateSet = retrieval::CandidateSet<Scalar>;
pub type EncoderParams = encoder::EncoderParams<Scalar>;
pub type TrainConfig = training::TrainConfig<Scalar>;
pub type TrainReport = training::TrainReport<Scalar>;
pub type RankedPrediction = inference::RankedPrediction<Scalar>;
pub type PropensityModel = evaluation::PropensityModel<Scalar>;
pub type MetricsReport = evaluation::MetricsReport<Scalar>;
pub type JsReport = diagnostics::JsReport<Scalar>;
