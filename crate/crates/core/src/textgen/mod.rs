//! Two-stage rumour generation: a headline stage seeds a style-conditioned
//! story stage.

mod backend;
mod headline;
mod ngram;
pub(crate) mod pipeline;
mod sampling;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::params::{ControlSpec, Genre, MillSettings};

pub use backend::{
    split_documents, story_seed, BackendError, BuiltinBackend, GenerationBackend, Health, DEFAULT_ORDER,
    DEFAULT_STOP_SENTENCES,
};
pub use headline::{PhraseLists, MAX_HEADLINE_WORDS, MIN_HEADLINE_WORDS};
pub use ngram::{build_ngram_model, tokenize, Context, NgramModel};
pub use pipeline::{mill_once, MillError, DEFAULT_MAX_TOKENS};
pub use sampling::{entropy, temperature_distribution, temperature_sample, SamplingError, GREEDY_TEMPERATURE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextgenError {
    #[error("n-gram order must be at least 2, got {0}")]
    InvalidOrder(usize),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("all {skipped} documents are shorter than the model order")]
    DocumentTooShort { skipped: usize },
    #[error("max_tokens must be at least 1")]
    ZeroMaxTokens,
    #[error("context {0:?} has no successors")]
    DeadEnd(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("phrase list: {0}")]
    PhraseList(String),
    #[error("no generation assets for genre {0}")]
    ConfigMissing(Genre),
    #[error("genre Random must be resolved before generation")]
    UnresolvedGenre,
    #[error("asset: {0}")]
    Asset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Live,
    Cache,
}

impl Provenance {
    pub fn slug(self) -> &'static str {
        match self {
            Provenance::Live => "live",
            Provenance::Cache => "cache",
        }
    }
}

/// One milled rumour: headline plus news blurb, with the settings that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rumour {
    pub id: Uuid,
    pub headline: String,
    pub body: String,
    pub settings: MillSettings,
    pub spec: ControlSpec,
    pub created_at: DateTime<Utc>,
    pub provenance: Provenance,
}
