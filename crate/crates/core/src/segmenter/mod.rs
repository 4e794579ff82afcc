//! BMES word segmentation.
//!
//! Segmentation is treated as sequence labelling: every character gets one
//! of four word-position tags (`B`egin, `M`iddle, `E`nd, `S`ingle). A
//! first-order hidden Markov model over those tags is estimated from a
//! gold-segmented corpus ([`train_hmm`]) and decoded with the Viterbi
//! algorithm ([`viterbi_decode`]). All probabilities are kept as natural
//! logarithms; forbidden transitions are `-inf`.
//!
//! Two dictionary-free/dictionary baselines ([`max_match_segment`],
//! [`ngram_segment`]) and a span-based precision/recall/F1 harness
//! ([`evaluate_segmentation`]) live alongside.

mod baselines;
mod eval;
mod model;
mod segment;
mod tags;
mod viterbi;

use thiserror::Error;

pub use baselines::{
    backward_max_match, forward_max_match, max_match_segment, ngram_segment, BigramCounts,
};
pub use eval::{evaluate_segmentation, spans, Prf, SpanCounts};
pub use model::{train_hmm, HmmModel, DEFAULT_EPSILON, MODEL_FORMAT_VERSION};
pub use segment::{segment, segment_tokens, Token, TokenKind, SENTENCE_PUNCTUATION};
pub use tags::{tags_to_words, words_to_tags, CharSequence, Tag, TagSequence, TaggedCorpus};
pub use viterbi::{viterbi_decode, viterbi_decode_scored, ViterbiTrellis};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("word {index} is empty")]
    EmptyWord { index: usize },
    #[error("length mismatch: {chars} chars but {tags} tags")]
    LengthMismatch { chars: usize, tags: usize },
    #[error("ill-formed tag sequence at position {position}")]
    IllFormedTags { position: usize },
    #[error("training corpus has no non-empty sentence")]
    EmptyCorpus,
    #[error("smoothing epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("predicted and gold tokens cover different text")]
    TextMismatch,
    #[error("malformed model document: {0}")]
    Document(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
