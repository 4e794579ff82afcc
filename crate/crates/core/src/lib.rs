//! Mining substation hidden-danger records.
//!
//! The crate turns flattened hazard-investigation tables into structured
//! records ([`record_ingest`]), segments their text with a BMES hidden
//! Markov model ([`segmenter`]), indexes them into a sharded inverted index
//! ([`search_engine`]), builds a hazard knowledge graph
//! ([`knowledge_graph`]) and derives monthly statistics and rule-based risk
//! advisories ([`analytics`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! below fix the precision used by the rest of the pipeline.

pub mod analytics;
pub mod knowledge_graph;
pub mod record_ingest;
pub mod scalar;
pub mod search_engine;
pub mod segmenter;

pub use scalar::Scalar;

/// Double-precision segmentation model used by the pipeline.
pub type HmmModel64 = segmenter::HmmModel<f64>;
/// Single-precision segmentation model.
pub type HmmModel32 = segmenter::HmmModel<f32>;
pub type ViterbiTrellis64 = segmenter::ViterbiTrellis<f64>;
pub type Prf64 = segmenter::Prf<f64>;
pub type Prf32 = segmenter::Prf<f32>;
