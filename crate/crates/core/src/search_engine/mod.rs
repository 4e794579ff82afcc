//! Embedded sharded full-text engine.
//!
//! Documents are routed to shards by an FNV-1a hash of their id, stored as
//! immutable inverted-index segments, and made visible by per-shard commit
//! points. Each shard lives in the directory of one simulated node.

mod analyzer;
mod cluster;
mod commit;
mod engine;
mod router;
mod segment;

use std::path::PathBuf;

pub use analyzer::{analyze, AnalyzedTerm, Analyzer};
pub use cluster::{ClusterMeta, NodeInfo, ShardAssignment, META_FILE, META_FORMAT_VERSION};
pub use commit::{commit_file_name, segment_file_name, CommitPoint, COMMIT_FORMAT_VERSION};
pub use engine::{
    idf, SearchEngine, SearchHit, Searcher, ShardSnapshot, WriteFault, SEAL_THRESHOLD,
};
pub use router::{fnv1a_64, ShardRouter, FNV_OFFSET_BASIS, FNV_PRIME};
pub use segment::{
    InvertedIndex, Posting, PostingEntry, Segment, SEGMENT_FORMAT_VERSION, SEGMENT_MAGIC,
};

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("duplicate document id {0:?} in batch")]
    DuplicateId(String),
    #[error("document id must be non-empty")]
    EmptyId,
    #[error("integrity error in shard {shard}: {detail}")]
    Integrity { shard: u32, detail: String },
    #[error("shard {shard} is unavailable: {reason}")]
    ShardUnavailable { shard: u32, reason: String },
    #[error("no shard {0}")]
    UnknownShard(u32),
    #[error("invalid index layout: {0}")]
    InvalidLayout(String),
    #[error("malformed metadata {}: {source}", path.display())]
    Metadata {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("injected write fault")]
    InjectedFault,
}
