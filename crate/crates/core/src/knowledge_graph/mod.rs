//! Hazard knowledge graph: entity and relation extraction from records,
//! keyword-seeded subgraph queries, and JSON/DOT export.

mod export;
mod extract;
mod graph;
mod lexicon;

use std::path::PathBuf;

pub use export::{
    export_graph, import_graph, load_graph, save_graph, to_document, to_dot, ExportFormat,
    GRAPH_FORMAT_VERSION,
};
pub use extract::{
    build_graph, extend_graph, extract_entities, extract_relations, record_graph, SEVERITY,
    SOURCE_FIELD,
};
pub use graph::{
    node_id, node_matches, normalize_label, query_subgraph, EdgeKey, EntityCategory, EntityNode,
    KnowledgeGraph, RelationEdge, RelationKind, OCCURRENCES,
};
pub use lexicon::Lexicons;

#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("graph integrity violated: {0}")]
    Integrity(String),
    #[error("unknown export format {0:?} (expected graph-document or dot)")]
    UnknownFormat(String),
    #[error("unsupported graph format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed graph document: {0}")]
    Document(#[from] serde_json::Error),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
