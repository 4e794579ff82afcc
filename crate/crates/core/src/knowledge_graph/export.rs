use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::graph::{EntityCategory, EntityNode, KnowledgeGraph, RelationEdge, RelationKind};
use super::KgError;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// JSON graph document that [`import_graph`] reads back.
    GraphDocument,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = KgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graph-document" | "json" => Ok(ExportFormat::GraphDocument),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(KgError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDocument {
    nodes: Vec<EntityNode>,
    edges: Vec<RelationEdge>,
    format_version: u32,
}

pub fn export_graph(graph: &KnowledgeGraph, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::GraphDocument => to_document(graph).into_bytes(),
        ExportFormat::Dot => to_dot(graph).into_bytes(),
    }
}

/// Pretty-printed JSON with nodes sorted by id and edges by
/// `(src, dst, relation)`.
pub fn to_document(graph: &KnowledgeGraph) -> String {
    let doc = GraphDocument {
        nodes: graph.nodes().cloned().collect(),
        edges: graph.edges().cloned().collect(),
        format_version: GRAPH_FORMAT_VERSION,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("graph serializes");
    s.push('\n');
    s
}

/// Parses a graph document, rejecting duplicates and dangling edges.
pub fn import_graph(bytes: &[u8]) -> Result<KnowledgeGraph, KgError> {
    let doc: GraphDocument = serde_json::from_slice(bytes)?;
    if doc.format_version != GRAPH_FORMAT_VERSION {
        return Err(KgError::UnsupportedVersion(doc.format_version));
    }
    let mut g = KnowledgeGraph::new();
    for n in doc.nodes {
        if g.node(&n.node_id).is_some() {
            return Err(KgError::Integrity(format!(
                "duplicate node {:?}",
                n.node_id
            )));
        }
        g.add_node(n)?;
    }
    for e in doc.edges {
        if g.has_edge(&e.src, &e.dst, e.relation) {
            return Err(KgError::Integrity(format!(
                "duplicate {} edge {} -> {}",
                e.relation, e.src, e.dst
            )));
        }
        g.add_edge(e)?;
    }
    Ok(g)
}

pub fn save_graph(graph: &KnowledgeGraph, path: &Path) -> Result<(), KgError> {
    std::fs::write(path, to_document(graph)).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, KgError> {
    let bytes = std::fs::read(path).map_err(|source| KgError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    import_graph(&bytes)
}

fn dot_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => {}
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn node_style(c: EntityCategory) -> (&'static str, &'static str) {
    match c {
        EntityCategory::Equipment => ("box", "steelblue"),
        EntityCategory::HazardPhenomenon => ("ellipse", "firebrick"),
        EntityCategory::HazardCategory => ("hexagon", "darkorange"),
        EntityCategory::Location => ("house", "darkgreen"),
        EntityCategory::Measure => ("component", "seagreen"),
        EntityCategory::Violation => ("octagon", "purple"),
        EntityCategory::Time => ("note", "gray40"),
        EntityCategory::VoltageClass => ("diamond", "goldenrod"),
    }
}

fn edge_style(r: RelationKind) -> &'static str {
    match r {
        RelationKind::HasAttribute => "dashed",
        RelationKind::OccurredOn => "dotted",
        _ => "solid",
    }
}

/// Graphviz digraph; shape and color encode the category, line style the
/// relation.
pub fn to_dot(graph: &KnowledgeGraph) -> String {
    let mut s = String::from("digraph hazard_kg {\n");
    for n in graph.nodes() {
        let (shape, color) = node_style(n.category);
        let _ = writeln!(
            s,
            "  {} [label={}, category={}, shape={shape}, color={color}];",
            dot_escape(&n.node_id),
            dot_escape(&n.label),
            dot_escape(n.category.as_str())
        );
    }
    for e in graph.edges() {
        let _ = writeln!(
            s,
            "  {} -> {} [label={}, style={}];",
            dot_escape(&e.src),
            dot_escape(&e.dst),
            dot_escape(e.relation.as_str()),
            edge_style(e.relation)
        );
    }
    s.push_str("}\n");
    s
}
