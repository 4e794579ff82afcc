use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::KgError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityCategory {
    Equipment,
    HazardPhenomenon,
    HazardCategory,
    Location,
    Measure,
    Violation,
    Time,
    VoltageClass,
}

impl EntityCategory {
    pub const ALL: [EntityCategory; 8] = [
        EntityCategory::Equipment,
        EntityCategory::HazardPhenomenon,
        EntityCategory::HazardCategory,
        EntityCategory::Location,
        EntityCategory::Measure,
        EntityCategory::Violation,
        EntityCategory::Time,
        EntityCategory::VoltageClass,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityCategory::Equipment => "equipment",
            EntityCategory::HazardPhenomenon => "hazard_phenomenon",
            EntityCategory::HazardCategory => "hazard_category",
            EntityCategory::Location => "location",
            EntityCategory::Measure => "measure",
            EntityCategory::Violation => "violation",
            EntityCategory::Time => "time",
            EntityCategory::VoltageClass => "voltage_class",
        }
    }
}

impl fmt::Display for EntityCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown entity category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    HasHazard,
    LocatedAt,
    BelongsToCategory,
    MitigatedBy,
    Violates,
    OccurredOn,
    HasAttribute,
}

impl RelationKind {
    pub const ALL: [RelationKind; 7] = [
        RelationKind::HasHazard,
        RelationKind::LocatedAt,
        RelationKind::BelongsToCategory,
        RelationKind::MitigatedBy,
        RelationKind::Violates,
        RelationKind::OccurredOn,
        RelationKind::HasAttribute,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::HasHazard => "has_hazard",
            RelationKind::LocatedAt => "located_at",
            RelationKind::BelongsToCategory => "belongs_to_category",
            RelationKind::MitigatedBy => "mitigated_by",
            RelationKind::Violates => "violates",
            RelationKind::OccurredOn => "occurred_on",
            RelationKind::HasAttribute => "has_attribute",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Label key used for node identity: trimmed, whitespace collapsed,
/// lowercased.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// `"<category>:<normalized label>"`.
pub fn node_id(category: EntityCategory, label: &str) -> String {
    format!("{}:{}", category.as_str(), normalize_label(label))
}

/// Attribute key holding `record/field:char offset` occurrence markers.
pub const OCCURRENCES: &str = "occurrences";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntityNode {
    pub node_id: String,
    pub label: String,
    pub category: EntityCategory,
    #[serde(default)]
    pub attributes: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub source_record_ids: BTreeSet<String>,
}

impl EntityNode {
    /// `None` for a label that is blank after normalization.
    pub fn new(category: EntityCategory, label: &str) -> Option<Self> {
        let label = label.split_whitespace().collect::<Vec<_>>().join(" ");
        if label.is_empty() {
            return None;
        }
        Some(Self {
            node_id: node_id(category, &label),
            label,
            category,
            attributes: BTreeMap::new(),
            source_record_ids: BTreeSet::new(),
        })
    }

    pub fn add_attribute(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.attributes
            .entry(key.into())
            .or_default()
            .insert(value.into());
    }

    pub fn attribute(&self, key: &str) -> impl Iterator<Item = &str> {
        self.attributes
            .get(key)
            .into_iter()
            .flatten()
            .map(String::as_str)
    }

    /// Unions attributes and sources; keeps the smallest surface label so
    /// the result does not depend on merge order.
    pub fn merge(&mut self, other: EntityNode) {
        debug_assert_eq!(self.node_id, other.node_id);
        if other.label < self.label {
            self.label = other.label;
        }
        for (k, vs) in other.attributes {
            self.attributes.entry(k).or_default().extend(vs);
        }
        self.source_record_ids.extend(other.source_record_ids);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationEdge {
    pub src: String,
    pub dst: String,
    pub relation: RelationKind,
    #[serde(default)]
    pub source_record_ids: BTreeSet<String>,
}

impl RelationEdge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, relation: RelationKind) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            relation,
            source_record_ids: BTreeSet::new(),
        }
    }

    pub fn key(&self) -> EdgeKey {
        (self.src.clone(), self.dst.clone(), self.relation)
    }
}

pub type EdgeKey = (String, String, RelationKind);

/// Typed property graph with referential integrity.
///
/// Nodes are keyed by id and edges by `(src, dst, relation)`, so iteration
/// order is sorted and adding the same node or edge twice only merges
/// the source record ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeGraph {
    nodes: BTreeMap<String, EntityNode>,
    edges: BTreeMap<EdgeKey, RelationEdge>,
    outgoing: BTreeMap<String, BTreeSet<EdgeKey>>,
    incoming: BTreeMap<String, BTreeSet<EdgeKey>>,
}

impl KnowledgeGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&EntityNode> {
        self.nodes.get(id)
    }

    pub fn find(&self, category: EntityCategory, label: &str) -> Option<&EntityNode> {
        self.nodes.get(&node_id(category, label))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &EntityNode> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &RelationEdge> {
        self.edges.values()
    }

    pub fn has_edge(&self, src: &str, dst: &str, relation: RelationKind) -> bool {
        self.edges
            .contains_key(&(src.to_string(), dst.to_string(), relation))
    }

    pub fn outgoing(&self, id: &str) -> impl Iterator<Item = &RelationEdge> {
        self.outgoing
            .get(id)
            .into_iter()
            .flatten()
            .map(|k| &self.edges[k])
    }

    pub fn incoming(&self, id: &str) -> impl Iterator<Item = &RelationEdge> {
        self.incoming
            .get(id)
            .into_iter()
            .flatten()
            .map(|k| &self.edges[k])
    }

    /// Ids adjacent to `id` in either direction.
    pub fn neighbors(&self, id: &str) -> BTreeSet<&str> {
        self.outgoing(id)
            .map(|e| e.dst.as_str())
            .chain(self.incoming(id).map(|e| e.src.as_str()))
            .collect()
    }

    /// Inserts or merges a node; returns its id.
    pub fn add_node(&mut self, node: EntityNode) -> Result<String, KgError> {
        if node.label.trim().is_empty() {
            return Err(KgError::Integrity(format!(
                "node {:?} has an empty label",
                node.node_id
            )));
        }
        let expected = node_id(node.category, &node.label);
        if node.node_id != expected {
            return Err(KgError::Integrity(format!(
                "node id {:?} does not match its category and label (expected {expected:?})",
                node.node_id
            )));
        }
        let id = node.node_id.clone();
        match self.nodes.get_mut(&id) {
            Some(existing) => existing.merge(node),
            None => {
                self.nodes.insert(id.clone(), node);
            }
        }
        Ok(id)
    }

    /// Inserts or merges an edge between existing, distinct nodes.
    pub fn add_edge(&mut self, edge: RelationEdge) -> Result<(), KgError> {
        for end in [&edge.src, &edge.dst] {
            if !self.nodes.contains_key(end) {
                return Err(KgError::Integrity(format!(
                    "{} edge references missing node {end:?}",
                    edge.relation
                )));
            }
        }
        if edge.src == edge.dst {
            return Err(KgError::Integrity(format!("self-loop on {:?}", edge.src)));
        }
        let key = edge.key();
        if let Some(existing) = self.edges.get_mut(&key) {
            existing.source_record_ids.extend(edge.source_record_ids);
            return Ok(());
        }
        self.outgoing
            .entry(edge.src.clone())
            .or_default()
            .insert(key.clone());
        self.incoming
            .entry(edge.dst.clone())
            .or_default()
            .insert(key.clone());
        self.edges.insert(key, edge);
        Ok(())
    }

    /// Merges every node and edge of `other`.
    pub fn union(&mut self, other: KnowledgeGraph) {
        for node in other.nodes.into_values() {
            self.add_node(node).expect("nodes of a valid graph");
        }
        for edge in other.edges.into_values() {
            self.add_edge(edge).expect("edges of a valid graph");
        }
    }

    /// Ids reachable from `seeds` within `hops` undirected steps.
    pub fn within_hops<'a, I>(&self, seeds: I, hops: usize) -> BTreeSet<String>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut queue = VecDeque::new();
        for s in seeds {
            if self.nodes.contains_key(s) && seen.insert(s.to_string()) {
                queue.push_back((s.to_string(), 0usize));
            }
        }
        while let Some((id, d)) = queue.pop_front() {
            if d == hops {
                continue;
            }
            for n in self.neighbors(&id) {
                if seen.insert(n.to_string()) {
                    queue.push_back((n.to_string(), d + 1));
                }
            }
        }
        seen
    }

    /// Subgraph induced by `ids`; unknown ids are ignored.
    pub fn induced(&self, ids: &BTreeSet<String>) -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        for id in ids {
            if let Some(n) = self.nodes.get(id) {
                g.add_node(n.clone()).expect("valid node");
            }
        }
        for e in self.edges.values() {
            if ids.contains(&e.src) && ids.contains(&e.dst) {
                g.add_edge(e.clone()).expect("endpoints copied");
            }
        }
        g
    }

    /// Verifies that adjacency matches the edge set and every edge
    /// endpoint exists.
    pub fn check_integrity(&self) -> Result<(), KgError> {
        let mut out: BTreeMap<String, BTreeSet<EdgeKey>> = BTreeMap::new();
        let mut inc: BTreeMap<String, BTreeSet<EdgeKey>> = BTreeMap::new();
        for (key, e) in &self.edges {
            if *key != e.key() {
                return Err(KgError::Integrity("edge stored under a wrong key".into()));
            }
            if !self.nodes.contains_key(&e.src) || !self.nodes.contains_key(&e.dst) {
                return Err(KgError::Integrity(format!(
                    "dangling edge {} -> {}",
                    e.src, e.dst
                )));
            }
            if e.src == e.dst {
                return Err(KgError::Integrity(format!("self-loop on {:?}", e.src)));
            }
            out.entry(e.src.clone()).or_default().insert(key.clone());
            inc.entry(e.dst.clone()).or_default().insert(key.clone());
        }
        let nonempty = |m: &BTreeMap<String, BTreeSet<EdgeKey>>| {
            m.iter()
                .filter(|(_, v)| !v.is_empty())
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect::<BTreeMap<_, _>>()
        };
        if nonempty(&self.outgoing) != out || nonempty(&self.incoming) != inc {
            return Err(KgError::Integrity(
                "adjacency out of sync with edges".into(),
            ));
        }
        for (id, n) in &self.nodes {
            if *id != n.node_id || node_id(n.category, &n.label) != *id {
                return Err(KgError::Integrity(format!(
                    "node {id:?} has an inconsistent id"
                )));
            }
        }
        Ok(())
    }
}

/// Does `node` match `keyword` (case-insensitive substring of the label
/// or of an attribute value other than occurrence markers)?
pub fn node_matches(node: &EntityNode, keyword: &str) -> bool {
    let kw = keyword.trim().to_lowercase();
    if kw.is_empty() {
        return false;
    }
    node.label.to_lowercase().contains(&kw)
        || node
            .attributes
            .iter()
            .filter(|(k, _)| k.as_str() != OCCURRENCES)
            .flat_map(|(_, vs)| vs)
            .any(|v| v.to_lowercase().contains(&kw))
}

/// Induced subgraph of every node within `hops` undirected hops of a node
/// matching any keyword.
pub fn query_subgraph<S: AsRef<str>>(
    graph: &KnowledgeGraph,
    keywords: &[S],
    hops: usize,
) -> KnowledgeGraph {
    let seeds: Vec<&str> = graph
        .nodes()
        .filter(|n| keywords.iter().any(|k| node_matches(n, k.as_ref())))
        .map(|n| n.node_id.as_str())
        .collect();
    graph.induced(&graph.within_hops(seeds, hops))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(c: EntityCategory, l: &str) -> EntityNode {
        EntityNode::new(c, l).unwrap()
    }

    fn sample() -> KnowledgeGraph {
        let mut g = KnowledgeGraph::new();
        let a = g
            .add_node(node(EntityCategory::Equipment, "Main Transformer"))
            .unwrap();
        let b = g
            .add_node(node(EntityCategory::HazardPhenomenon, "oil leakage"))
            .unwrap();
        let mut v = node(EntityCategory::VoltageClass, "66kV");
        v.add_attribute("source_field", "voltage_class");
        let c = g.add_node(v).unwrap();
        g.add_edge(RelationEdge::new(&a, &b, RelationKind::HasHazard))
            .unwrap();
        g.add_edge(RelationEdge::new(&a, &c, RelationKind::HasAttribute))
            .unwrap();
        g
    }

    #[test]
    fn ids_normalize() {
        assert_eq!(
            node_id(EntityCategory::Equipment, "  Main   Transformer "),
            "equipment:main transformer"
        );
        assert!(EntityNode::new(EntityCategory::Time, "  ").is_none());
        assert_eq!(
            "voltage_class".parse::<EntityCategory>().unwrap(),
            EntityCategory::VoltageClass
        );
    }

    #[test]
    fn merge_keeps_smallest_label() {
        let mut g = KnowledgeGraph::new();
        g.add_node(node(EntityCategory::Equipment, "main transformer"))
            .unwrap();
        g.add_node(node(EntityCategory::Equipment, "Main transformer"))
            .unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.nodes().next().unwrap().label, "Main transformer");
    }

    #[test]
    fn integrity_enforced() {
        let mut g = sample();
        let e = RelationEdge::new(
            "equipment:main transformer",
            "location:nowhere",
            RelationKind::LocatedAt,
        );
        assert!(g.add_edge(e).is_err());
        let id = "equipment:main transformer";
        assert!(g
            .add_edge(RelationEdge::new(id, id, RelationKind::HasHazard))
            .is_err());
        let mut bad = node(EntityCategory::Equipment, "x");
        bad.node_id = "equipment:y".into();
        assert!(g.add_node(bad).is_err());
        g.check_integrity().unwrap();
    }

    #[test]
    fn duplicate_edge_merges_sources() {
        let mut g = sample();
        let mut e = RelationEdge::new(
            "equipment:main transformer",
            "hazard_phenomenon:oil leakage",
            RelationKind::HasHazard,
        );
        e.source_record_ids.insert("r9".into());
        g.add_edge(e).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.edges().any(|e| e.source_record_ids.contains("r9")));
    }

    #[test]
    fn subgraph_hops() {
        let g = sample();
        assert!(query_subgraph(&g, &["nothing"], 2).is_empty());
        let zero = query_subgraph(&g, &["66KV"], 0);
        assert_eq!(zero.node_count(), 1);
        assert_eq!(zero.edge_count(), 0);
        let one = query_subgraph(&g, &["66kv"], 1);
        assert_eq!(one.node_count(), 2);
        assert_eq!(one.edge_count(), 1);
        let two = query_subgraph(&g, &["66kv"], 2);
        assert_eq!(two, g);
        // Attribute values match too, occurrence markers do not.
        assert_eq!(
            query_subgraph(&g, &["source_field", "voltage_cl"], 0).node_count(),
            1
        );
    }
}
