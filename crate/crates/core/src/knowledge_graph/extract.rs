use std::collections::BTreeMap;

use super::graph::{
    normalize_label, EntityCategory, EntityNode, KnowledgeGraph, RelationEdge, RelationKind,
    OCCURRENCES,
};
use super::lexicon::{Lexicons, TermMatcher};
use crate::record_ingest::{voltage_classes, HazardRecord, SeverityLevel};
use crate::scalar::Scalar;
use crate::segmenter::{segment_tokens, HmmModel, TokenKind};

/// Attribute naming the record field(s) an entity was taken from.
pub const SOURCE_FIELD: &str = "source_field";
pub const SEVERITY: &str = "severity_level";

/// Free-text fields, each with the category used when no lexicon term of
/// that category is found in it.
const FREE_TEXT: [(&str, EntityCategory); 3] = [
    ("hazard_content", EntityCategory::HazardPhenomenon),
    ("control_measures", EntityCategory::Measure),
    ("violation_info", EntityCategory::Violation),
];

struct Collector<'r> {
    record: &'r HazardRecord,
    nodes: BTreeMap<String, EntityNode>,
}

impl Collector<'_> {
    fn add(&mut self, category: EntityCategory, label: &str, field: &str, offset: Option<usize>) {
        let Some(mut node) = EntityNode::new(category, label) else {
            return;
        };
        node.source_record_ids.insert(self.record.id.clone());
        node.add_attribute(SOURCE_FIELD, field);
        if let Some(off) = offset {
            node.add_attribute(OCCURRENCES, format!("{}/{field}:{off}", self.record.id));
        }
        match self.nodes.get_mut(&node.node_id) {
            Some(n) => n.merge(node),
            None => {
                self.nodes.insert(node.node_id.clone(), node);
            }
        }
    }
}

fn field_text<'a>(record: &'a HazardRecord, field: &str) -> &'a str {
    match field {
        "hazard_content" => &record.hazard_content,
        "control_measures" => &record.control_measures,
        "violation_info" => &record.violation_info,
        _ => "",
    }
}

/// Lexicon terms found in `text`, as `(category, surface, char offset)`.
///
/// Candidates are runs of contiguous segmenter tokens (whitespace inside
/// a run allowed, punctuation not); at every token the longest known run
/// wins and matching resumes after it.
fn match_terms<F: Scalar>(
    model: &HmmModel<F>,
    matcher: &TermMatcher,
    text: &str,
) -> Vec<(EntityCategory, String, usize)> {
    let tokens = segment_tokens(model, text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if matches!(
            tokens[i].kind,
            TokenKind::Whitespace | TokenKind::Punctuation
        ) {
            i += 1;
            continue;
        }
        let mut surface = String::new();
        let mut best = None;
        for (j, tok) in tokens.iter().enumerate().skip(i) {
            if tok.kind == TokenKind::Punctuation {
                break;
            }
            surface.push_str(&tok.text);
            if surface.chars().count() > matcher.max_chars {
                break;
            }
            if tok.kind != TokenKind::Whitespace {
                if let Some(&cat) = matcher.terms.get(&normalize_label(&surface)) {
                    best = Some((j, cat, surface.clone()));
                }
            }
        }
        match best {
            Some((j, cat, surface)) => {
                out.push((cat, surface, tokens[i].start));
                i = j + 1;
            }
            None => i += 1,
        }
    }
    out
}

/// Entities of one record, deduplicated by `(category, label)`.
///
/// Structured fields map directly to typed entities; free-text fields are
/// segmented and matched against the lexicons. A free-text field without
/// a lexicon hit of its own category contributes its whole trimmed text as
/// one entity of that category. Nodes come back sorted by id.
pub fn extract_entities<F: Scalar>(
    record: &HazardRecord,
    model: &HmmModel<F>,
    lexicons: &Lexicons,
) -> Vec<EntityNode> {
    let mut c = Collector {
        record,
        nodes: BTreeMap::new(),
    };
    c.add(
        EntityCategory::Equipment,
        &record.equipment_name,
        "equipment_name",
        None,
    );
    c.add(EntityCategory::Location, &record.location, "location", None);
    if !record.detail_category.trim().is_empty() {
        let label = lexicons
            .canonical_category(&record.detail_category)
            .unwrap_or(&record.detail_category)
            .to_string();
        c.add(
            EntityCategory::HazardCategory,
            &label,
            "detail_category",
            None,
        );
    }
    if let Some(v) = record.voltage_class.as_deref() {
        let classes = voltage_classes(v);
        if classes.is_empty() {
            c.add(EntityCategory::VoltageClass, v, "voltage_class", None);
        }
        for class in classes {
            c.add(EntityCategory::VoltageClass, &class, "voltage_class", None);
        }
    }
    if let Some(d) = record.inspect_time {
        c.add(
            EntityCategory::Time,
            &d.format("%Y-%m").to_string(),
            "inspect_time",
            None,
        );
    }

    let matcher = lexicons.matcher();
    for (field, own) in FREE_TEXT {
        let text = field_text(record, field);
        if text.trim().is_empty() {
            continue;
        }
        let hits = match_terms(model, &matcher, text);
        let has_own = hits.iter().any(|(cat, _, _)| *cat == own);
        for (cat, surface, off) in hits {
            c.add(cat, &surface, field, Some(off));
        }
        if !has_own {
            let lead = text.chars().take_while(|ch| ch.is_whitespace()).count();
            c.add(own, text.trim(), field, Some(lead));
        }
    }

    if record.severity_level != SeverityLevel::Unrated {
        for n in c.nodes.values_mut() {
            if matches!(
                n.category,
                EntityCategory::Equipment | EntityCategory::HazardPhenomenon
            ) {
                n.add_attribute(SEVERITY, record.severity_level.as_str());
            }
        }
    }
    c.nodes.into_values().collect()
}

/// Template relations among the entities of one record.
///
/// The record's subjects are its equipment entities, or its phenomena when
/// no equipment is named; its hazards are its phenomena, or the equipment
/// when no phenomenon is found.
///
/// - equipment `has_hazard` phenomenon
/// - hazard `belongs_to_category` category
/// - subject `located_at` location
/// - hazard `mitigated_by` measure
/// - hazard `violates` violation
/// - hazard `occurred_on` time
/// - subject `has_attribute` voltage class
/// - voltage classes taken from the same field are linked by
///   `has_attribute`, from the smaller id to the larger
pub fn extract_relations(record: &HazardRecord, entities: &[EntityNode]) -> Vec<RelationEdge> {
    let of = |cat: EntityCategory| -> Vec<&EntityNode> {
        entities.iter().filter(|e| e.category == cat).collect()
    };
    let equipment = of(EntityCategory::Equipment);
    let phenomena = of(EntityCategory::HazardPhenomenon);
    let subjects = if equipment.is_empty() {
        &phenomena
    } else {
        &equipment
    };
    let hazards = if phenomena.is_empty() {
        &equipment
    } else {
        &phenomena
    };

    let mut edges: BTreeMap<(String, String, RelationKind), RelationEdge> = BTreeMap::new();
    let mut link = |from: &[&EntityNode], to: &[&EntityNode], rel: RelationKind| {
        for a in from {
            for b in to {
                if a.node_id == b.node_id {
                    continue;
                }
                let mut e = RelationEdge::new(&a.node_id, &b.node_id, rel);
                e.source_record_ids.insert(record.id.clone());
                edges.insert(e.key(), e);
            }
        }
    };
    link(&equipment, &phenomena, RelationKind::HasHazard);
    link(
        hazards,
        &of(EntityCategory::HazardCategory),
        RelationKind::BelongsToCategory,
    );
    link(
        subjects,
        &of(EntityCategory::Location),
        RelationKind::LocatedAt,
    );
    link(
        hazards,
        &of(EntityCategory::Measure),
        RelationKind::MitigatedBy,
    );
    link(
        hazards,
        &of(EntityCategory::Violation),
        RelationKind::Violates,
    );
    link(hazards, &of(EntityCategory::Time), RelationKind::OccurredOn);
    let voltages = of(EntityCategory::VoltageClass);
    link(subjects, &voltages, RelationKind::HasAttribute);
    for (i, a) in voltages.iter().enumerate() {
        for b in &voltages[i + 1..] {
            let shared = a
                .attribute(SOURCE_FIELD)
                .any(|f| b.attribute(SOURCE_FIELD).any(|g| g == f));
            if shared {
                let (lo, hi) = if a.node_id < b.node_id {
                    (a, b)
                } else {
                    (b, a)
                };
                link(&[lo], &[hi], RelationKind::HasAttribute);
            }
        }
    }
    edges.into_values().collect()
}

/// Entities and relations of one record as a graph.
pub fn record_graph<F: Scalar>(
    record: &HazardRecord,
    model: &HmmModel<F>,
    lexicons: &Lexicons,
) -> KnowledgeGraph {
    let entities = extract_entities(record, model, lexicons);
    let edges = extract_relations(record, &entities);
    let mut g = KnowledgeGraph::new();
    for n in entities {
        g.add_node(n).expect("extracted nodes are well formed");
    }
    for e in edges {
        g.add_edge(e).expect("relations connect extracted entities");
    }
    g
}

/// Adds the entities and relations of `records` to `graph`.
pub fn extend_graph<F: Scalar>(
    graph: &mut KnowledgeGraph,
    records: &[HazardRecord],
    model: &HmmModel<F>,
    lexicons: &Lexicons,
) {
    for r in records {
        graph.union(record_graph(r, model, lexicons));
    }
}

/// Union of the per-record graphs of `records`.
pub fn build_graph<F: Scalar>(
    records: &[HazardRecord],
    model: &HmmModel<F>,
    lexicons: &Lexicons,
) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();
    extend_graph(&mut g, records, model, lexicons);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmenter::{train_hmm, TaggedCorpus};

    fn model() -> HmmModel<f64> {
        let corpus = TaggedCorpus::from_gold_text("主变 漏油\n主变 异常\n更换 密封\n").unwrap();
        train_hmm(&corpus, 1e-6).unwrap()
    }

    fn cats(nodes: &[EntityNode]) -> Vec<(EntityCategory, &str)> {
        nodes
            .iter()
            .map(|n| (n.category, n.label.as_str()))
            .collect()
    }

    #[test]
    fn empty_record() {
        let r = HazardRecord::new("r", "");
        assert!(extract_entities(&r, &model(), &Lexicons::default()).is_empty());
    }

    #[test]
    fn structured_equipment() {
        let mut r = HazardRecord::new("r", "");
        r.equipment_name = "sulfur hexafluoride gas tank".into();
        let e = extract_entities(&r, &model(), &Lexicons::default());
        assert_eq!(
            cats(&e),
            [(EntityCategory::Equipment, "sulfur hexafluoride gas tank")]
        );
        assert!(extract_relations(&r, &e).is_empty());
    }

    #[test]
    fn repeated_phenomenon_is_one_entity() {
        let r = HazardRecord::new("r", "oil leakage at valve, oil leakage at flange");
        let e = extract_entities(&r, &model(), &Lexicons::default());
        assert_eq!(
            cats(&e),
            [(EntityCategory::HazardPhenomenon, "oil leakage")]
        );
        let occ: Vec<&str> = e[0].attribute(OCCURRENCES).collect();
        assert_eq!(occ, ["r/hazard_content:0", "r/hazard_content:22"]);
    }

    #[test]
    fn chinese_lexicon_terms() {
        let mut r = HazardRecord::new("r", "主变漏油");
        r.control_measures = "更换密封".into();
        let e = extract_entities(&r, &model(), &Lexicons::default());
        assert_eq!(
            cats(&e),
            [
                (EntityCategory::Equipment, "主变"),
                (EntityCategory::HazardPhenomenon, "漏油"),
                (EntityCategory::Measure, "更换"),
            ]
        );
    }

    #[test]
    fn fallback_to_whole_field() {
        let mut r = HazardRecord::new("r", "  cover missing ");
        r.equipment_name = "drainage manhole cover".into();
        r.detail_category = "personal safety".into();
        let e = extract_entities(&r, &model(), &Lexicons::default());
        assert!(e
            .iter()
            .any(|n| n.category == EntityCategory::HazardPhenomenon && n.label == "cover missing"));
        let edges = extract_relations(&r, &e);
        assert!(edges
            .iter()
            .any(|x| x.relation == RelationKind::BelongsToCategory
                && x.src == "hazard_phenomenon:cover missing"
                && x.dst == "hazard_category:personal safety hazards"));
    }

    #[test]
    fn three_entity_templates() {
        let mut r = HazardRecord::new("r", "oil leakage");
        r.equipment_name = "main transformer".into();
        r.control_measures = "replace gasket".into();
        let e = extract_entities(&r, &model(), &Lexicons::default());
        assert_eq!(e.len(), 3);
        let rels: Vec<RelationKind> = extract_relations(&r, &e)
            .iter()
            .map(|x| x.relation)
            .collect();
        assert_eq!(rels.len(), 2);
        assert!(rels.contains(&RelationKind::HasHazard));
        assert!(rels.contains(&RelationKind::MitigatedBy));
    }

    #[test]
    fn voltage_attribute_pairs() {
        let mut r = HazardRecord::new("r", "");
        r.equipment_name = "transformer".into();
        r.voltage_class = Some("66kV/10kV".into());
        let e = extract_entities(&r, &model(), &Lexicons::default());
        let edges = extract_relations(&r, &e);
        assert_eq!(edges.len(), 3);
        assert!(edges
            .iter()
            .any(|x| x.src == "voltage_class:10kv" && x.dst == "voltage_class:66kv"));
    }

    #[test]
    fn build_is_idempotent() {
        let mut r = HazardRecord::new("r", "oil leakage");
        r.equipment_name = "transformer".into();
        let once = build_graph(std::slice::from_ref(&r), &model(), &Lexicons::default());
        let twice = build_graph(&[r.clone(), r], &model(), &Lexicons::default());
        assert_eq!(once, twice);
        assert!(build_graph(&[], &model(), &Lexicons::default()).is_empty());
    }
}
