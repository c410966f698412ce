use std::collections::BTreeSet;

use super::{IndividualId, InstanceGraph};
use crate::semdir::SemanticDirectory;
use crate::xsource::{normalize_value, XPathExpr, XmlNode};

/// An element of a class location seen in full, so every fact about it
/// from that location is known.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub source: String,
    pub location: XPathExpr,
    /// Folded identity.
    pub id: IndividualId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Translation {
    pub graph: InstanceGraph,
    pub observations: BTreeSet<Observation>,
    /// Instance elements without a key value.
    pub skipped: usize,
    pub warnings: Vec<String>,
}

/// Elements at an absolute location.
pub fn nodes_at<'a>(doc: &'a XmlNode, path: &XPathExpr) -> Vec<&'a XmlNode> {
    match path.steps.split_first() {
        Some((first, rest)) if first.matches(&doc.name) => {
            nodes_below(doc, &XPathExpr { absolute: false, steps: rest.to_vec() })
        }
        _ => Vec::new(),
    }
}

/// Elements at a relative location under `node`; the empty path is `node`.
pub fn nodes_below<'a>(node: &'a XmlNode, rel: &XPathExpr) -> Vec<&'a XmlNode> {
    let mut current = vec![node];
    for step in &rel.steps {
        current = current
            .into_iter()
            .flat_map(|n| n.elements().filter(|e| step.matches(&e.name)))
            .collect();
    }
    current
}

fn key_of(node: &XmlNode, key_path: &XPathExpr) -> Option<String> {
    nodes_below(node, key_path)
        .into_iter()
        .map(|k| normalize_value(&k.text()))
        .find(|k| !k.is_empty())
}

/// Reads a source's result document into individuals, literals and edges.
/// Elements at depth `whole_depth` or deeper are taken to be complete and
/// are recorded as observations.
pub fn translate(doc: &XmlNode, source: &str, dir: &SemanticDirectory, whole_depth: usize) -> Translation {
    let mut t = Translation::default();
    let id_of = |node: &XmlNode, class: &str| {
        let key_path = dir.key_path(source, class)?;
        key_of(node, key_path).map(|k| IndividualId::new(class, k))
    };

    for m in dir.class_mappings().iter().filter(|m| m.source == source) {
        for node in nodes_at(doc, &m.element_location) {
            match id_of(node, &m.class_name) {
                Some(id) => {
                    if m.element_location.steps.len() >= whole_depth {
                        t.observations.insert(Observation {
                            source: source.to_string(),
                            location: m.element_location.clone(),
                            id: id.folded(),
                        });
                    }
                    t.graph.add_individual(id, source);
                }
                None => {
                    t.skipped += 1;
                    t.warnings.push(format!(
                        "{source}: {} element without a key at {}",
                        m.class_name, m.element_location
                    ));
                }
            }
        }
    }

    for m in dir.datatype_mappings().iter().filter(|m| m.source == source) {
        for node in nodes_at(doc, &m.domain_location) {
            let Some(id) = id_of(node, &m.domain_name) else { continue };
            for v in nodes_below(node, &m.value_location) {
                let value = normalize_value(&v.text());
                if !value.is_empty() {
                    t.graph.add_literal(id.clone(), &m.property_name, value, source);
                }
            }
        }
    }

    for m in dir.object_mappings().iter().filter(|m| m.source == source) {
        let a = m.ancestor();
        let below = |loc: &XPathExpr| {
            loc.relative_to(&a).unwrap_or(XPathExpr { absolute: false, steps: Vec::new() })
        };
        let (d_rel, r_rel) = (below(&m.domain_location), below(&m.range_location));
        for anc in nodes_at(doc, &a) {
            let froms: Vec<IndividualId> = nodes_below(anc, &d_rel)
                .into_iter()
                .filter_map(|n| id_of(n, &m.domain_name))
                .collect();
            if froms.is_empty() {
                continue;
            }
            let tos: Vec<IndividualId> = nodes_below(anc, &r_rel)
                .into_iter()
                .filter_map(|n| id_of(n, &m.range_name))
                .collect();
            for f in &froms {
                for r in &tos {
                    t.graph.add_edge(&m.property_name, f.clone(), r.clone(), source);
                }
            }
        }
    }
    t
}
