//! Plan execution and result integration: XML answers become ontology
//! individuals, are linked by object properties, reconciled across sources
//! and joined into answer rows.

mod answer;
mod execute;
mod serialize;
mod translate;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::xsource::{ProvenanceRecord, ServiceError};

pub use answer::{filter_answers, link, reconcile};
pub use execute::{execute_plan, CallRecord, ExecReport, Fetched, RawResults};
pub use serialize::{individual_iri, serialize, Format};
pub use translate::{nodes_at, nodes_below, translate, Observation, Translation};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IntegrationError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("no data service registered for source `{0}`")]
    MissingService(String),
    #[error("unknown output format `{0}` (expected rdf, xml, html or json)")]
    UnknownFormat(String),
}

/// Key comparison used for reconciliation.
pub fn fold_key(key: &str) -> String {
    key.to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct IndividualId {
    pub class: String,
    pub key: String,
}

impl IndividualId {
    pub fn new(class: impl Into<String>, key: impl Into<String>) -> Self {
        IndividualId {
            class: class.into(),
            key: key.into(),
        }
    }

    /// The identity used for reconciliation: class plus case-folded key.
    pub fn folded(&self) -> IndividualId {
        IndividualId::new(self.class.clone(), fold_key(&self.key))
    }
}

impl std::fmt::Display for IndividualId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.class, self.key)
    }
}

/// Source names supporting a fact.
pub type Sources = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Individual {
    /// property -> value -> sources
    pub literals: BTreeMap<String, BTreeMap<String, Sources>>,
    /// Sources the individual itself was read from.
    pub sources: Sources,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub property: String,
    pub from: IndividualId,
    pub to: IndividualId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct InstanceGraph {
    #[serde(serialize_with = "ser_individuals")]
    pub individuals: BTreeMap<IndividualId, Individual>,
    #[serde(serialize_with = "ser_edges")]
    pub edges: BTreeMap<Edge, Sources>,
}

fn ser_individuals<S: serde::Serializer>(
    m: &BTreeMap<IndividualId, Individual>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|(id, ind)| {
        serde_json::json!({
            "class": id.class,
            "key": id.key,
            "sources": ind.sources,
            "literals": ind.literals,
        })
    }))
}

fn ser_edges<S: serde::Serializer>(m: &BTreeMap<Edge, Sources>, s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(m.iter().map(|(e, src)| {
        serde_json::json!({
            "property": e.property,
            "from": e.from,
            "to": e.to,
            "sources": src,
        })
    }))
}

impl InstanceGraph {
    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty() && self.edges.is_empty()
    }

    pub fn add_individual(&mut self, id: IndividualId, source: &str) -> &mut Individual {
        let ind = self.individuals.entry(id).or_default();
        ind.sources.insert(source.to_string());
        ind
    }

    pub fn add_literal(&mut self, id: IndividualId, property: &str, value: String, source: &str) {
        self.add_individual(id, source)
            .literals
            .entry(property.to_string())
            .or_default()
            .entry(value)
            .or_default()
            .insert(source.to_string());
    }

    pub fn add_edge(&mut self, property: &str, from: IndividualId, to: IndividualId, source: &str) {
        self.add_individual(from.clone(), source);
        self.add_individual(to.clone(), source);
        self.edges
            .entry(Edge {
                property: property.to_string(),
                from,
                to,
            })
            .or_default()
            .insert(source.to_string());
    }

    /// Set union, provenance included.
    pub fn merge(&mut self, other: &InstanceGraph) {
        for (id, ind) in &other.individuals {
            let mine = self.individuals.entry(id.clone()).or_default();
            mine.sources.extend(ind.sources.iter().cloned());
            for (p, values) in &ind.literals {
                let slot = mine.literals.entry(p.clone()).or_default();
                for (v, src) in values {
                    slot.entry(v.clone()).or_default().extend(src.iter().cloned());
                }
            }
        }
        for (e, src) in &other.edges {
            self.edges.entry(e.clone()).or_default().extend(src.iter().cloned());
        }
    }

    /// Every source named by any fact.
    pub fn sources(&self) -> Sources {
        let mut out = Sources::new();
        for ind in self.individuals.values() {
            out.extend(ind.sources.iter().cloned());
            for values in ind.literals.values() {
                for src in values.values() {
                    out.extend(src.iter().cloned());
                }
            }
        }
        for src in self.edges.values() {
            out.extend(src.iter().cloned());
        }
        out
    }
}

/// A row cell: an individual or a literal value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Value {
    Individual { class: String, key: String },
    Literal { value: String },
}

impl Value {
    pub fn individual(id: &IndividualId) -> Self {
        Value::Individual {
            class: id.class.clone(),
            key: id.key.clone(),
        }
    }

    pub fn as_individual(&self) -> Option<IndividualId> {
        match self {
            Value::Individual { class, key } => Some(IndividualId::new(class.clone(), key.clone())),
            Value::Literal { .. } => None,
        }
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Individual { class, key } => write!(f, "{class}/{key}"),
            Value::Literal { value } => write!(f, "{value:?}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResultSet {
    pub answer_vars: Vec<String>,
    /// Distinct rows in sorted order.
    pub rows: Vec<Vec<Value>>,
    /// Individuals and edges taking part in some solution.
    pub graph: InstanceGraph,
    /// One record per source called while answering.
    pub provenance: Vec<ProvenanceRecord>,
    pub base_iri: String,
}

impl ResultSet {
    pub fn empty(answer_vars: Vec<String>, base_iri: &str) -> Self {
        ResultSet {
            answer_vars,
            rows: Vec::new(),
            graph: InstanceGraph::default(),
            provenance: Vec::new(),
            base_iri: base_iri.to_string(),
        }
    }

    /// Values bound to an answer variable across all rows.
    pub fn column(&self, var: &str) -> BTreeSet<Value> {
        match self.answer_vars.iter().position(|v| v == var) {
            Some(i) => self.rows.iter().map(|r| r[i].clone()).collect(),
            None => BTreeSet::new(),
        }
    }
}

/// Executes a plan and integrates the answers: link, reconcile, filter.
/// The result carries one provenance record per source called.
pub fn answer_plan(
    tree: &crate::planner::PlanTree,
    dir: &crate::semdir::SemanticDirectory,
    services: &BTreeMap<String, std::sync::Arc<dyn crate::xsource::DataService>>,
) -> Result<(ResultSet, RawResults), IntegrationError> {
    let raw = execute_plan(tree, dir, services)?;
    let graph = reconcile(&link(&raw));
    let mut rs = filter_answers(&graph, &tree.query, dir.ontology());
    let mut seen = BTreeSet::new();
    for f in &raw.fetched {
        if seen.insert(f.call.source.clone()) {
            rs.provenance.push(f.provenance.clone());
        }
    }
    rs.provenance.sort_by(|a, b| a.source.cmp(&b.source));
    Ok((rs, raw))
}
