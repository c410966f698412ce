//! Query planning: predicate groups, root selection, the plan tree and its
//! constant-distance reordering.

mod explain;
mod template;
mod tree;

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::cq::{Atom, ConjunctiveQuery, Term};
use crate::ontology::PredicateKind;
use crate::semdir::{Mapping, SemanticDirectory};

pub use explain::{render_groups, render_plan};
pub use template::{edge_query, key_query, literal_query, TemplateValue, XQueryTemplate};
pub use tree::{build_plan, fold_tests, instantiate_node, optimize_plan, plan_query, PlanArc, PlanNode, PlanTree, Placement};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PlanError {
    #[error("no predicate of the query is mapped by the selected sources")]
    NoMappedGroup,
    #[error("atom `{0}` is not covered by any mapped group")]
    Unplaced(String),
    #[error("no root: {0}")]
    NoRoot(String),
    #[error("group {group} is unreachable from the root (`{atom}`)")]
    Unreachable { group: String, atom: String },
    #[error("missing binding for `{0}`")]
    MissingBinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GroupShape {
    /// A class atom plus a property atom over the same subject.
    Composite,
    PropertySingleton,
    ClassSingleton,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Group {
    pub label: String,
    pub shape: GroupShape,
    /// Positions in the query body; a composite lists its class atom first.
    pub atom_indices: Vec<usize>,
    pub atoms: Vec<Atom>,
    /// Sources with a supporting rule, in registry order.
    pub sources: Vec<String>,
    #[serde(skip)]
    pub mappings: Vec<Mapping>,
    pub instantiated: bool,
}

impl Group {
    /// The variable the group is about: the class atom's variable or the
    /// property's first argument.
    pub fn subject(&self) -> &str {
        self.atoms[0].subject().expect("validated atoms have variable subjects")
    }

    /// The property atom, if any.
    pub fn property_atom(&self) -> Option<(usize, &Atom)> {
        self.atom_indices
            .iter()
            .zip(&self.atoms)
            .find(|(_, a)| a.kind != Some(PredicateKind::Class))
            .map(|(i, a)| (*i, a))
    }

    pub fn class_atom(&self) -> Option<(usize, &Atom)> {
        self.atom_indices
            .iter()
            .zip(&self.atoms)
            .find(|(_, a)| a.kind == Some(PredicateKind::Class))
            .map(|(i, a)| (*i, a))
    }

    pub fn vars(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(Atom::vars).collect()
    }

    pub fn has_datatype_constant(&self) -> bool {
        self.atoms.iter().any(Atom::is_instantiated)
    }

    /// The atoms as query text, e.g. `Protein(P), hasBibRef(P,BR)`.
    pub fn query_text(&self) -> String {
        self.atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
    }

    /// Atom and source content, ignoring labels.
    pub fn signature(&self) -> (Vec<String>, Vec<String>) {
        (self.atoms.iter().map(|a| a.to_string()).collect(), self.sources.clone())
    }
}

fn sources_of(dir: &SemanticDirectory, mappings: &[Mapping]) -> Vec<String> {
    let mut s: Vec<String> = mappings.iter().map(|m| m.source().to_string()).collect();
    s.sort_by_key(|n| dir.source_rank(n));
    s.dedup();
    s
}

fn property_mappings(dir: &SemanticDirectory, atom: &Atom, class: Option<&str>) -> Vec<Mapping> {
    let ont = dir.ontology();
    let fits = |domain: &str| class.map_or(true, |c| ont.subsumed(domain, c));
    match atom.kind {
        Some(PredicateKind::DatatypeProperty) => dir
            .datatype_mappings_of(&atom.predicate)
            .into_iter()
            .filter(|m| fits(&m.domain_name))
            .cloned()
            .map(Mapping::Datatype)
            .collect(),
        Some(PredicateKind::ObjectProperty) => dir
            .object_mappings_of(&atom.predicate)
            .into_iter()
            .filter(|m| fits(&m.domain_name))
            .cloned()
            .map(Mapping::Object)
            .collect(),
        _ => Vec::new(),
    }
}

/// Splits a validated query into mapped groups: composites in property
/// body order, then property singletons, then class singletons.
pub fn form_groups(cq: &ConjunctiveQuery, dir: &SemanticDirectory) -> Result<Vec<Group>, PlanError> {
    let class_atoms: Vec<(usize, &Atom)> = cq
        .body
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind == Some(PredicateKind::Class))
        .collect();
    let property_atoms: Vec<(usize, &Atom)> = cq
        .body
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind != Some(PredicateKind::Class))
        .collect();
    let mut groups: Vec<Group> = Vec::new();
    let mut push = |shape, idx: Vec<usize>, mappings: Vec<Mapping>| {
        let atoms: Vec<Atom> = idx.iter().map(|&i| cq.body[i].clone()).collect();
        let instantiated = atoms.iter().any(|a| a.args.iter().any(Term::is_constant));
        groups.push(Group {
            label: String::new(),
            shape,
            atom_indices: idx,
            atoms,
            sources: sources_of(dir, &mappings),
            mappings,
            instantiated,
        });
    };

    let mut composite_covered = BTreeSet::new();
    for &(pi, p) in &property_atoms {
        for &(ci, c) in &class_atoms {
            if c.subject() != p.subject() {
                continue;
            }
            let mappings = property_mappings(dir, p, Some(&c.predicate));
            if !mappings.is_empty() {
                composite_covered.insert(pi);
                push(GroupShape::Composite, vec![ci, pi], mappings);
            }
        }
    }
    for &(pi, p) in &property_atoms {
        // Datatype atoms already inside a mapped composite need no singleton.
        if p.kind == Some(PredicateKind::DatatypeProperty) && composite_covered.contains(&pi) {
            continue;
        }
        let mappings = property_mappings(dir, p, None);
        if !mappings.is_empty() {
            push(GroupShape::PropertySingleton, vec![pi], mappings);
        }
    }
    for &(ci, c) in &class_atoms {
        let mappings: Vec<Mapping> = dir
            .lookup_class(&c.predicate)
            .into_iter()
            .cloned()
            .map(Mapping::Class)
            .collect();
        if !mappings.is_empty() {
            push(GroupShape::ClassSingleton, vec![ci], mappings);
        }
    }
    if groups.is_empty() {
        return Err(PlanError::NoMappedGroup);
    }
    for (i, g) in groups.iter_mut().enumerate() {
        g.label = format!("G{}", i + 1);
    }
    Ok(groups)
}

/// Groups reachable from `start` by repeatedly absorbing groups whose
/// subject is already reached, and the variables they cover.
pub fn absorb<'a>(groups: &'a [Group], start: usize) -> (BTreeSet<usize>, BTreeSet<&'a str>) {
    let mut taken = BTreeSet::from([start]);
    let mut vars: BTreeSet<&str> = groups[start].vars();
    loop {
        let before = taken.len();
        for (i, g) in groups.iter().enumerate() {
            if !taken.contains(&i) && vars.contains(g.subject()) {
                taken.insert(i);
                vars.extend(g.vars());
            }
        }
        if taken.len() == before {
            return (taken, vars);
        }
    }
}

/// Picks the root among groups carrying a datatype constant: it must reach
/// every answer variable; the one reaching most groups wins, ties going to
/// the earliest atom.
pub fn select_root(cq: &ConjunctiveQuery, groups: &[Group]) -> Result<usize, PlanError> {
    let candidates: Vec<usize> = (0..groups.len())
        .filter(|&i| groups[i].has_datatype_constant())
        .collect();
    if candidates.is_empty() {
        return Err(PlanError::NoRoot("no group carries a constant".into()));
    }
    let mut best: Option<(usize, usize, usize)> = None;
    for i in candidates {
        let (taken, vars) = absorb(groups, i);
        if !cq.answer_vars.iter().all(|v| vars.contains(v.as_str())) {
            continue;
        }
        let first = *groups[i].atom_indices.iter().min().expect("groups have atoms");
        let better = match best {
            None => true,
            Some((_, n, f)) => taken.len() > n || (taken.len() == n && first < f),
        };
        if better {
            best = Some((i, taken.len(), first));
        }
    }
    best.map(|(i, _, _)| i).ok_or_else(|| {
        PlanError::NoRoot("no constant-carrying group reaches every answer variable".into())
    })
}
