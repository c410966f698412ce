use std::collections::{BTreeMap, BTreeSet};

use super::execute::RawResults;
use super::{fold_key, Edge, IndividualId, InstanceGraph, ResultSet, Value};
use crate::cq::{Atom, ConjunctiveQuery, Term};
use crate::ontology::{Ontology, PredicateKind};
use crate::xsource::normalize_value;

/// Every fact read during execution, as one graph.
pub fn link(raw: &RawResults) -> InstanceGraph {
    let mut g = InstanceGraph::default();
    for f in &raw.fetched {
        g.merge(&f.translation.graph);
    }
    g
}

/// Merges individuals with the same class and case-folded key. The merged
/// individual keeps the smallest spelling, so the result does not depend
/// on input order.
pub fn reconcile(graph: &InstanceGraph) -> InstanceGraph {
    let mut canon: BTreeMap<IndividualId, IndividualId> = BTreeMap::new();
    for id in graph.individuals.keys() {
        let slot = canon.entry(id.folded()).or_insert_with(|| id.clone());
        if id.key < slot.key {
            *slot = id.clone();
        }
    }
    let to_canon = |id: &IndividualId| canon[&id.folded()].clone();
    let mut out = InstanceGraph::default();
    for (id, ind) in &graph.individuals {
        let mut part = InstanceGraph::default();
        part.individuals.insert(to_canon(id), ind.clone());
        out.merge(&part);
    }
    for (e, src) in &graph.edges {
        out.edges
            .entry(Edge {
                property: e.property.clone(),
                from: to_canon(&e.from),
                to: to_canon(&e.to),
            })
            .or_default()
            .extend(src.iter().cloned());
    }
    out
}

struct Index<'g> {
    graph: &'g InstanceGraph,
    edges: BTreeMap<&'g str, Vec<&'g Edge>>,
}

type Binding = BTreeMap<String, Value>;

fn bound_value(b: &Binding, t: &Term) -> Option<Value> {
    match t {
        Term::Variable(v) => b.get(v).cloned(),
        Term::Constant(_) => None,
    }
}

fn is_bound(b: &Binding, t: &Term) -> bool {
    match t {
        Term::Variable(v) => b.contains_key(v),
        Term::Constant(_) => true,
    }
}

/// Extends a binding with `var = value`, failing on a conflict.
fn bind(b: &Binding, t: &Term, value: Value) -> Option<Binding> {
    match t {
        Term::Constant(_) => Some(b.clone()),
        Term::Variable(v) => match b.get(v) {
            Some(existing) if *existing != value => None,
            Some(_) => Some(b.clone()),
            None => {
                let mut nb = b.clone();
                nb.insert(v.clone(), value);
                Some(nb)
            }
        },
    }
}

impl<'g> Index<'g> {
    fn new(graph: &'g InstanceGraph) -> Self {
        let mut edges: BTreeMap<&str, Vec<&Edge>> = BTreeMap::new();
        for e in graph.edges.keys() {
            edges.entry(e.property.as_str()).or_default().push(e);
        }
        Index { graph, edges }
    }

    /// Extensions of `b` satisfying `atom`, each with the edge it used.
    fn matches(&self, ont: &Ontology, atom: &Atom, b: &Binding) -> Vec<(Binding, Option<&'g Edge>)> {
        let mut out = Vec::new();
        let subject = &atom.args[0];
        let subject_ok = |id: &IndividualId| match bound_value(b, subject) {
            Some(v) => v.as_individual().as_ref() == Some(id),
            None => true,
        };
        match atom.kind {
            Some(PredicateKind::Class) => {
                for id in self.graph.individuals.keys() {
                    if subject_ok(id) && ont.subsumed(&id.class, &atom.predicate) {
                        out.extend(bind(b, subject, Value::individual(id)).map(|nb| (nb, None)));
                    }
                }
            }
            Some(PredicateKind::DatatypeProperty) => {
                let object = &atom.args[1];
                let wanted = match object {
                    Term::Constant(c) => Some(normalize_value(c)),
                    Term::Variable(_) => None,
                };
                for (id, ind) in &self.graph.individuals {
                    if !subject_ok(id) {
                        continue;
                    }
                    let Some(values) = ind.literals.get(&atom.predicate) else { continue };
                    for v in values.keys() {
                        if wanted.as_ref().is_some_and(|w| w != v) {
                            continue;
                        }
                        let lit = Value::Literal { value: v.clone() };
                        if let Some(nb) = bind(b, subject, Value::individual(id)).and_then(|nb| bind(&nb, object, lit)) {
                            out.push((nb, None));
                        }
                    }
                }
            }
            _ => {
                let object = &atom.args[1];
                let Some(edges) = self.edges.get(atom.predicate.as_str()) else { return out };
                for e in edges {
                    if !subject_ok(&e.from) {
                        continue;
                    }
                    if let Term::Constant(c) = object {
                        if fold_key(&e.to.key) != fold_key(&normalize_value(c)) {
                            continue;
                        }
                    }
                    if let Some(nb) = bind(b, subject, Value::individual(&e.from))
                        .and_then(|nb| bind(&nb, object, Value::individual(&e.to)))
                    {
                        out.push((nb, Some(*e)));
                    }
                }
            }
        }
        out
    }
}

/// Rows of the query over the graph, with the graph cut down to the
/// individuals and edges of some solution.
pub fn filter_answers(graph: &InstanceGraph, cq: &ConjunctiveQuery, ont: &Ontology) -> ResultSet {
    let index = Index::new(graph);
    let mut rows: BTreeSet<Vec<Value>> = BTreeSet::new();
    let mut used_inds: BTreeSet<IndividualId> = BTreeSet::new();
    let mut used_edges: BTreeSet<&Edge> = BTreeSet::new();

    // Depth-first over atoms, always taking the remaining atom with the
    // most bound arguments next.
    fn solve<'g>(
        index: &Index<'g>,
        ont: &Ontology,
        cq: &ConjunctiveQuery,
        done: &mut Vec<bool>,
        b: Binding,
        edges: &mut Vec<&'g Edge>,
        emit: &mut dyn FnMut(&Binding, &[&'g Edge]),
    ) {
        let next = (0..cq.body.len())
            .filter(|&i| !done[i])
            .max_by_key(|&i| {
                let bound = cq.body[i].args.iter().filter(|t| is_bound(&b, t)).count();
                (bound, std::cmp::Reverse(i))
            });
        let Some(i) = next else {
            emit(&b, edges);
            return;
        };
        done[i] = true;
        for (nb, e) in index.matches(ont, &cq.body[i], &b) {
            if let Some(e) = e {
                edges.push(e);
            }
            solve(index, ont, cq, done, nb, edges, emit);
            if e.is_some() {
                edges.pop();
            }
        }
        done[i] = false;
    }

    let mut done = vec![false; cq.body.len()];
    let mut edge_stack = Vec::new();
    solve(
        &index,
        ont,
        cq,
        &mut done,
        Binding::new(),
        &mut edge_stack,
        &mut |b, es| {
            rows.insert(cq.answer_vars.iter().map(|v| b[v].clone()).collect());
            used_inds.extend(b.values().filter_map(Value::as_individual));
            used_edges.extend(es.iter().copied());
        },
    );

    let mut slice = InstanceGraph::default();
    for id in used_inds {
        if let Some(ind) = graph.individuals.get(&id) {
            slice.individuals.insert(id, ind.clone());
        }
    }
    for e in used_edges {
        slice.edges.insert(e.clone(), graph.edges[e].clone());
    }
    ResultSet {
        answer_vars: cq.answer_vars.clone(),
        rows: rows.into_iter().collect(),
        graph: slice,
        provenance: Vec::new(),
        base_iri: ont.base_iri().to_string(),
    }
}
