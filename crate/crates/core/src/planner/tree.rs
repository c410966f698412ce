//! Plan trees: nodes fetch instances, arcs follow object properties.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::template::{edge_query, literal_query, TemplateValue, XQueryTemplate};
use super::{form_groups, select_root, Group, GroupShape, PlanError};
use crate::cq::{ConjunctiveQuery, Term};
use crate::ontology::PredicateKind;
use crate::semdir::{Mapping, ObjectMapping, SemanticDirectory};
use crate::xsource::XPathExpr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Placement {
    Root,
    Arc,
    TypeCheck,
    Filter,
    Subsumed { by: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanNode {
    pub variable: String,
    /// The root group, or the object group of the arc leading here.
    pub group: usize,
    pub chosen_source: String,
    pub endpoint: String,
    pub ontology_terms: Vec<String>,
    pub resource_elements: Vec<String>,
    pub xquery_template: XQueryTemplate,
    /// Type checks and filters on the root variable; other variables carry
    /// theirs on the arc that binds them.
    pub filter_groups: Vec<usize>,
    pub children: Vec<PlanArc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanArc {
    pub object_property: String,
    pub group: usize,
    /// Body position of the object atom.
    pub atom: usize,
    /// The target variable was bound earlier; the arc only checks edges.
    pub rejoin: bool,
    pub target: PlanNode,
    pub type_check_group: Option<usize>,
    pub filter_groups: Vec<usize>,
    /// Arcs from the target to the nearest constant; `None` when no
    /// constant is reachable.
    pub constant_distance: Option<usize>,
    /// Siblings run stage by stage; within a stage they may overlap.
    pub stage: usize,
    pub parallel_ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanTree {
    pub query: ConjunctiveQuery,
    pub groups: Vec<Group>,
    pub placements: Vec<Placement>,
    pub root: PlanNode,
    pub ontology_iri: String,
    pub optimized: bool,
}

impl PlanTree {
    pub fn group(&self, i: usize) -> &Group {
        &self.groups[i]
    }

    pub fn root_group(&self) -> &Group {
        &self.groups[self.root.group]
    }

    /// Every arc, depth first in plan order.
    pub fn arcs(&self) -> Vec<&PlanArc> {
        fn walk<'a>(n: &'a PlanNode, out: &mut Vec<&'a PlanArc>) {
            for a in &n.children {
                out.push(a);
                walk(&a.target, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Range-side value tests that can be pushed into an edge query: the
/// filter property must be mapped for the range class only at this range
/// element of this source.
pub fn fold_tests(
    dir: &SemanticDirectory,
    m: &ObjectMapping,
    filters: &[(String, String)],
) -> Vec<(XPathExpr, String)> {
    let mut out = Vec::new();
    for (property, value) in filters {
        let ms: Vec<_> = dir
            .datatype_mappings_of(property)
            .into_iter()
            .filter(|d| d.domain_name == m.range_name)
            .collect();
        if let [only] = ms.as_slice() {
            if only.source == m.source && only.domain_location == m.range_location {
                out.push((only.value_location.clone(), value.clone()));
            }
        }
    }
    out
}

fn choose_source(dir: &SemanticDirectory, g: &Group, prefer: Option<&str>) -> String {
    let index_of = |s: &str| {
        g.mappings
            .iter()
            .filter(|m| m.source() == s)
            .map(Mapping::correspondence_index)
            .max()
            .unwrap_or(0)
    };
    let mut sources = g.sources.clone();
    sources.sort_by_key(|s| {
        (
            Some(s.as_str()) != prefer,
            std::cmp::Reverse(index_of(s)),
            dir.source_rank(s),
        )
    });
    sources.into_iter().next().expect("groups have sources")
}

fn endpoint(dir: &SemanticDirectory, source: &str) -> String {
    dir.source(source).map(|s| s.endpoint.clone()).unwrap_or_default()
}

struct ArcDraft {
    group: usize,
    atom: usize,
    target: usize,
    rejoin: bool,
}

struct NodeDraft {
    var: String,
    group: usize,
    arcs: Vec<ArcDraft>,
}

#[derive(Default)]
struct VarChecks {
    type_check: Option<usize>,
    filters: Vec<usize>,
}

/// Expands the tree breadth first from the root's subject.
pub fn build_plan(
    cq: &ConjunctiveQuery,
    groups: Vec<Group>,
    root: usize,
    dir: &SemanticDirectory,
) -> Result<PlanTree, PlanError> {
    let mut placements: Vec<Option<Placement>> = vec![None; groups.len()];
    placements[root] = Some(Placement::Root);
    let root_var = groups[root].subject().to_string();
    let mut nodes = vec![NodeDraft {
        var: root_var.clone(),
        group: root,
        arcs: Vec::new(),
    }];
    let mut bound: BTreeMap<String, usize> = BTreeMap::from([(root_var.clone(), 0)]);
    let mut checks: BTreeMap<String, VarChecks> = BTreeMap::new();

    let object_singletons: Vec<usize> = (0..groups.len())
        .filter(|&i| {
            groups[i].shape == GroupShape::PropertySingleton
                && groups[i].atoms[0].kind == Some(PredicateKind::ObjectProperty)
        })
        .collect();
    loop {
        let ready: Vec<usize> = object_singletons
            .iter()
            .copied()
            .filter(|&i| placements[i].is_none() && bound.contains_key(groups[i].subject()))
            .collect();
        if ready.is_empty() {
            break;
        }
        let snapshot = bound.clone();
        for i in ready {
            let atom = &groups[i].atoms[0];
            let parent = snapshot[groups[i].subject()];
            match &atom.args[1] {
                Term::Constant(_) => {
                    checks.entry(nodes[parent].var.clone()).or_default().filters.push(i);
                    placements[i] = Some(Placement::Filter);
                }
                Term::Variable(w) => {
                    let (target, rejoin) = match bound.get(w) {
                        Some(_) => (nodes.len(), true),
                        None => {
                            bound.insert(w.clone(), nodes.len());
                            (nodes.len(), false)
                        }
                    };
                    nodes.push(NodeDraft {
                        var: w.clone(),
                        group: i,
                        arcs: Vec::new(),
                    });
                    nodes[parent].arcs.push(ArcDraft {
                        group: i,
                        atom: groups[i].atom_indices[0],
                        target,
                        rejoin,
                    });
                    placements[i] = Some(Placement::Arc);
                }
            }
        }
    }
    let unreachable = |g: &Group| PlanError::Unreachable {
        group: g.label.clone(),
        atom: g.query_text(),
    };
    if let Some(&i) = object_singletons.iter().find(|&&i| placements[i].is_none()) {
        return Err(unreachable(&groups[i]));
    }

    // Datatype groups: the first group of each datatype atom is placed.
    let mut datatype_owner: BTreeMap<usize, usize> = BTreeMap::new();
    if let Some((ai, _)) = groups[root].property_atom() {
        datatype_owner.insert(ai, root);
    }
    for (i, g) in groups.iter().enumerate() {
        let Some((ai, atom)) = g.property_atom() else { continue };
        if atom.kind != Some(PredicateKind::DatatypeProperty) || i == root {
            continue;
        }
        if let Some(&owner) = datatype_owner.get(&ai) {
            placements[i] = Some(Placement::Subsumed {
                by: groups[owner].label.clone(),
            });
            continue;
        }
        if !bound.contains_key(g.subject()) {
            return Err(unreachable(g));
        }
        datatype_owner.insert(ai, i);
        checks.entry(g.subject().to_string()).or_default().filters.push(i);
        placements[i] = Some(Placement::Filter);
    }

    // Composite object groups are carried by their arc plus a type check.
    for (i, g) in groups.iter().enumerate() {
        if placements[i].is_some() || g.shape != GroupShape::Composite {
            continue;
        }
        let (ai, _) = g.property_atom().expect("composites have a property atom");
        let by = object_singletons
            .iter()
            .find(|&&s| groups[s].atom_indices[0] == ai)
            .map(|&s| groups[s].label.clone())
            .ok_or_else(|| unreachable(g))?;
        placements[i] = Some(Placement::Subsumed { by });
    }

    // Class singletons become type checks unless the root already holds the atom.
    for (i, g) in groups.iter().enumerate() {
        if g.shape != GroupShape::ClassSingleton {
            continue;
        }
        let ci = g.atom_indices[0];
        if groups[root].atom_indices.contains(&ci) {
            placements[i] = Some(Placement::Subsumed {
                by: groups[root].label.clone(),
            });
            continue;
        }
        if !bound.contains_key(g.subject()) {
            return Err(unreachable(g));
        }
        let c = checks.entry(g.subject().to_string()).or_default();
        if c.type_check.is_none() && g.subject() != root_var {
            c.type_check = Some(i);
        } else {
            c.filters.push(i);
        }
        placements[i] = Some(Placement::TypeCheck);
    }

    let placements: Vec<Placement> = placements
        .into_iter()
        .map(|p| p.expect("every group placed"))
        .collect();
    let mut covered = BTreeSet::new();
    for (g, p) in groups.iter().zip(&placements) {
        if !matches!(p, Placement::Subsumed { .. }) {
            covered.extend(g.atom_indices.iter().copied());
        }
    }
    if let Some(missing) = (0..cq.body.len()).find(|i| !covered.contains(i)) {
        return Err(PlanError::Unplaced(cq.body[missing].to_string()));
    }

    let root_source = choose_source(dir, &groups[root], None);
    let mut root_node = assemble_root(dir, &groups, root, &root_source, &nodes[0].var);
    let root_checks = checks.remove(&root_var).unwrap_or_default();
    root_node.filter_groups = root_checks.type_check.into_iter().chain(root_checks.filters).collect();
    let root_class = groups[root]
        .mappings
        .iter()
        .find_map(|m| match m {
            Mapping::Datatype(d) if d.source == root_source => Some(d.domain_name.clone()),
            _ => None,
        })
        .unwrap_or_default();
    root_node.children = assemble_arcs(dir, &groups, &nodes, 0, &root_source, &root_class, &checks);
    let n_children = root_node.children.len();
    for a in &mut root_node.children {
        a.parallel_ok = n_children > 1;
    }

    Ok(PlanTree {
        query: cq.clone(),
        groups,
        placements,
        root: root_node,
        ontology_iri: dir.ontology().base_iri().to_string(),
        optimized: false,
    })
}

fn assemble_root(dir: &SemanticDirectory, groups: &[Group], root: usize, source: &str, var: &str) -> PlanNode {
    let g = &groups[root];
    let (_, atom) = g.property_atom().expect("root groups carry a datatype atom");
    let value = atom.args[1].constant().expect("root atoms are instantiated").to_string();
    let m = g
        .mappings
        .iter()
        .find_map(|m| match m {
            Mapping::Datatype(d) if d.source == source => Some(d),
            _ => None,
        })
        .expect("chosen source has a rule");
    PlanNode {
        variable: var.to_string(),
        group: root,
        chosen_source: source.to_string(),
        endpoint: endpoint(dir, source),
        ontology_terms: g.atoms.iter().map(|a| a.predicate.clone()).collect(),
        resource_elements: vec![m.domain_location.to_string(), m.value_path().to_string()],
        xquery_template: literal_query(m, TemplateValue::Const(value)),
        filter_groups: Vec::new(),
        children: Vec::new(),
    }
}

fn constant_filters(groups: &[Group], filters: &[usize]) -> Vec<(String, String)> {
    filters
        .iter()
        .flat_map(|&i| groups[i].atoms.iter())
        .filter(|a| a.is_instantiated())
        .map(|a| (a.predicate.clone(), a.args[1].constant().unwrap().to_string()))
        .collect()
}

fn assemble_arcs(
    dir: &SemanticDirectory,
    groups: &[Group],
    nodes: &[NodeDraft],
    at: usize,
    parent_source: &str,
    parent_class: &str,
    checks: &BTreeMap<String, VarChecks>,
) -> Vec<PlanArc> {
    let empty = VarChecks::default();
    nodes[at]
        .arcs
        .iter()
        .map(|a| {
            let g = &groups[a.group];
            let target = &nodes[a.target];
            let c = if a.rejoin { &empty } else { checks.get(&target.var).unwrap_or(&empty) };
            let source = choose_source(dir, g, Some(parent_source));
            let rules: Vec<&ObjectMapping> = g
                .mappings
                .iter()
                .filter_map(|m| match m {
                    Mapping::Object(o) if o.source == source => Some(o),
                    _ => None,
                })
                .collect();
            // Prefer the rule whose domain is the class the parent yields.
            let m = rules
                .iter()
                .find(|o| o.domain_name == parent_class)
                .or(rules.first())
                .copied()
                .expect("chosen source has a rule");
            let folded = fold_tests(dir, m, &constant_filters(groups, &c.filters));
            let template = edge_query(
                dir,
                m,
                TemplateValue::Param(g.subject().to_string()),
                &folded,
            )
            .expect("mapped classes have key paths");
            let mut terms = vec![g.atoms[0].predicate.clone()];
            terms.extend(c.type_check.map(|t| groups[t].atoms[0].predicate.clone()));
            terms.extend(
                c.filters
                    .iter()
                    .filter_map(|&f| groups[f].property_atom().map(|(_, a)| a.predicate.clone())),
            );
            let children = if a.rejoin {
                Vec::new()
            } else {
                let mut ch = assemble_arcs(dir, groups, nodes, a.target, &source, &m.range_name, checks);
                let n = ch.len();
                for x in &mut ch {
                    x.parallel_ok = n > 1;
                }
                ch
            };
            PlanArc {
                object_property: g.atoms[0].predicate.clone(),
                group: a.group,
                atom: a.atom,
                rejoin: a.rejoin,
                target: PlanNode {
                    variable: target.var.clone(),
                    group: target.group,
                    chosen_source: source.clone(),
                    endpoint: endpoint(dir, &source),
                    ontology_terms: terms,
                    resource_elements: vec![m.domain_location.to_string(), m.range_location.to_string()],
                    xquery_template: template,
                    filter_groups: Vec::new(),
                    children,
                },
                type_check_group: c.type_check,
                filter_groups: c.filters.clone(),
                constant_distance: None,
                stage: 1,
                parallel_ok: false,
            }
        })
        .collect()
}

fn has_constant(tree_groups: &[Group], arc: &PlanArc) -> bool {
    arc.filter_groups
        .iter()
        .any(|&f| tree_groups[f].atoms.iter().any(|a| a.args.iter().skip(1).any(Term::is_constant)))
}

fn distance(groups: &[Group], arc: &PlanArc) -> Option<usize> {
    if has_constant(groups, arc) {
        return Some(0);
    }
    arc.target
        .children
        .iter()
        .filter(|c| !c.rejoin)
        .filter_map(|c| distance(groups, c))
        .min()
        .map(|d| d + 1)
}

/// Orders siblings by ascending constant-distance (unreachable last, then
/// body order). Arcs whose target is itself filtered by a constant form a
/// first stage; the rest follow, and siblings sharing a stage may overlap.
pub fn optimize_plan(mut tree: PlanTree) -> PlanTree {
    fn visit(groups: &[Group], node: &mut PlanNode) {
        for a in &mut node.children {
            a.constant_distance = distance(groups, a);
            a.stage = if a.constant_distance == Some(0) { 1 } else { 2 };
            visit(groups, &mut a.target);
        }
        node.children
            .sort_by_key(|a| (a.constant_distance.is_none(), a.constant_distance, a.atom));
        let stages: Vec<usize> = node.children.iter().map(|a| a.stage).collect();
        for a in &mut node.children {
            a.parallel_ok = stages.iter().filter(|&&s| s == a.stage).count() > 1;
        }
    }
    let groups = tree.groups.clone();
    visit(&groups, &mut tree.root);
    tree.optimized = true;
    tree
}

/// Groups, root, tree and reordering in one call.
pub fn plan_query(cq: &ConjunctiveQuery, dir: &SemanticDirectory) -> Result<PlanTree, PlanError> {
    let groups = form_groups(cq, dir)?;
    let root = select_root(cq, &groups)?;
    Ok(optimize_plan(build_plan(cq, groups, root, dir)?))
}

/// Concrete sub-query text for a node under variable bindings.
pub fn instantiate_node(node: &PlanNode, bindings: &BTreeMap<String, String>) -> Result<String, PlanError> {
    Ok(node.xquery_template.instantiate(bindings)?.to_string())
}
