//! Runs a plan tree against the data services.
//!
//! Each variable of the tree holds a candidate set of individuals (by
//! folded identity). The root's literal query seeds it; every arc fetches
//! the edges of its parent's candidates, checks and filters the targets,
//! runs the target's own arcs, and keeps only the parents still connected
//! to a surviving target. Identical sub-queries are issued once per
//! request.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use super::translate::{translate, Observation, Translation};
use super::{fold_key, IndividualId, IntegrationError};
use crate::cq::{Atom, Term};
use crate::ontology::PredicateKind;
use crate::planner::{edge_query, fold_tests, key_query, literal_query, PlanArc, PlanNode, PlanTree, TemplateValue};
use crate::semdir::{Mapping, SemanticDirectory};
use crate::xsource::{normalize_value, parse_xml, DataService, ProvenanceRecord, ServiceError, XPathExpr};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct CallRecord {
    pub source: String,
    pub endpoint: String,
    pub query: String,
}

#[derive(Debug, Clone)]
pub struct Fetched {
    pub call: CallRecord,
    pub provenance: ProvenanceRecord,
    pub translation: Translation,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VarTrace {
    /// Candidates when the variable was first reached.
    pub reached: BTreeSet<IndividualId>,
    /// Candidates left after its checks and arcs.
    pub kept: BTreeSet<IndividualId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExecReport {
    /// Sorted by source, then query text.
    pub calls: Vec<CallRecord>,
    pub calls_per_source: BTreeMap<String, usize>,
    pub variables: BTreeMap<String, VarTrace>,
    /// Candidates removed because their class failed a class atom.
    pub type_check_drops: usize,
    /// Instance elements without a key.
    pub skipped_elements: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct RawResults {
    /// In call order after sorting by source and query.
    pub fetched: Vec<Fetched>,
    pub report: ExecReport,
}

#[derive(Default)]
struct State {
    observed: BTreeSet<Observation>,
    spellings: BTreeMap<IndividualId, BTreeSet<String>>,
    literals: BTreeMap<IndividualId, BTreeMap<String, BTreeSet<String>>>,
    edges: BTreeMap<String, BTreeSet<(IndividualId, IndividualId)>>,
    fetched: Vec<Fetched>,
    traces: BTreeMap<String, VarTrace>,
    type_check_drops: usize,
}

type Cell = Arc<OnceLock<Result<(), IntegrationError>>>;

struct Exec<'a> {
    tree: &'a PlanTree,
    dir: &'a SemanticDirectory,
    services: &'a BTreeMap<String, Arc<dyn DataService>>,
    cache: Mutex<HashMap<(String, String), Cell>>,
    state: Mutex<State>,
}

type Cands = BTreeSet<IndividualId>;

/// Executes an optimized plan. Sub-queries go only to sources of the
/// directory; a transport or service failure aborts with that source's
/// error.
pub fn execute_plan(
    tree: &PlanTree,
    dir: &SemanticDirectory,
    services: &BTreeMap<String, Arc<dyn DataService>>,
) -> Result<RawResults, IntegrationError> {
    let ex = Exec {
        tree,
        dir,
        services,
        cache: Mutex::new(HashMap::new()),
        state: Mutex::new(State::default()),
    };
    let seeds = ex.run_root()?;
    ex.run_var(&tree.root, &tree.root.filter_groups, seeds)?;

    let state = ex.state.into_inner().expect("no panics while holding the lock");
    let mut fetched = state.fetched;
    fetched.sort_by(|a, b| a.call.cmp(&b.call));
    let mut report = ExecReport {
        calls: fetched.iter().map(|f| f.call.clone()).collect(),
        type_check_drops: state.type_check_drops,
        ..Default::default()
    };
    for f in &fetched {
        *report.calls_per_source.entry(f.call.source.clone()).or_default() += 1;
        report.skipped_elements += f.translation.skipped;
        report.warnings.extend(f.translation.warnings.iter().cloned());
    }
    let canon = |set: &Cands| -> Cands {
        set.iter()
            .map(|id| {
                let key = state
                    .spellings
                    .get(id)
                    .and_then(|s| s.iter().next().cloned())
                    .unwrap_or_else(|| id.key.clone());
                IndividualId::new(id.class.clone(), key)
            })
            .collect()
    };
    report.variables = state
        .traces
        .iter()
        .map(|(v, t)| {
            (
                v.clone(),
                VarTrace {
                    reached: canon(&t.reached),
                    kept: canon(&t.kept),
                },
            )
        })
        .collect();
    Ok(RawResults { fetched, report })
}

fn group_atoms<'t>(tree: &'t PlanTree, groups: &[usize]) -> Vec<&'t Atom> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &g in groups {
        for (&i, a) in tree.groups[g].atom_indices.iter().zip(&tree.groups[g].atoms) {
            if seen.insert(i) {
                out.push(a);
            }
        }
    }
    out
}

fn constant_filters(atoms: &[&Atom]) -> Vec<(String, String)> {
    atoms
        .iter()
        .filter(|a| a.is_instantiated())
        .map(|a| (a.predicate.clone(), a.args[1].constant().unwrap_or_default().to_string()))
        .collect()
}

impl Exec<'_> {
    fn service(&self, source: &str) -> Result<&Arc<dyn DataService>, IntegrationError> {
        self.services
            .get(source)
            .ok_or_else(|| IntegrationError::MissingService(source.to_string()))
    }

    /// Issues a sub-query once per request and folds its answer into the
    /// request state.
    fn call(&self, source: &str, query: String, whole_depth: usize) -> Result<(), IntegrationError> {
        let cell: Cell = {
            let mut cache = self.cache.lock().expect("cache lock");
            cache.entry((source.to_string(), query.clone())).or_default().clone()
        };
        cell.get_or_init(|| {
            let svc = self.service(source)?;
            let resp = svc.query(&query)?;
            let doc = parse_xml(&resp.xml).map_err(|e| ServiceError::Internal {
                source_name: source.to_string(),
                message: format!("unparsable result: {e}"),
            })?;
            let translation = translate(&doc, source, self.dir, whole_depth);
            let mut st = self.state.lock().expect("state lock");
            st.observed.extend(translation.observations.iter().cloned());
            for (id, ind) in &translation.graph.individuals {
                let f = id.folded();
                st.spellings.entry(f.clone()).or_default().insert(id.key.clone());
                let lits = st.literals.entry(f).or_default();
                for (p, values) in &ind.literals {
                    lits.entry(p.clone()).or_default().extend(values.keys().cloned());
                }
            }
            for e in translation.graph.edges.keys() {
                st.edges
                    .entry(e.property.clone())
                    .or_default()
                    .insert((e.from.folded(), e.to.folded()));
            }
            st.fetched.push(Fetched {
                call: CallRecord {
                    source: source.to_string(),
                    endpoint: svc.endpoint().to_string(),
                    query,
                },
                provenance: resp.provenance,
                translation,
            });
            Ok(())
        })
        .clone()
    }

    fn spellings(&self, id: &IndividualId) -> Vec<String> {
        let st = self.state.lock().expect("state lock");
        st.spellings.get(id).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    fn observed(&self, source: &str, location: &XPathExpr, id: &IndividualId) -> bool {
        let st = self.state.lock().expect("state lock");
        st.observed.contains(&Observation {
            source: source.to_string(),
            location: location.clone(),
            id: id.clone(),
        })
    }

    fn run_root(&self) -> Result<Cands, IntegrationError> {
        let g = self.tree.root_group();
        let (_, atom) = g.property_atom().expect("root groups carry a datatype atom");
        let value = atom.args[1].constant().expect("root atoms are instantiated");
        let mut classes = BTreeSet::new();
        for m in &g.mappings {
            if let Mapping::Datatype(m) = m {
                let text = literal_query(m, TemplateValue::Const(value.to_string()))
                    .concrete()
                    .expect("constant template")
                    .to_string();
                self.call(&m.source, text, m.domain_location.steps.len())?;
                classes.insert(m.domain_name.clone());
            }
        }
        let wanted = normalize_value(value);
        let st = self.state.lock().expect("state lock");
        Ok(st
            .literals
            .iter()
            .filter(|(id, lits)| {
                classes.contains(&id.class)
                    && lits.get(&atom.predicate).is_some_and(|v| v.contains(&wanted))
            })
            .map(|(id, _)| id.clone())
            .collect())
    }

    fn run_var(&self, node: &PlanNode, checks: &[usize], mut cands: Cands) -> Result<Cands, IntegrationError> {
        self.state
            .lock()
            .expect("state lock")
            .traces
            .entry(node.variable.clone())
            .or_default()
            .reached
            .extend(cands.iter().cloned());
        let atoms = group_atoms(self.tree, checks);
        let (early, late): (Vec<&Atom>, Vec<&Atom>) = atoms
            .into_iter()
            .partition(|a| a.kind != Some(PredicateKind::DatatypeProperty) || a.is_instantiated());
        for a in &early {
            cands = self.apply(a, cands)?;
        }

        let mut stages: BTreeMap<usize, Vec<&PlanArc>> = BTreeMap::new();
        for arc in &node.children {
            stages.entry(arc.stage).or_default().push(arc);
        }
        for arcs in stages.values() {
            if cands.is_empty() {
                break;
            }
            let results: Vec<Result<Cands, IntegrationError>> = if arcs.len() > 1 && arcs.iter().all(|a| a.parallel_ok) {
                std::thread::scope(|s| {
                    let handles: Vec<_> = arcs.iter().map(|a| s.spawn(|| self.run_arc(a, &cands))).collect();
                    handles
                        .into_iter()
                        .map(|h| h.join().expect("arc worker panicked"))
                        .collect()
                })
            } else {
                arcs.iter().map(|a| self.run_arc(a, &cands)).collect()
            };
            for r in results {
                let kept = r?;
                cands = cands.intersection(&kept).cloned().collect();
            }
        }

        for a in &late {
            if cands.is_empty() {
                break;
            }
            cands = self.apply(a, cands)?;
        }
        self.state
            .lock()
            .expect("state lock")
            .traces
            .entry(node.variable.clone())
            .or_default()
            .kept
            .extend(cands.iter().cloned());
        Ok(cands)
    }

    fn run_arc(&self, arc: &PlanArc, parents: &Cands) -> Result<Cands, IntegrationError> {
        let checks: Vec<usize> = arc.type_check_group.into_iter().chain(arc.filter_groups.iter().copied()).collect();
        let folded = constant_filters(&group_atoms(self.tree, &arc.filter_groups));
        self.fetch_edges(&arc.object_property, parents, &folded)?;
        if arc.rejoin {
            return Ok(parents.clone());
        }
        let edges = self.edges_from(&arc.object_property, parents);
        let targets: Cands = edges.iter().map(|(_, t)| t.clone()).collect();
        if targets.is_empty() {
            return Ok(Cands::new());
        }
        let kept = self.run_var(&arc.target, &checks, targets)?;
        Ok(edges
            .into_iter()
            .filter(|(_, t)| kept.contains(t))
            .map(|(f, _)| f)
            .collect())
    }

    fn edges_from(&self, property: &str, from: &Cands) -> Vec<(IndividualId, IndividualId)> {
        let st = self.state.lock().expect("state lock");
        st.edges
            .get(property)
            .map(|e| e.iter().filter(|(f, _)| from.contains(f)).cloned().collect())
            .unwrap_or_default()
    }

    /// Makes the edges of `property` leaving `cands` complete.
    fn fetch_edges(&self, property: &str, cands: &Cands, filters: &[(String, String)]) -> Result<(), IntegrationError> {
        for m in self.dir.object_mappings_of(property) {
            let a = m.ancestor();
            let tests = fold_tests(self.dir, m, filters);
            for x in cands.iter().filter(|x| x.class == m.domain_name) {
                if a == m.domain_location && self.observed(&m.source, &m.domain_location, x) {
                    continue;
                }
                for spelling in self.spellings(x) {
                    let Some(t) = edge_query(self.dir, m, TemplateValue::Const(spelling), &tests) else {
                        continue;
                    };
                    let text = t.concrete().expect("constant template").to_string();
                    self.call(&m.source, text, a.steps.len())?;
                }
            }
        }
        Ok(())
    }

    /// Makes the literals of `property` on `cands` complete.
    fn fetch_literals(&self, property: &str, cands: &Cands) -> Result<(), IntegrationError> {
        for m in self.dir.datatype_mappings_of(property) {
            for x in cands.iter().filter(|x| x.class == m.domain_name) {
                if self.observed(&m.source, &m.domain_location, x) {
                    continue;
                }
                for spelling in self.spellings(x) {
                    let Some(t) = key_query(self.dir, &m.source, &m.domain_location, &x.class, TemplateValue::Const(spelling))
                    else {
                        continue;
                    };
                    let text = t.concrete().expect("constant template").to_string();
                    self.call(&m.source, text, m.domain_location.steps.len())?;
                }
            }
        }
        Ok(())
    }

    fn apply(&self, atom: &Atom, cands: Cands) -> Result<Cands, IntegrationError> {
        let ont = self.dir.ontology();
        match atom.kind {
            Some(PredicateKind::Class) => {
                let before = cands.len();
                let kept: Cands = cands.into_iter().filter(|x| ont.subsumed(&x.class, &atom.predicate)).collect();
                self.state.lock().expect("state lock").type_check_drops += before - kept.len();
                Ok(kept)
            }
            Some(PredicateKind::DatatypeProperty) => {
                self.fetch_literals(&atom.predicate, &cands)?;
                let wanted = atom.args[1].constant().map(normalize_value);
                let st = self.state.lock().expect("state lock");
                Ok(cands
                    .into_iter()
                    .filter(|x| {
                        let values = st.literals.get(x).and_then(|l| l.get(&atom.predicate));
                        match (&wanted, values) {
                            (_, None) => false,
                            (None, Some(v)) => !v.is_empty(),
                            (Some(w), Some(v)) => v.contains(w),
                        }
                    })
                    .collect())
            }
            _ => {
                self.fetch_edges(&atom.predicate, &cands, &[])?;
                let edges = self.edges_from(&atom.predicate, &cands);
                let target = match &atom.args[1] {
                    Term::Constant(c) => Some(fold_key(&normalize_value(c))),
                    Term::Variable(_) => None,
                };
                Ok(edges
                    .into_iter()
                    .filter(|(_, t)| target.as_ref().is_none_or(|k| &t.key == k))
                    .map(|(f, _)| f)
                    .collect())
            }
        }
    }
}
