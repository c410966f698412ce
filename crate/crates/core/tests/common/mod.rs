//! Shared test support: a random world rendered as the five source
//! documents, a generator of tree-shaped queries over it, and a
//! nested-loop evaluator over the facts each document states.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use medley_core::fixtures;
use medley_core::integrator::Value;
use medley_core::mediator::{Mediator, MediatorConfig, MediatorError, QueryRequest};
use medley_core::ontology::Ontology;
use medley_core::xsource::{DataService, FixtureService, ProvenanceRecord, ServiceError, ServiceResponse};

pub mod cases;
pub mod xref;

pub use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub const SOURCE_NAMES: [&str; 5] = ["sgd", "yeastract", "mips", "biogrid", "phosphogrid"];

const PROTEINS: [&str; 10] = ["TOP3", "Top1", "SGS1", "Rmi1", "Fhl1p", "Hsf1p", "Swi4p", "Abf1", "Ume6", "Cdc28"];
const FACTORS: [&str; 6] = ["Fhl1p", "Hsf1p", "Swi4p", "Abf1", "Ume6", "Mcm1"];
const GENES: [&str; 7] = ["TOP3", "FHL1", "SGS1", "RMI1", "IFH1", "HSF1", "CDC28"];
const CHROMOSOMES: [&str; 4] = ["I", "IV", "XII", "XVI"];
const DESCRIPTIONS: [&str; 5] = [
    "DNA Topoisomerase III",
    "RecQ helicase",
    "Forkhead transcription factor",
    "Heat shock factor",
    "Cyclin-dependent kinase",
];
const TITLES: [&str; 4] = [
    "Isolation of a yeast gene",
    "Topoisomerase III acts with a RecQ helicase",
    "Heat shock response",
    "Cell cycle control",
];
const CATEGORY_TITLES: [&str; 3] = ["DNA repair", "mRNA synthesis", "Cell cycle"];
const RESIDUES: [&str; 3] = ["S", "T", "Y"];

/// (class, key)
pub type Ind = (String, String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Fact {
    Type { source: String, ind: Ind },
    Literal { source: String, ind: Ind, prop: String, value: String },
    Edge { source: String, prop: String, from: Ind, to: Ind },
}

impl Fact {
    pub fn source(&self) -> &str {
        match self {
            Fact::Type { source, .. } | Fact::Literal { source, .. } | Fact::Edge { source, .. } => source,
        }
    }
}

pub struct World {
    pub docs: BTreeMap<String, String>,
    pub facts: BTreeSet<Fact>,
}

fn ind(class: &str, key: &str) -> Ind {
    (class.to_string(), key.to_string())
}

fn el(name: &str, inner: &str) -> String {
    format!("<{name}>{inner}</{name}>")
}

/// Per-entity attributes, drawn once so every rendering agrees.
struct Attrs<'r> {
    rng: &'r mut ChaCha8Rng,
    sysnames: BTreeMap<String, Option<String>>,
    descriptions: BTreeMap<String, Vec<String>>,
    gene_descriptions: BTreeMap<String, Option<String>>,
    titles: BTreeMap<String, Option<String>>,
    category_titles: BTreeMap<String, Option<String>>,
    residues: BTreeMap<String, Option<String>>,
}

impl<'r> Attrs<'r> {
    fn sysname(&mut self, name: &str) -> Option<String> {
        let rng = &mut *self.rng;
        self.sysnames
            .entry(name.to_string())
            .or_insert_with(|| {
                rng.gen_bool(0.7).then(|| {
                    let chr = ['A', 'B', 'L', 'P'][rng.gen_range(0..4)];
                    format!("Y{chr}R{:03}W", rng.gen_range(1..400))
                })
            })
            .clone()
    }

    fn descriptions(&mut self, name: &str) -> Vec<String> {
        let rng = &mut *self.rng;
        self.descriptions
            .entry(name.to_string())
            .or_insert_with(|| {
                let n = rng.gen_range(0..3);
                let mut d: Vec<String> = DESCRIPTIONS.choose_multiple(rng, n).map(|s| s.to_string()).collect();
                d.sort();
                d
            })
            .clone()
    }

    fn optional(rng: &mut ChaCha8Rng, map: &mut BTreeMap<String, Option<String>>, key: &str, pool: &[&str], p: f64) -> Option<String> {
        map.entry(key.to_string())
            .or_insert_with(|| rng.gen_bool(p).then(|| pool.choose(rng).unwrap().to_string()))
            .clone()
    }
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], lo: usize, hi: usize) -> Vec<&'a str> {
    let n = rng.gen_range(lo..=hi.min(pool.len()));
    let mut v: Vec<&str> = pool.choose_multiple(rng, n).copied().collect();
    v.shuffle(rng);
    v
}

impl World {
    /// A random world. Keys are spelled the same everywhere and an element
    /// at a given location always carries the same content for the same key.
    pub fn generate(rng: &mut ChaCha8Rng) -> World {
        let mut facts = BTreeSet::new();
        let mut docs = BTreeMap::new();
        let mut a = Attrs {
            rng,
            sysnames: BTreeMap::new(),
            descriptions: BTreeMap::new(),
            gene_descriptions: BTreeMap::new(),
            titles: BTreeMap::new(),
            category_titles: BTreeMap::new(),
            residues: BTreeMap::new(),
        };
        let mut add = |f: Fact| {
            facts.insert(f);
        };
        let ty = |s: &str, c: &str, k: &str| Fact::Type { source: s.into(), ind: ind(c, k) };
        let lit = |s: &str, c: &str, k: &str, p: &str, v: &str| Fact::Literal {
            source: s.into(),
            ind: ind(c, k),
            prop: p.into(),
            value: v.into(),
        };
        let edge = |s: &str, p: &str, from: Ind, to: Ind| Fact::Edge { source: s.into(), prop: p.into(), from, to };

        // sgd
        let mut entries = String::new();
        for p in pick(a.rng, &PROTEINS, 1, 6) {
            add(ty("sgd", "Protein", p));
            add(lit("sgd", "Protein", p, "hasName", p));
            let mut inner = el("Name", p);
            for d in a.descriptions(p) {
                add(lit("sgd", "Protein", p, "hasDescription", &d));
                inner += &el("Description", &d);
            }
            if a.rng.gen_bool(0.6) {
                let g = *GENES.choose(a.rng).unwrap();
                add(ty("sgd", "Gene", g));
                add(lit("sgd", "Gene", g, "hasName", g));
                add(edge("sgd", "codedBy", ind("Protein", p), ind("Gene", g)));
                inner += &el("Gene", &el("Name", g));
            }
            let n_refs = a.rng.gen_range(0..3);
            if n_refs > 0 {
                let mut refs = String::new();
                let mut ids: Vec<u32> = (0..6).collect();
                ids.shuffle(a.rng);
                for i in ids.into_iter().take(n_refs) {
                    let r = format!("SGDREF:0001{i:02}");
                    add(ty("sgd", "BibRef", &r));
                    add(edge("sgd", "hasBibRef", ind("Protein", p), ind("BibRef", &r)));
                    let mut rinner = el("PubMedId", &r);
                    if let Some(t) = Attrs::optional(a.rng, &mut a.titles, &r, &TITLES, 0.8) {
                        add(lit("sgd", "BibRef", &r, "hasTitle", &t));
                        rinner += &el("Title", &t);
                    }
                    refs += &el("Reference", &rinner);
                }
                inner += &el("References", &refs);
            }
            entries += &el("Entry", &el("Protein", &inner));
        }
        docs.insert("sgd".to_string(), el("Result", &el("Entries", &entries)));

        // yeastract
        let mut body = String::new();
        let n_regs = a.rng.gen_range(0..9);
        if n_regs > 0 {
            let mut regs = String::new();
            for _ in 0..n_regs {
                let t = *PROTEINS.choose(a.rng).unwrap();
                let f = *FACTORS.choose(a.rng).unwrap();
                add(ty("yeastract", "Protein", t));
                add(ty("yeastract", "TranscriptionFactor", f));
                add(edge("yeastract", "regulatedBy", ind("Protein", t), ind("TranscriptionFactor", f)));
                let mut target = el("Name", t);
                if let Some(s) = a.sysname(t) {
                    add(lit("yeastract", "Protein", t, "hasSystematicName", &s));
                    target += &el("ORF", &s);
                }
                regs += &el(
                    "Regulation",
                    &(el("Target", &target) + &el("TranscriptionFactor", &el("Name", f))),
                );
            }
            body += &el("Regulations", &regs);
        }
        let n_factors = a.rng.gen_range(0..6);
        if n_factors > 0 {
            let mut fs = String::new();
            for _ in 0..n_factors {
                let f = *FACTORS.choose(a.rng).unwrap();
                let c = *CHROMOSOMES.choose(a.rng).unwrap();
                add(ty("yeastract", "TranscriptionFactor", f));
                add(lit("yeastract", "TranscriptionFactor", f, "hasName", f));
                add(ty("yeastract", "Chromosome", c));
                add(lit("yeastract", "Chromosome", c, "hasName", c));
                add(edge("yeastract", "belongsTo", ind("TranscriptionFactor", f), ind("Chromosome", c)));
                fs += &el(
                    "Factor",
                    &(el("TranscriptionFactor", &el("Name", f)) + &el("Chromosome", &el("Name", c))),
                );
            }
            body += &el("Factors", &fs);
        }
        docs.insert("yeastract".to_string(), el("Result", &body));

        // mips
        let mut genes = String::new();
        for g in pick(a.rng, &GENES, 1, 5) {
            add(ty("mips", "Gene", g));
            add(lit("mips", "Gene", g, "hasName", g));
            let mut inner = el("Name", g);
            if let Some(s) = a.sysname(g) {
                add(lit("mips", "Gene", g, "hasSystematicName", &s));
                inner += &el("SystematicName", &s);
            }
            if let Some(d) = Attrs::optional(a.rng, &mut a.gene_descriptions, g, &DESCRIPTIONS, 0.6) {
                add(lit("mips", "Gene", g, "hasDescription", &d));
                inner += &el("Description", &d);
            }
            let n_cats = a.rng.gen_range(0..3);
            if n_cats > 0 {
                let mut cats = String::new();
                let mut codes: Vec<u32> = (1..5).collect();
                codes.shuffle(a.rng);
                for i in codes.into_iter().take(n_cats) {
                    let code = format!("10.01.0{i}");
                    add(ty("mips", "FunctionalCategory", &code));
                    add(edge("mips", "hasFunction", ind("Gene", g), ind("FunctionalCategory", &code)));
                    let mut cinner = el("Code", &code);
                    if let Some(t) = Attrs::optional(a.rng, &mut a.category_titles, &code, &CATEGORY_TITLES, 0.7) {
                        add(lit("mips", "FunctionalCategory", &code, "hasCategoryName", &t));
                        cinner += &el("Title", &t);
                    }
                    cats += &el("Category", &cinner);
                }
                inner += &el("Categories", &cats);
            }
            genes += &el("Gene", &inner);
        }
        docs.insert("mips".to_string(), el("Result", &el("Genes", &genes)));

        // biogrid
        let mut ints = String::new();
        for _ in 0..a.rng.gen_range(1..6) {
            let b = *GENES.choose(a.rng).unwrap();
            let p = *GENES.choose(a.rng).unwrap();
            for g in [b, p] {
                add(ty("biogrid", "Gene", g));
                add(lit("biogrid", "Gene", g, "hasName", g));
            }
            add(edge("biogrid", "interactsWith", ind("Gene", b), ind("Gene", p)));
            ints += &el("Interaction", &(el("Bait", &el("Name", b)) + &el("Prey", &el("Name", p))));
        }
        docs.insert("biogrid".to_string(), el("Result", &el("Interactions", &ints)));

        // phosphogrid
        let mut entries = String::new();
        let owners: Vec<(&str, &str)> = pick(a.rng, &PROTEINS, 0, 4)
            .into_iter()
            .map(|p| ("Protein", p))
            .chain(pick(a.rng, &FACTORS, 0, 4).into_iter().map(|f| ("TranscriptionFactor", f)))
            .collect();
        let owners = if owners.is_empty() { vec![("Protein", "TOP3")] } else { owners };
        for (class, name) in owners {
            add(ty("phosphogrid", class, name));
            let mut inner = el("Name", name);
            let n_sites = a.rng.gen_range(0..4);
            if n_sites > 0 {
                let mut sites = String::new();
                let mut nums: Vec<u32> = (1..6).collect();
                nums.shuffle(a.rng);
                for n in nums.into_iter().take(n_sites) {
                    let id = format!("{name}-S{}", n * 37);
                    add(ty("phosphogrid", "PhosphoSite", &id));
                    add(edge("phosphogrid", "hasPhosphoSite", ind(class, name), ind("PhosphoSite", &id)));
                    let mut sinner = el("Id", &id);
                    if let Some(r) = Attrs::optional(a.rng, &mut a.residues, &id, &RESIDUES, 0.8) {
                        add(lit("phosphogrid", "PhosphoSite", &id, "hasResidue", &r));
                        sinner += &el("Residue", &r);
                    }
                    sites += &el("PhosphoSite", &sinner);
                }
                inner += &el("PhosphoSites", &sites);
            }
            entries += &el("Entry", &el(class, &inner));
        }
        docs.insert("phosphogrid".to_string(), el("Result", &el("Entries", &entries)));

        World { docs, facts }
    }

    pub fn services(&self) -> BTreeMap<String, Arc<dyn DataService>> {
        self.docs
            .iter()
            .map(|(name, xml)| {
                let s = fixtures::source(name).unwrap();
                let svc = FixtureService::new(name, xml, s.schema, s.description).expect("generated data conforms");
                (name.clone(), Arc::new(svc) as Arc<dyn DataService>)
            })
            .collect()
    }

    pub fn mediator(&self) -> Mediator {
        Mediator::new(MediatorConfig::default(), fixtures::directory(), self.services()).unwrap()
    }

    /// Values of a datatype property stated anywhere, for constants.
    pub fn values(&self, prop: &str, class: Option<&str>) -> Vec<String> {
        let mut out: BTreeSet<String> = BTreeSet::new();
        for f in &self.facts {
            if let Fact::Literal { ind, prop: p, value, .. } = f {
                if p == prop && class.map_or(true, |c| ind.0 == c) {
                    out.insert(value.clone());
                }
            }
        }
        out.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arg {
    Var(String),
    Const(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QAtom {
    pub predicate: String,
    pub args: Vec<Arg>,
}

impl QAtom {
    pub fn is_instantiated_datatype(&self, ont: &Ontology) -> bool {
        ont.datatype_property(&self.predicate).is_some() && matches!(self.args[1], Arg::Const(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenQuery {
    pub answer_vars: Vec<String>,
    pub body: Vec<QAtom>,
    /// Index in `body` of the root constant atom.
    pub anchor: usize,
}

impl GenQuery {
    pub fn text(&self) -> String {
        let atoms: Vec<String> = self
            .body
            .iter()
            .map(|a| {
                let args: Vec<String> = a
                    .args
                    .iter()
                    .map(|t| match t {
                        Arg::Var(v) => v.clone(),
                        Arg::Const(c) => format!("\"{}\"", c.replace('\\', "\\\\").replace('"', "\\\"")),
                    })
                    .collect();
                format!("{}({})", a.predicate, args.join(", "))
            })
            .collect();
        format!("Ans({}) :- {};", self.answer_vars.join(", "), atoms.join(", "))
    }

    pub fn without(&self, i: usize) -> GenQuery {
        let mut q = self.clone();
        q.body.remove(i);
        if q.anchor > i {
            q.anchor -= 1;
        }
        q
    }
}

const QUERY_CLASSES: [&str; 7] = [
    "Protein",
    "TranscriptionFactor",
    "Gene",
    "Chromosome",
    "BibRef",
    "PhosphoSite",
    "FunctionalCategory",
];

fn constant(rng: &mut ChaCha8Rng, world: &World, prop: &str, class: &str) -> String {
    let own = world.values(prop, Some(class));
    let any = world.values(prop, None);
    if !own.is_empty() && rng.gen_bool(0.85) {
        own.choose(rng).unwrap().clone()
    } else if !any.is_empty() && rng.gen_bool(0.7) {
        any.choose(rng).unwrap().clone()
    } else {
        "no such value".to_string()
    }
}

/// A tree-shaped query whose root carries a datatype constant. Nodes are
/// usually shaped after a witness individual of the world, so that answers
/// are common, and sometimes drawn blind from the ontology.
pub fn gen_query(rng: &mut ChaCha8Rng, world: &World, ont: &Ontology) -> GenQuery {
    let data_props = |c: &str| -> Vec<String> {
        ont.datatype_properties()
            .iter()
            .filter(|p| ont.subsumed(c, &p.domain))
            .map(|p| p.name.clone())
            .collect()
    };
    let obj_props = |c: &str| -> Vec<(String, String)> {
        ont.object_properties()
            .iter()
            .filter(|p| ont.subsumed(c, &p.domain))
            .map(|p| (p.name.clone(), p.range.clone()))
            .collect()
    };
    let mut lits: BTreeMap<&Ind, Vec<(&str, &str)>> = BTreeMap::new();
    let mut outs: BTreeMap<&Ind, Vec<(&str, &Ind)>> = BTreeMap::new();
    for f in &world.facts {
        match f {
            Fact::Literal { ind, prop, value, .. } => lits.entry(ind).or_default().push((prop, value)),
            Fact::Edge { prop, from, to, .. } => outs.entry(from).or_default().push((prop, to)),
            Fact::Type { .. } => {}
        }
    }
    let rooted: Vec<&Ind> = lits.keys().copied().filter(|i| outs.contains_key(i)).collect();
    let any_lit: Vec<&Ind> = lits.keys().copied().collect();

    let mut body = Vec::new();
    let mut node_vars = Vec::new();
    let mut lit_vars = Vec::new();
    let mut next_lit = 0;
    let mut fresh_lit = |lit_vars: &mut Vec<String>| {
        next_lit += 1;
        let l = format!("L{next_lit}");
        lit_vars.push(l.clone());
        Arg::Var(l)
    };

    let root_witness: Option<&Ind> = if !rooted.is_empty() && rng.gen_bool(0.7) {
        rooted.choose(rng).copied()
    } else if rng.gen_bool(0.7) {
        any_lit.choose(rng).copied()
    } else {
        None
    };
    let root_class = match root_witness {
        Some(w) => w.0.clone(),
        None => QUERY_CLASSES.choose(rng).unwrap().to_string(),
    };
    // (var, class, witness, depth)
    let mut frontier = vec![("X0".to_string(), root_class, root_witness, 0usize)];
    let mut next_node = 1;
    let mut anchor = 0;
    while let Some((v, class, witness, depth)) = frontier.pop() {
        node_vars.push(v.clone());
        let dps = data_props(&class);
        let own: Vec<(&str, &str)> = witness.and_then(|w| lits.get(w)).cloned().unwrap_or_default();
        if rng.gen_bool(0.55) {
            let supers: Vec<&str> = QUERY_CLASSES.iter().copied().filter(|c| ont.subsumed(&class, c)).collect();
            let c = if rng.gen_bool(0.25) { supers.choose(rng).copied().unwrap_or(&class) } else { &class };
            body.push(QAtom { predicate: c.to_string(), args: vec![Arg::Var(v.clone())] });
        }
        let mut data_atom = |rng: &mut ChaCha8Rng, want_const: bool, lit_vars: &mut Vec<String>| -> QAtom {
            let (p, value) = match own.choose(rng) {
                Some((p, value)) if rng.gen_bool(0.8) => (p.to_string(), value.to_string()),
                _ => {
                    let p = dps.choose(rng).unwrap().clone();
                    let c = constant(rng, world, &p, &class);
                    (p, c)
                }
            };
            let obj = if want_const { Arg::Const(value) } else { fresh_lit(lit_vars) };
            QAtom { predicate: p, args: vec![Arg::Var(v.clone()), obj] }
        };
        if depth == 0 {
            anchor = body.len();
            body.push(data_atom(rng, true, &mut lit_vars));
        }
        for _ in 0..rng.gen_range(0..=if depth == 0 { 1 } else { 2 }) {
            let c = rng.gen_bool(0.2);
            body.push(data_atom(rng, c, &mut lit_vars));
        }
        if depth < 2 {
            let n = rng.gen_range(if depth == 0 { 1 } else { 0 }..=2);
            for _ in 0..n {
                if body.len() >= 10 {
                    break;
                }
                let real: Vec<(&str, &Ind)> = witness.and_then(|w| outs.get(w)).cloned().unwrap_or_default();
                let (p, child_class, child_witness) = match real.choose(rng) {
                    Some((p, to)) if rng.gen_bool(0.8) => (p.to_string(), to.0.clone(), Some(*to)),
                    _ => {
                        let ops = obj_props(&class);
                        let Some((p, range)) = ops.choose(rng).cloned() else { break };
                        let subs: Vec<&str> = QUERY_CLASSES.iter().copied().filter(|c| ont.subsumed(c, &range)).collect();
                        let cc = subs.choose(rng).copied().unwrap_or(range.as_str()).to_string();
                        (p, cc, None)
                    }
                };
                let child = format!("X{next_node}");
                next_node += 1;
                body.push(QAtom { predicate: p, args: vec![Arg::Var(v.clone()), Arg::Var(child.clone())] });
                frontier.push((child, child_class, child_witness, depth + 1));
            }
        }
    }

    let mut candidates: Vec<String> = node_vars.iter().chain(lit_vars.iter()).cloned().collect();
    candidates.shuffle(rng);
    let n = rng.gen_range(1..=candidates.len().min(3));
    let mut answer_vars: Vec<String> = candidates.into_iter().take(n).collect();
    answer_vars.sort();

    let anchor_atom = body[anchor].clone();
    body.shuffle(rng);
    let anchor = body.iter().position(|a| *a == anchor_atom).unwrap();
    GenQuery { answer_vars, body, anchor }
}

/// Nested-loop evaluation in body order over the facts of the allowed sources.
pub fn oracle(world: &World, allowed: &BTreeSet<String>, q: &GenQuery, ont: &Ontology) -> BTreeSet<Vec<Value>> {
    let mut types: BTreeSet<&Ind> = BTreeSet::new();
    let mut literals: BTreeSet<(&Ind, &str, &str)> = BTreeSet::new();
    let mut edges: BTreeSet<(&str, &Ind, &Ind)> = BTreeSet::new();
    for f in world.facts.iter().filter(|f| allowed.contains(f.source())) {
        match f {
            Fact::Type { ind, .. } => {
                types.insert(ind);
            }
            Fact::Literal { ind, prop, value, .. } => {
                literals.insert((ind, prop, value));
            }
            Fact::Edge { prop, from, to, .. } => {
                edges.insert((prop, from, to));
            }
        }
    }
    let as_value = |i: &Ind| Value::Individual { class: i.0.clone(), key: i.1.clone() };
    let lit_value = |s: &str| Value::Literal { value: s.to_string() };

    fn unify(b: &mut BTreeMap<String, Value>, arg: &Arg, v: Value) -> bool {
        match arg {
            Arg::Const(c) => matches!(&v, Value::Literal { value } if value == c)
                || matches!(&v, Value::Individual { key, .. } if key.to_lowercase() == c.to_lowercase()),
            Arg::Var(x) => match b.get(x) {
                Some(bound) => *bound == v,
                None => {
                    b.insert(x.clone(), v);
                    true
                }
            },
        }
    }

    let mut out = BTreeSet::new();
    let mut stack: Vec<(usize, BTreeMap<String, Value>)> = vec![(0, BTreeMap::new())];
    while let Some((i, b)) = stack.pop() {
        if i == q.body.len() {
            out.insert(q.answer_vars.iter().map(|v| b[v].clone()).collect());
            continue;
        }
        let atom = &q.body[i];
        let mut push = |extra: Vec<(&Arg, Value)>| {
            let mut nb = b.clone();
            if extra.into_iter().all(|(a, v)| unify(&mut nb, a, v)) {
                stack.push((i + 1, nb));
            }
        };
        if ont.class(&atom.predicate).is_some() {
            for t in &types {
                if ont.subsumed(&t.0, &atom.predicate) {
                    push(vec![(&atom.args[0], as_value(t))]);
                }
            }
        } else if ont.datatype_property(&atom.predicate).is_some() {
            for (s, p, v) in &literals {
                if *p == atom.predicate {
                    push(vec![(&atom.args[0], as_value(s)), (&atom.args[1], lit_value(v))]);
                }
            }
        } else {
            for (p, from, to) in &edges {
                if *p == atom.predicate {
                    push(vec![(&atom.args[0], as_value(from)), (&atom.args[1], as_value(to))]);
                }
            }
        }
    }
    out
}

pub fn all_sources() -> BTreeSet<String> {
    SOURCE_NAMES.iter().map(|s| s.to_string()).collect()
}

pub fn request(text: &str, sources: Option<Vec<String>>) -> QueryRequest {
    QueryRequest {
        query: text.to_string(),
        sources,
        format: Some("json".into()),
        ..Default::default()
    }
}

/// Rows of a successful answer, or the error.
pub fn answer(m: &Mediator, text: &str, sources: Option<Vec<String>>) -> Result<BTreeSet<Vec<Value>>, MediatorError> {
    m.handle_query(&request(text, sources))
        .map(|r| r.result.rows.into_iter().collect())
}

/// Wraps a service and counts every call made through it.
pub struct Counting {
    pub inner: Arc<dyn DataService>,
    pub queries: AtomicUsize,
    pub other: AtomicUsize,
    pub texts: std::sync::Mutex<Vec<String>>,
}

impl Counting {
    pub fn wrap(services: BTreeMap<String, Arc<dyn DataService>>) -> (BTreeMap<String, Arc<dyn DataService>>, BTreeMap<String, Arc<Counting>>) {
        let mut wrapped = BTreeMap::new();
        let mut counters = BTreeMap::new();
        for (name, inner) in services {
            let c = Arc::new(Counting {
                inner,
                queries: AtomicUsize::new(0),
                other: AtomicUsize::new(0),
                texts: Default::default(),
            });
            wrapped.insert(name.clone(), c.clone() as Arc<dyn DataService>);
            counters.insert(name, c);
        }
        (wrapped, counters)
    }

    pub fn total(&self) -> usize {
        self.queries.load(Ordering::SeqCst) + self.other.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.queries.store(0, Ordering::SeqCst);
        self.other.store(0, Ordering::SeqCst);
        self.texts.lock().unwrap().clear();
    }
}

impl DataService for Counting {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn endpoint(&self) -> &str {
        self.inner.endpoint()
    }

    fn query(&self, xquery: &str) -> Result<ServiceResponse, ServiceError> {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.texts.lock().unwrap().push(xquery.to_string());
        self.inner.query(xquery)
    }

    fn schema(&self) -> Result<String, ServiceError> {
        self.other.fetch_add(1, Ordering::SeqCst);
        self.inner.schema()
    }

    fn provenance(&self) -> Result<ProvenanceRecord, ServiceError> {
        self.other.fetch_add(1, Ordering::SeqCst);
        self.inner.provenance()
    }
}
