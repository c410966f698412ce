//! Single-seed checks shared by the property tests and the acceptance run.
//! Each returns `Err` with a readable reason on a counterexample.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use medley_core::fixtures;
use medley_core::mediator::Stage;
use medley_core::xsource::{eval_xquery, parse_xml, serialize_xml, XQueryExpr};

use super::xref::{random_doc, random_query, random_tree, reference};
use super::{all_sources, answer, gen_query, oracle, request, rng, Arg, QAtom, World, SOURCE_NAMES};

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Mediated answers equal the nested-loop answers, under a random source
/// selection part of the time.
pub fn oracle_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let world = World::generate(&mut r);
    let ont = fixtures::ontology();
    let q = gen_query(&mut r, &world, &ont);
    let text = q.text();
    let m = world.mediator();

    let (allowed, selection) = if r.gen_bool(0.3) {
        let n = r.gen_range(1..=SOURCE_NAMES.len());
        let chosen: Vec<String> = SOURCE_NAMES.choose_multiple(&mut r, n).map(|s| s.to_string()).collect();
        (chosen.iter().cloned().collect::<BTreeSet<_>>(), Some(chosen))
    } else {
        (all_sources(), None)
    };

    let expected = oracle(&world, &allowed, &q, &ont);
    match answer(&m, &text, selection) {
        Ok(rows) => ensure!(rows == expected, "seed {seed}: {text}\n got {rows:?}\nwant {expected:?}"),
        Err(e) => {
            ensure!(e.stage == Stage::Plan, "seed {seed}: {text} failed: {e:?}");
            ensure!(
                expected.is_empty(),
                "seed {seed}: plan error `{}` but the oracle answers {expected:?} for {text}",
                e.message
            );
        }
    }
    Ok(())
}

/// Adding a constant datatype atom can only narrow the answers.
pub fn filter_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let world = World::generate(&mut r);
    let ont = fixtures::ontology();
    let q = gen_query(&mut r, &world, &ont);
    let subjects: Vec<String> = q
        .body
        .iter()
        .filter_map(|a| match &a.args[0] {
            Arg::Var(v) if v.starts_with('X') => Some(v.clone()),
            _ => None,
        })
        .collect();
    let subject = subjects.choose(&mut r).unwrap().clone();
    let prop = ont.datatype_properties().choose(&mut r).unwrap().name.clone();
    let values = world.values(&prop, None);
    let value = values.choose(&mut r).cloned().unwrap_or_else(|| "absent".into());
    let mut filtered = q.clone();
    let at = r.gen_range(0..=filtered.body.len());
    filtered.body.insert(at, QAtom { predicate: prop, args: vec![Arg::Var(subject), Arg::Const(value)] });
    let m = world.mediator();
    let narrow = answer(&m, &filtered.text(), None).unwrap_or_default();
    match answer(&m, &q.text(), None) {
        Ok(wide) => ensure!(narrow.is_subset(&wide), "seed {seed}: {} vs {}", filtered.text(), q.text()),
        Err(e) => {
            ensure!(e.stage == Stage::Plan, "seed {seed}: {} failed: {e:?}", q.text());
            ensure!(narrow.is_empty(), "seed {seed}: filtered query answers, unfiltered does not plan");
        }
    }
    Ok(())
}

/// Answering over fewer sources never adds answers.
pub fn deselect_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let world = World::generate(&mut r);
    let ont = fixtures::ontology();
    let q = gen_query(&mut r, &world, &ont);
    let m = world.mediator();
    let k = r.gen_range(1..SOURCE_NAMES.len());
    let subset: Vec<String> = SOURCE_NAMES.choose_multiple(&mut r, k).map(|s| s.to_string()).collect();
    let narrow = answer(&m, &q.text(), Some(subset.clone())).unwrap_or_default();
    let wide = answer(&m, &q.text(), None).unwrap_or_default();
    ensure!(narrow.is_subset(&wide), "seed {seed}: {} over {subset:?}", q.text());
    Ok(())
}

/// Every fact carries sources that were called, every called source left a
/// provenance record, and edges respect their declared domain and range.
pub fn provenance_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let world = World::generate(&mut r);
    let ont = fixtures::ontology();
    let q = gen_query(&mut r, &world, &ont);
    let m = world.mediator();
    let Ok(resp) = m.handle_query(&request(&q.text(), None)) else { return Ok(()) };
    let rs = &resp.result;
    let called: BTreeSet<&str> = resp.diagnostics.calls_per_source.keys().map(String::as_str).collect();
    let recorded: BTreeSet<&str> = rs.provenance.iter().map(|p| p.source.as_str()).collect();
    ensure!(called == recorded, "seed {seed}: called {called:?}, recorded {recorded:?}");
    let known = |srcs: &BTreeSet<String>| !srcs.is_empty() && srcs.iter().all(|s| called.contains(s.as_str()));
    for (id, ind) in &rs.graph.individuals {
        ensure!(known(&ind.sources), "seed {seed}: individual {id} has sources {:?}", ind.sources);
        for (prop, values) in &ind.literals {
            for (v, src) in values {
                ensure!(known(src), "seed {seed}: {id} {prop} {v} has sources {src:?}");
            }
        }
    }
    for (e, src) in &rs.graph.edges {
        ensure!(known(src), "seed {seed}: edge {e:?} has sources {src:?}");
        let decl = ont.object_property(&e.property).ok_or_else(|| format!("undeclared {}", e.property))?;
        ensure!(ont.subsumed(&e.from.class, &decl.domain), "seed {seed}: bad domain {e:?}");
        ensure!(ont.subsumed(&e.to.class, &decl.range), "seed {seed}: bad range {e:?}");
    }
    Ok(())
}

/// The evaluator agrees with the reference, and query text parses back.
pub fn xquery_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let doc = random_doc(&mut r);
    let q = random_query(&mut r);
    let reparsed = XQueryExpr::parse(&q.to_string()).map_err(|e| format!("seed {seed}: {q}: {e:?}"))?;
    ensure!(reparsed == q, "seed {seed}: {q} reparses differently");
    let got = eval_xquery(&doc, &q);
    let want = reference(&doc, &q);
    ensure!(
        got == want,
        "seed {seed}: {q} on {}\n got {}\nwant {}",
        serialize_xml(&doc),
        serialize_xml(&got),
        serialize_xml(&want)
    );
    Ok(())
}

/// Serialized XML parses back to the same tree and the same text.
pub fn xml_roundtrip_case(seed: u64) -> Result<(), String> {
    let tree = random_tree(&mut rng(seed), 0);
    let text = serialize_xml(&tree);
    let back = parse_xml(&text).map_err(|e| format!("seed {seed}: {text}: {e:?}"))?;
    ensure!(back == tree, "seed {seed}: {text} parses to a different tree");
    ensure!(serialize_xml(&back) == text, "seed {seed}: {text} reserializes differently");
    Ok(())
}
