//! Random documents and queries for the XQuery subset, and a brute-force
//! reference evaluator.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use medley_core::xsource::{Step, WhereClause, XPathExpr, XQueryExpr, XmlChild, XmlNode};

const NAMES: [&str; 4] = ["A", "B", "C", "D"];
const VALUES: [&str; 5] = ["x", "y", " x ", "z\n", "x y"];

pub fn random_doc(r: &mut ChaCha8Rng) -> XmlNode {
    fn grow(r: &mut ChaCha8Rng, name: &str, depth: usize) -> XmlNode {
        let mut n = XmlNode::new(name);
        if r.gen_bool(0.2) {
            n = n.with_attr("id", r.gen_range(0..5).to_string());
        }
        if depth >= 4 || r.gen_bool(0.3) {
            return n.with_text(*VALUES.choose(r).unwrap());
        }
        for _ in 0..r.gen_range(0..4) {
            let name = *NAMES.choose(r).unwrap();
            let child = grow(r, name, depth + 1);
            n = n.with_child(child);
        }
        n
    }
    grow(r, "R", 0)
}

fn random_steps(r: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<Step> {
    (0..r.gen_range(lo..=hi))
        .map(|_| {
            if r.gen_bool(0.15) {
                Step::Wildcard
            } else {
                Step::Name(NAMES.choose(r).unwrap().to_string())
            }
        })
        .collect()
}

pub fn random_query(r: &mut ChaCha8Rng) -> XQueryExpr {
    let mut for_steps = vec![Step::Name(if r.gen_bool(0.95) { "R" } else { "A" }.to_string())];
    for_steps.extend(random_steps(r, 0, 3));
    let where_clauses = (0..r.gen_range(0..3))
        .map(|_| WhereClause {
            path: XPathExpr { absolute: false, steps: random_steps(r, 1, 2) },
            value: VALUES.choose(r).unwrap().trim().to_string(),
        })
        .collect();
    let return_path = r
        .gen_bool(0.4)
        .then(|| XPathExpr { absolute: false, steps: random_steps(r, 1, 2) });
    XQueryExpr {
        for_var: "d".into(),
        for_path: XPathExpr { absolute: true, steps: for_steps },
        where_clauses,
        return_path,
    }
}

/// Every element with its name chain from the root, in document order.
fn all_elements(doc: &XmlNode) -> Vec<(Vec<usize>, Vec<String>)> {
    fn walk(n: &XmlNode, pos: &mut Vec<usize>, names: &mut Vec<String>, out: &mut Vec<(Vec<usize>, Vec<String>)>) {
        names.push(n.name.clone());
        out.push((pos.clone(), names.clone()));
        let mut k = 0;
        for c in &n.children {
            if let XmlChild::Element(e) = c {
                pos.push(k);
                walk(e, pos, names, out);
                pos.pop();
                k += 1;
            }
        }
        names.pop();
    }
    let mut out = Vec::new();
    walk(doc, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

fn chain_matches(steps: &[Step], names: &[String]) -> bool {
    steps.len() == names.len()
        && steps.iter().zip(names).all(|(s, n)| match s {
            Step::Wildcard => true,
            Step::Name(x) => x == n,
        })
}

fn text_of(n: &XmlNode) -> String {
    n.children
        .iter()
        .map(|c| match c {
            XmlChild::Text(t) => t.clone(),
            XmlChild::Element(e) => text_of(e),
        })
        .collect()
}

fn trimmed(s: &str) -> &str {
    s.trim_matches(|c| matches!(c, ' ' | '\t' | '\n' | '\r'))
}

fn at<'a>(doc: &'a XmlNode, pos: &[usize]) -> &'a XmlNode {
    let mut n = doc;
    for &k in pos {
        n = n.elements().nth(k).unwrap();
    }
    n
}

/// Brute force: test every element against the for path, every descendant
/// against each where path and return path, then rebuild the result from
/// the returned positions and their ancestors.
pub fn reference(doc: &XmlNode, q: &XQueryExpr) -> XmlNode {
    let elements = all_elements(doc);
    let below = |pos: &[usize], names: &[String], rel: &XPathExpr| -> Vec<Vec<usize>> {
        elements
            .iter()
            .filter(|(p, _)| p.len() == pos.len() + rel.steps.len() && p.starts_with(pos))
            .filter(|(_, n)| chain_matches(&rel.steps, &n[names.len()..]))
            .map(|(p, _)| p.clone())
            .collect()
    };
    let mut items: Vec<Vec<usize>> = Vec::new();
    for (pos, names) in &elements {
        if !chain_matches(&q.for_path.steps, names) {
            continue;
        }
        let keep = q.where_clauses.iter().all(|w| {
            below(pos, names, &w.path)
                .iter()
                .any(|p| trimmed(&text_of(at(doc, p))) == trimmed(&w.value))
        });
        if !keep {
            continue;
        }
        match &q.return_path {
            None => items.push(pos.clone()),
            Some(rp) => items.extend(below(pos, names, rp)),
        }
    }

    fn rebuild(n: &XmlNode, pos: &mut Vec<usize>, items: &[Vec<usize>]) -> XmlNode {
        if items.contains(pos) {
            return n.clone();
        }
        let mut out = XmlNode::new(n.name.clone());
        out.attributes = n.attributes.clone();
        for (k, e) in n.elements().enumerate() {
            pos.push(k);
            if items.iter().any(|i| i.starts_with(pos)) {
                out = out.with_child(rebuild(e, pos, items));
            }
            pos.pop();
        }
        out
    }
    rebuild(doc, &mut Vec::new(), &items)
}

const TEXT_CHARS: &[char] = &['a', 'Q', '7', ' ', '&', '<', '>', '"', '\'', '\u{e9}', '\u{4e2d}', '\n', '\t', '\r', ']'];

fn random_text(r: &mut ChaCha8Rng) -> String {
    loop {
        let s: String = (0..r.gen_range(1..8)).map(|_| *TEXT_CHARS.choose(r).unwrap()).collect();
        if !s.chars().all(|c| matches!(c, ' ' | '\t' | '\n' | '\r')) {
            return s;
        }
    }
}

pub fn random_tree(r: &mut ChaCha8Rng, depth: usize) -> XmlNode {
    let names = ["a", "B", "c-d", "e.f", "_g", "\u{e9}l"];
    let mut n = XmlNode::new(*names.choose(r).unwrap());
    for _ in 0..r.gen_range(0..3) {
        let k = *["k", "id", "x-y"].choose(r).unwrap();
        let v: String = (0..r.gen_range(0..6)).map(|_| *TEXT_CHARS.choose(r).unwrap()).collect();
        n = n.with_attr(k, v);
    }
    if depth < 4 {
        for _ in 0..r.gen_range(0..4) {
            if r.gen_bool(0.4) {
                n.push_text(random_text(r));
            } else {
                n = n.with_child(random_tree(r, depth + 1));
            }
        }
    }
    n
}

