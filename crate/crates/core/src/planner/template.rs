//! Parameterized sub-query text and the generators the planner and the
//! executor share.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::PlanError;
use crate::semdir::{DatatypeMapping, ObjectMapping, SemanticDirectory};
use crate::xsource::{quote_literal, WhereClause, XPathExpr, XQueryExpr};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum TemplateValue {
    Const(String),
    /// Filled from the binding of a query variable.
    Param(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct XQueryTemplate {
    #[serde(serialize_with = "ser_path")]
    pub for_path: XPathExpr,
    pub where_clauses: Vec<(String, TemplateValue)>,
}

fn ser_path<S: serde::Serializer>(p: &XPathExpr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

impl XQueryTemplate {
    pub fn new(for_path: XPathExpr) -> Self {
        XQueryTemplate {
            for_path,
            where_clauses: Vec::new(),
        }
    }

    pub fn with(mut self, path: &XPathExpr, value: TemplateValue) -> Self {
        self.where_clauses.push((path.to_mapping_text(), value));
        self
    }

    pub fn params(&self) -> Vec<&str> {
        self.where_clauses
            .iter()
            .filter_map(|(_, v)| match v {
                TemplateValue::Param(p) => Some(p.as_str()),
                TemplateValue::Const(_) => None,
            })
            .collect()
    }

    pub fn instantiate(&self, bindings: &BTreeMap<String, String>) -> Result<XQueryExpr, PlanError> {
        let mut where_clauses = Vec::with_capacity(self.where_clauses.len());
        for (path, v) in &self.where_clauses {
            let value = match v {
                TemplateValue::Const(c) => c.clone(),
                TemplateValue::Param(p) => bindings
                    .get(p)
                    .cloned()
                    .ok_or_else(|| PlanError::MissingBinding(p.clone()))?,
            };
            where_clauses.push(WhereClause {
                path: XPathExpr::parse(path).expect("generated from parsed paths"),
                value,
            });
        }
        Ok(XQueryExpr {
            for_var: "d".into(),
            for_path: self.for_path.clone(),
            where_clauses,
            return_path: None,
        })
    }

    /// Query text for templates without parameters.
    pub fn concrete(&self) -> Result<XQueryExpr, PlanError> {
        self.instantiate(&BTreeMap::new())
    }

    /// Multi-line layout used in explain output.
    pub fn pretty(&self) -> String {
        let mut out = format!("for $d in {}", self.for_path);
        for (i, (path, v)) in self.where_clauses.iter().enumerate() {
            let kw = if i == 0 { "\nwhere" } else { "\n  and" };
            out.push_str(&format!("{kw} $d/{path} eq {}", render_value(v)));
        }
        out.push_str("\nreturn $d");
        out
    }
}

fn render_value(v: &TemplateValue) -> String {
    match v {
        TemplateValue::Const(c) => quote_literal(c),
        TemplateValue::Param(p) => format!("{{{p}}}"),
    }
}

impl fmt::Display for XQueryTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "for $d in {}", self.for_path)?;
        for (i, (path, v)) in self.where_clauses.iter().enumerate() {
            let kw = if i == 0 { "where" } else { "and" };
            write!(f, " {kw} $d/{path} eq {}", render_value(v))?;
        }
        f.write_str(" return $d")
    }
}

/// Path from `ancestor` to `loc`, then `tail`.
fn below(ancestor: &XPathExpr, loc: &XPathExpr, tail: &XPathExpr) -> XPathExpr {
    match loc.relative_to(ancestor) {
        Some(rel) => rel.join(tail),
        None => tail.as_relative(),
    }
}

/// Elements at the mapping's domain location whose value equals `value`.
pub fn literal_query(m: &DatatypeMapping, value: TemplateValue) -> XQueryTemplate {
    XQueryTemplate::new(m.domain_location.clone()).with(&m.value_location, value)
}

/// Elements at `location` whose key equals `key`.
pub fn key_query(
    dir: &SemanticDirectory,
    source: &str,
    location: &XPathExpr,
    class: &str,
    key: TemplateValue,
) -> Option<XQueryTemplate> {
    let key_path = dir.key_path(source, class)?;
    Some(XQueryTemplate::new(location.clone()).with(key_path, key))
}

/// Records holding an object mapping's pairs whose domain has key `key`,
/// optionally narrowed by value tests on the range element.
pub fn edge_query(
    dir: &SemanticDirectory,
    m: &ObjectMapping,
    key: TemplateValue,
    range_tests: &[(XPathExpr, String)],
) -> Option<XQueryTemplate> {
    let a = m.ancestor();
    let key_path = dir.key_path(&m.source, &m.domain_name)?;
    let mut t = XQueryTemplate::new(a.clone()).with(&below(&a, &m.domain_location, key_path), key);
    for (value_path, c) in range_tests {
        t = t.with(
            &below(&a, &m.range_location, value_path),
            TemplateValue::Const(c.clone()),
        );
    }
    Some(t)
}
