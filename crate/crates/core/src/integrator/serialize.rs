//! Output renderings of a result set. All are deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use serde_json::json;

use super::{IndividualId, IntegrationError, ResultSet, Sources, Value};
use crate::xsource::{serialize_xml, XmlNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Rdf,
    Xml,
    Html,
    Json,
}

impl FromStr for Format {
    type Err = IntegrationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rdf" => Ok(Format::Rdf),
            "xml" => Ok(Format::Xml),
            "html" => Ok(Format::Html),
            "json" => Ok(Format::Json),
            _ => Err(IntegrationError::UnknownFormat(s.to_string())),
        }
    }
}

impl Format {
    pub fn content_type(self) -> &'static str {
        match self {
            Format::Rdf => "application/n-triples",
            Format::Xml => "application/xml",
            Format::Html => "text/html; charset=utf-8",
            Format::Json => "application/json",
        }
    }
}

const KEY_SET: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'.').remove(b'_').remove(b'~');
const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

pub fn individual_iri(base: &str, id: &IndividualId) -> String {
    format!("{base}{}/{}", id.class, utf8_percent_encode(&id.key, KEY_SET))
}

pub fn serialize(rs: &ResultSet, format: Format) -> String {
    match format {
        Format::Rdf => to_rdf(rs),
        Format::Xml => to_xml(rs),
        Format::Html => to_html(rs),
        Format::Json => to_json(rs),
    }
}

fn nt_literal(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn to_rdf(rs: &ResultSet) -> String {
    let base = &rs.base_iri;
    let mut lines = BTreeSet::new();
    for (id, ind) in &rs.graph.individuals {
        let s = individual_iri(base, id);
        lines.insert(format!("<{s}> <{RDF_TYPE}> <{base}{}> .", id.class));
        for (p, values) in &ind.literals {
            for v in values.keys() {
                lines.insert(format!("<{s}> <{base}{p}> {} .", nt_literal(v)));
            }
        }
    }
    for e in rs.graph.edges.keys() {
        lines.insert(format!(
            "<{}> <{base}{}> <{}> .",
            individual_iri(base, &e.from),
            e.property,
            individual_iri(base, &e.to)
        ));
    }
    lines.into_iter().map(|l| l + "\n").collect()
}

fn joined(s: &Sources) -> String {
    s.iter().cloned().collect::<Vec<_>>().join(" ")
}

fn to_xml(rs: &ResultSet) -> String {
    if rs.rows.is_empty() {
        return serialize_xml(&XmlNode::new("ResultSet"));
    }
    let mut rows = XmlNode::new("Rows");
    for r in &rs.rows {
        let mut row = XmlNode::new("Row");
        for (var, v) in rs.answer_vars.iter().zip(r) {
            let b = XmlNode::new("Binding").with_attr("var", var.clone());
            row = row.with_child(match v {
                Value::Individual { class, key } => b.with_attr("class", class.clone()).with_attr("key", key.clone()),
                Value::Literal { value } => b.with_text(value.clone()),
            });
        }
        rows = rows.with_child(row);
    }
    let mut inds = XmlNode::new("Individuals");
    for (id, ind) in &rs.graph.individuals {
        let mut n = XmlNode::new("Individual")
            .with_attr("class", id.class.clone())
            .with_attr("key", id.key.clone())
            .with_attr("source", joined(&ind.sources));
        for (p, values) in &ind.literals {
            for (v, src) in values {
                n = n.with_child(
                    XmlNode::new("Literal")
                        .with_attr("property", p.clone())
                        .with_attr("source", joined(src))
                        .with_text(v.clone()),
                );
            }
        }
        inds = inds.with_child(n);
    }
    let mut edges = XmlNode::new("Edges");
    for (e, src) in &rs.graph.edges {
        edges = edges.with_child(
            XmlNode::new("Edge")
                .with_attr("property", e.property.clone())
                .with_attr("from", e.from.to_string())
                .with_attr("to", e.to.to_string())
                .with_attr("source", joined(src)),
        );
    }
    let mut sources = XmlNode::new("Sources");
    for p in &rs.provenance {
        sources = sources.with_child(
            XmlNode::new("Source")
                .with_attr("name", p.source.clone())
                .with_attr("endpoint", p.endpoint.clone())
                .with_attr("schema", p.schema_id.clone())
                .with_text(p.description.clone()),
        );
    }
    let root = XmlNode::new("ResultSet")
        .with_attr("answer", rs.answer_vars.join(" "))
        .with_child(rows)
        .with_child(inds)
        .with_child(edges)
        .with_child(sources);
    serialize_xml(&root)
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

fn badges(src: &Sources) -> String {
    src.iter()
        .map(|s| format!("<span class=\"badge\">{}</span>", esc(s)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn value_sources(rs: &ResultSet, v: &Value) -> Sources {
    match v {
        Value::Individual { .. } => v
            .as_individual()
            .and_then(|id| rs.graph.individuals.get(&id))
            .map(|i| i.sources.clone())
            .unwrap_or_default(),
        Value::Literal { value } => {
            let mut out = Sources::new();
            for ind in rs.graph.individuals.values() {
                for values in ind.literals.values() {
                    if let Some(s) = values.get(value) {
                        out.extend(s.iter().cloned());
                    }
                }
            }
            out
        }
    }
}

fn to_html(rs: &ResultSet) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Query results</title>\n<style>\n\
         table { border-collapse: collapse; margin-bottom: 1em; }\n\
         td, th { border: 1px solid #999; padding: 2px 6px; }\n\
         .badge { background: #def; border-radius: 3px; font-size: 80%; padding: 0 4px; }\n\
         </style>\n</head>\n<body>\n",
    );
    let _ = writeln!(out, "<h1>{} row(s)</h1>", rs.rows.len());
    for (i, var) in rs.answer_vars.iter().enumerate() {
        let column: BTreeSet<&Value> = rs.rows.iter().map(|r| &r[i]).collect();
        let _ = writeln!(out, "<h2>{}</h2>\n<table>\n<tr><th>value</th><th>details</th><th>sources</th></tr>", esc(var));
        for v in column {
            let details = match v.as_individual().and_then(|id| rs.graph.individuals.get(&id)) {
                Some(ind) => ind
                    .literals
                    .iter()
                    .flat_map(|(p, vals)| vals.keys().map(move |x| format!("{}: {}", esc(p), esc(x))))
                    .collect::<Vec<_>>()
                    .join("<br>"),
                None => String::new(),
            };
            let label = match v {
                Value::Individual { class, key } => format!("{} <small>{}</small>", esc(key), esc(class)),
                Value::Literal { value } => esc(value),
            };
            let _ = writeln!(out, "<tr><td>{label}</td><td>{details}</td><td>{}</td></tr>", badges(&value_sources(rs, v)));
        }
        out.push_str("</table>\n");
    }
    if !rs.provenance.is_empty() {
        out.push_str("<h2>Sources</h2>\n<ul>\n");
        for p in &rs.provenance {
            let _ = writeln!(
                out,
                "<li><span class=\"badge\">{}</span> {} ({})</li>",
                esc(&p.source),
                esc(&p.description),
                esc(&p.endpoint)
            );
        }
        out.push_str("</ul>\n");
    }
    out.push_str("</body>\n</html>\n");
    out
}

fn to_json(rs: &ResultSet) -> String {
    let rows: Vec<BTreeMap<&str, &Value>> = rs
        .rows
        .iter()
        .map(|r| rs.answer_vars.iter().map(String::as_str).zip(r).collect())
        .collect();
    let provenance: Vec<_> = rs
        .provenance
        .iter()
        .map(|p| {
            json!({
                "source": p.source,
                "endpoint": p.endpoint,
                "schema_id": p.schema_id,
                "description": p.description,
            })
        })
        .collect();
    let doc = json!({
        "answer_vars": rs.answer_vars,
        "rows": rows,
        "graph": rs.graph,
        "provenance": provenance,
    });
    serde_json::to_string_pretty(&doc).expect("serializable") + "\n"
}
