//! Owned XML trees for the supported subset: elements, attributes and
//! character data. Comments and processing instructions are dropped,
//! whitespace-only text between elements is dropped, and namespaces are
//! rejected. Attributes are kept sorted by name, so serialization is
//! canonical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed XML at {line}:{column}: {message}")]
pub struct XmlError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum XmlChild {
    Element(XmlNode),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XmlNode {
    pub name: String,
    pub attributes: BTreeMap<String, String>,
    pub children: Vec<XmlChild>,
}

impl XmlNode {
    pub fn new(name: impl Into<String>) -> Self {
        XmlNode {
            name: name.into(),
            attributes: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }

    pub fn with_child(mut self, child: XmlNode) -> Self {
        self.children.push(XmlChild::Element(child));
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.push_text(text);
        self
    }

    /// Appends character data, merging with a preceding text node.
    pub fn push_text(&mut self, text: impl Into<String>) {
        let text = text.into();
        if text.is_empty() {
            return;
        }
        if let Some(XmlChild::Text(prev)) = self.children.last_mut() {
            prev.push_str(&text);
        } else {
            self.children.push(XmlChild::Text(text));
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = &XmlNode> {
        self.children.iter().filter_map(|c| match c {
            XmlChild::Element(e) => Some(e),
            XmlChild::Text(_) => None,
        })
    }

    pub fn element_at(&self, index: usize) -> Option<&XmlNode> {
        match self.children.get(index) {
            Some(XmlChild::Element(e)) => Some(e),
            _ => None,
        }
    }

    /// Concatenated character data of the element and all its descendants.
    pub fn text(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        out
    }

    fn collect_text(&self, out: &mut String) {
        for c in &self.children {
            match c {
                XmlChild::Text(t) => out.push_str(t),
                XmlChild::Element(e) => e.collect_text(out),
            }
        }
    }
}

/// Value comparison used by `eq` and by literal matching: NFC, then trim
/// XML whitespace.
pub fn normalize_value(s: &str) -> String {
    let nfc: String = s.nfc().collect();
    nfc.trim_matches(|c| matches!(c, ' ' | '\t' | '\n' | '\r'))
        .to_string()
}

pub fn parse_xml(text: &str) -> Result<XmlNode, XmlError> {
    let opts = roxmltree::ParsingOptions {
        allow_dtd: false,
        ..Default::default()
    };
    let doc = roxmltree::Document::parse_with_options(text, opts).map_err(|e| {
        let pos = e.pos();
        XmlError {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    convert(&doc, doc.root_element())
}

fn convert(doc: &roxmltree::Document, node: roxmltree::Node) -> Result<XmlNode, XmlError> {
    let located = |message: String| {
        let pos = doc.text_pos_at(node.range().start);
        XmlError {
            line: pos.row,
            column: pos.col,
            message,
        }
    };
    if node.tag_name().namespace().is_some() || node.namespaces().len() > 0 {
        return Err(located(format!(
            "namespaces are not supported (element `{}`)",
            node.tag_name().name()
        )));
    }
    let mut out = XmlNode::new(node.tag_name().name());
    for a in node.attributes() {
        if a.namespace().is_some() {
            return Err(located(format!("namespaced attribute `{}`", a.name())));
        }
        out.attributes.insert(a.name().to_string(), a.value().to_string());
    }
    for child in node.children() {
        match child.node_type() {
            roxmltree::NodeType::Element => {
                out.children.push(XmlChild::Element(convert(doc, child)?));
            }
            roxmltree::NodeType::Text => {
                let t = child.text().unwrap_or_default();
                out.push_text(t);
            }
            _ => {}
        }
    }
    // Whitespace-only runs between elements are layout, not data.
    out.children.retain(|c| match c {
        XmlChild::Text(t) => !t.chars().all(|c| matches!(c, ' ' | '\t' | '\n' | '\r')),
        XmlChild::Element(_) => true,
    });
    Ok(out)
}

pub fn serialize_xml(node: &XmlNode) -> String {
    let mut out = String::new();
    write_node(node, &mut out);
    out
}

fn write_node(node: &XmlNode, out: &mut String) {
    out.push('<');
    out.push_str(&node.name);
    for (k, v) in &node.attributes {
        let _ = write!(out, " {k}=\"");
        escape_into(v, true, out);
        out.push('"');
    }
    if node.children.is_empty() {
        out.push_str("/>");
        return;
    }
    out.push('>');
    for c in &node.children {
        match c {
            XmlChild::Element(e) => write_node(e, out),
            XmlChild::Text(t) => escape_into(t, false, out),
        }
    }
    out.push_str("</");
    out.push_str(&node.name);
    out.push('>');
}

pub(crate) fn escape_into(s: &str, attr: bool, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attr => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attr => out.push_str("&#10;"),
            '\t' if attr => out.push_str("&#9;"),
            _ => out.push(c),
        }
    }
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::new();
    escape_into(s, false, &mut out);
    out
}
