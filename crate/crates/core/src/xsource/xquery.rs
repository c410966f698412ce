//! The XQuery subset understood by the data services:
//!
//! ```text
//! for $v in /Abs/Path
//! [where $v/Rel/Path eq "literal" (and $v/Rel/Path eq "literal")*]
//! return $v[/Rel/Path]
//! ```
//!
//! Results are projections of the source document: every returned item is
//! copied whole, together with the chain of ancestors leading to it, so a
//! result document has the same shape as the source data.

use std::fmt;

use thiserror::Error;

use super::xml::{normalize_value, XmlChild, XmlNode};
use super::xpath::{resolve, select, NodePath, Step, XPathExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XQueryError {
    #[error("XQuery syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported XQuery construct `{0}`")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WhereClause {
    pub path: XPathExpr,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct XQueryExpr {
    pub for_var: String,
    pub for_path: XPathExpr,
    pub where_clauses: Vec<WhereClause>,
    pub return_path: Option<XPathExpr>,
}

/// Writes an XQuery string literal; `"` doubles and `&` becomes `&amp;`.
pub fn quote_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\"\""),
            '&' => out.push_str("&amp;"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for XQueryExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "for ${} in {}", self.for_var, self.for_path)?;
        for (i, w) in self.where_clauses.iter().enumerate() {
            let kw = if i == 0 { "where" } else { "and" };
            write!(f, " {kw} ${}/{} eq {}", self.for_var, w.path, quote_literal(&w.value))?;
        }
        write!(f, " return ${}", self.for_var)?;
        if let Some(r) = &self.return_path {
            write!(f, "/{r}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Var(String, Option<String>),
    Path(String),
    Str(String),
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, XQueryError> {
    let bytes: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |offset: usize, message: &str| XQueryError::Syntax {
        offset,
        message: message.to_string(),
    };
    let is_path_char = |c: char| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '*' | '/');
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        match c {
            '$' => {
                i += 1;
                let start = i;
                while i < bytes.len() && (bytes[i].1.is_alphanumeric() || bytes[i].1 == '_') {
                    i += 1;
                }
                if i == start {
                    return Err(syntax(off, "expected a variable name after `$`"));
                }
                let name: String = bytes[start..i].iter().map(|(_, c)| c).collect();
                let mut path = None;
                if i < bytes.len() && bytes[i].1 == '/' {
                    i += 1;
                    let pstart = i;
                    while i < bytes.len() && is_path_char(bytes[i].1) {
                        i += 1;
                    }
                    path = Some(bytes[pstart..i].iter().map(|(_, c)| c).collect());
                }
                out.push((off, Tok::Var(name, path)));
            }
            '/' => {
                let start = i;
                while i < bytes.len() && is_path_char(bytes[i].1) {
                    i += 1;
                }
                out.push((off, Tok::Path(bytes[start..i].iter().map(|(_, c)| c).collect())));
            }
            '"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(&(eoff, ch)) = bytes.get(i) else {
                        return Err(syntax(off, "unterminated string literal"));
                    };
                    i += 1;
                    match ch {
                        '"' => {
                            if bytes.get(i).map(|b| b.1) == Some('"') {
                                s.push('"');
                                i += 1;
                            } else {
                                break;
                            }
                        }
                        '&' => {
                            let start = i;
                            while i < bytes.len() && bytes[i].1 != ';' {
                                i += 1;
                            }
                            if i >= bytes.len() {
                                return Err(syntax(eoff, "unterminated entity reference"));
                            }
                            let name: String = bytes[start..i].iter().map(|(_, c)| c).collect();
                            i += 1;
                            s.push(decode_entity(&name).ok_or_else(|| {
                                syntax(eoff, &format!("unknown entity `&{name};`"))
                            })?);
                        }
                        _ => s.push(ch),
                    }
                }
                out.push((off, Tok::Str(s)));
            }
            c if c.is_alphabetic() => {
                let start = i;
                while i < bytes.len() && (bytes[i].1.is_alphanumeric() || matches!(bytes[i].1, '-' | '_')) {
                    i += 1;
                }
                out.push((off, Tok::Word(bytes[start..i].iter().map(|(_, c)| c).collect())));
            }
            _ => return Err(XQueryError::Unsupported(c.to_string())),
        }
    }
    Ok(out)
}

fn decode_entity(name: &str) -> Option<char> {
    match name {
        "amp" => Some('&'),
        "lt" => Some('<'),
        "gt" => Some('>'),
        "quot" => Some('"'),
        "apos" => Some('\''),
        _ => {
            let code = if let Some(hex) = name.strip_prefix("#x") {
                u32::from_str_radix(hex, 16).ok()?
            } else {
                name.strip_prefix('#')?.parse().ok()?
            };
            char::from_u32(code)
        }
    }
}

impl XQueryExpr {
    pub fn parse(src: &str) -> Result<Self, XQueryError> {
        let toks = lex(src)?;
        let mut it = toks.into_iter().peekable();
        let end = src.len();
        let syntax = |offset: usize, message: String| XQueryError::Syntax { offset, message };
        let path = |offset: usize, text: &str| {
            XPathExpr::parse(text).map_err(|e| syntax(offset, e.to_string()))
        };

        let expect_word = |it: &mut std::iter::Peekable<std::vec::IntoIter<(usize, Tok)>>,
                               want: &str|
         -> Result<(), XQueryError> {
            match it.next() {
                Some((_, Tok::Word(w))) if w == want => Ok(()),
                Some((off, Tok::Word(w))) if is_unsupported_keyword(&w) => {
                    let _ = off;
                    Err(XQueryError::Unsupported(w))
                }
                Some((off, _)) => Err(syntax(off, format!("expected `{want}`"))),
                None => Err(syntax(end, format!("expected `{want}`, found end of query"))),
            }
        };

        expect_word(&mut it, "for")?;
        let for_var = match it.next() {
            Some((_, Tok::Var(v, None))) => v,
            Some((off, _)) => return Err(syntax(off, "expected `$var` after `for`".into())),
            None => return Err(syntax(end, "expected `$var`".into())),
        };
        expect_word(&mut it, "in")?;
        let for_path = match it.next() {
            Some((off, Tok::Path(p))) => path(off, &p)?,
            Some((off, _)) => return Err(syntax(off, "expected an absolute path after `in`".into())),
            None => return Err(syntax(end, "expected an absolute path".into())),
        };

        let mut where_clauses = Vec::new();
        if matches!(it.peek(), Some((_, Tok::Word(w))) if w == "where") {
            it.next();
            loop {
                let (off, rel) = match it.next() {
                    Some((off, Tok::Var(v, Some(p)))) if v == for_var => (off, p),
                    Some((off, Tok::Var(v, _))) if v != for_var => {
                        return Err(syntax(off, format!("unknown variable `${v}`")))
                    }
                    Some((off, _)) => {
                        return Err(syntax(off, format!("expected `${for_var}/path`")))
                    }
                    None => return Err(syntax(end, "expected a where condition".into())),
                };
                let rel = path(off, &rel)?;
                expect_word(&mut it, "eq")?;
                let value = match it.next() {
                    Some((_, Tok::Str(s))) => s,
                    Some((off, _)) => return Err(syntax(off, "expected a string literal".into())),
                    None => return Err(syntax(end, "expected a string literal".into())),
                };
                where_clauses.push(WhereClause { path: rel, value });
                if matches!(it.peek(), Some((_, Tok::Word(w))) if w == "and") {
                    it.next();
                } else {
                    break;
                }
            }
        }

        expect_word(&mut it, "return")?;
        let return_path = match it.next() {
            Some((_, Tok::Var(v, p))) if v == for_var => match p {
                Some(p) => Some(path(0, &p)?),
                None => None,
            },
            Some((off, _)) => return Err(syntax(off, format!("expected `${for_var}`"))),
            None => return Err(syntax(end, "expected a return expression".into())),
        };
        if let Some((off, t)) = it.next() {
            return match t {
                Tok::Word(w) if is_unsupported_keyword(&w) => Err(XQueryError::Unsupported(w)),
                _ => Err(syntax(off, "unexpected input after return expression".into())),
            };
        }
        Ok(XQueryExpr {
            for_var,
            for_path,
            where_clauses,
            return_path,
        })
    }
}

fn is_unsupported_keyword(w: &str) -> bool {
    matches!(
        w,
        "let" | "order" | "by" | "or" | "some" | "every" | "if" | "declare" | "ne" | "lt" | "gt" | "le" | "ge"
    )
}

/// Positions of the returned items, deduplicated, in document order.
pub fn eval_items(doc: &XmlNode, q: &XQueryExpr) -> Vec<NodePath> {
    let mut items = Vec::new();
    let bound = select(doc, &q.for_path.as_absolute(), None).unwrap_or_default();
    for node_path in bound {
        let keep = q.where_clauses.iter().all(|w| {
            let wanted = normalize_value(&w.value);
            select(doc, &w.path.as_relative(), Some(&node_path))
                .unwrap_or_default()
                .iter()
                .filter_map(|p| resolve(doc, p))
                .any(|n| normalize_value(&n.text()) == wanted)
        });
        if !keep {
            continue;
        }
        match &q.return_path {
            None => items.push(node_path),
            Some(r) => items.extend(select(doc, &r.as_relative(), Some(&node_path)).unwrap_or_default()),
        }
    }
    items.sort();
    items.dedup();
    items
}

/// Copies the given items whole, plus their ancestor chains (ancestors keep
/// their attributes but only the children on the way to an item).
pub fn project(doc: &XmlNode, items: &[NodePath]) -> XmlNode {
    fn build(node: &XmlNode, prefix: &mut Vec<usize>, items: &[NodePath]) -> XmlNode {
        if items.iter().any(|p| p == prefix) {
            return node.clone();
        }
        let mut out = XmlNode {
            name: node.name.clone(),
            attributes: node.attributes.clone(),
            children: Vec::new(),
        };
        for (i, child) in node.children.iter().enumerate() {
            let XmlChild::Element(e) = child else { continue };
            prefix.push(i);
            let below: Vec<NodePath> = items
                .iter()
                .filter(|p| p.starts_with(prefix))
                .cloned()
                .collect();
            if !below.is_empty() {
                out.children.push(XmlChild::Element(build(e, prefix, &below)));
            }
            prefix.pop();
        }
        out
    }
    build(doc, &mut Vec::new(), items)
}

pub fn eval_xquery(doc: &XmlNode, q: &XQueryExpr) -> XmlNode {
    project(doc, &eval_items(doc, q))
}

/// True when the path names an element (no wildcards).
pub fn is_concrete(path: &XPathExpr) -> bool {
    path.steps.iter().all(|s| matches!(s, Step::Name(_)))
}
