//! Child-axis location paths: `/Result/Entries/Entry`, `Description`, `*/Name`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::xml::XmlNode;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum XPathError {
    #[error("invalid path `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("relative path `{0}` evaluated without a context node")]
    NoContext(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Step {
    Name(String),
    Wildcard,
}

impl Step {
    pub fn matches(&self, name: &str) -> bool {
        match self {
            Step::Name(n) => n == name,
            Step::Wildcard => true,
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Name(n) => f.write_str(n),
            Step::Wildcard => f.write_str("*"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct XPathExpr {
    pub absolute: bool,
    pub steps: Vec<Step>,
}

pub fn is_xml_name(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

impl XPathExpr {
    pub fn parse(text: &str) -> Result<Self, XPathError> {
        let err = |message: &str| XPathError::Parse {
            path: text.to_string(),
            message: message.to_string(),
        };
        let t = text.trim();
        let (absolute, rest) = match t.strip_prefix('/') {
            Some(r) => (true, r),
            None => (false, t),
        };
        if rest.is_empty() {
            return Err(err("at least one step is required"));
        }
        let steps = rest
            .split('/')
            .map(|s| match s {
                "*" => Ok(Step::Wildcard),
                s if is_xml_name(s) => Ok(Step::Name(s.to_string())),
                "" => Err(err("empty step")),
                _ => Err(err("step is not an XML name")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(XPathExpr { absolute, steps })
    }

    pub fn absolute(steps: &[&str]) -> Self {
        XPathExpr {
            absolute: true,
            steps: steps.iter().map(|s| Step::Name(s.to_string())).collect(),
        }
    }

    pub fn as_absolute(&self) -> Self {
        XPathExpr {
            absolute: true,
            steps: self.steps.clone(),
        }
    }

    pub fn as_relative(&self) -> Self {
        XPathExpr {
            absolute: false,
            steps: self.steps.clone(),
        }
    }

    /// `self` followed by the steps of `rel`.
    pub fn join(&self, rel: &XPathExpr) -> Self {
        let mut steps = self.steps.clone();
        steps.extend(rel.steps.iter().cloned());
        XPathExpr {
            absolute: self.absolute,
            steps,
        }
    }

    pub fn starts_with(&self, prefix: &XPathExpr) -> bool {
        self.steps.len() >= prefix.steps.len() && self.steps[..prefix.steps.len()] == prefix.steps[..]
    }

    /// Steps of `self` after `prefix`, as a relative path; `None` when not a
    /// proper extension.
    pub fn relative_to(&self, prefix: &XPathExpr) -> Option<XPathExpr> {
        if self.starts_with(prefix) && self.steps.len() > prefix.steps.len() {
            Some(XPathExpr {
                absolute: false,
                steps: self.steps[prefix.steps.len()..].to_vec(),
            })
        } else {
            None
        }
    }

    /// Longest shared leading run of steps.
    pub fn common_prefix(&self, other: &XPathExpr) -> XPathExpr {
        let n = self
            .steps
            .iter()
            .zip(&other.steps)
            .take_while(|(a, b)| a == b)
            .count();
        XPathExpr {
            absolute: self.absolute,
            steps: self.steps[..n].to_vec(),
        }
    }

    /// Text without the leading slash, the form used in mapping files.
    pub fn to_mapping_text(&self) -> String {
        self.steps
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join("/")
    }
}

impl fmt::Display for XPathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.absolute {
            f.write_str("/")?;
        }
        f.write_str(&self.to_mapping_text())
    }
}

impl FromStr for XPathExpr {
    type Err = XPathError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        XPathExpr::parse(s)
    }
}

/// Position of an element as child indices from the document root.
pub type NodePath = Vec<usize>;

pub fn resolve<'a>(doc: &'a XmlNode, path: &[usize]) -> Option<&'a XmlNode> {
    let mut cur = doc;
    for &i in path {
        cur = cur.element_at(i)?;
    }
    Some(cur)
}

/// Selects element positions in document order. Relative paths start from
/// `context`.
pub fn select(
    doc: &XmlNode,
    path: &XPathExpr,
    context: Option<&[usize]>,
) -> Result<Vec<NodePath>, XPathError> {
    let mut current: Vec<NodePath> = if path.absolute {
        match path.steps.first() {
            Some(s) if s.matches(&doc.name) => vec![Vec::new()],
            _ => return Ok(Vec::new()),
        }
    } else {
        let ctx = context.ok_or_else(|| XPathError::NoContext(path.to_string()))?;
        vec![ctx.to_vec()]
    };
    let rest = if path.absolute { &path.steps[1..] } else { &path.steps[..] };
    for step in rest {
        let mut next = Vec::new();
        for p in &current {
            let Some(node) = resolve(doc, p) else { continue };
            for (i, c) in node.children.iter().enumerate() {
                if let super::xml::XmlChild::Element(e) = c {
                    if step.matches(&e.name) {
                        let mut np = p.clone();
                        np.push(i);
                        next.push(np);
                    }
                }
            }
        }
        current = next;
    }
    Ok(current)
}

/// Child-axis evaluation returning the selected elements in document order.
pub fn eval_xpath<'a>(
    doc: &'a XmlNode,
    path: &XPathExpr,
    context: Option<&'a XmlNode>,
) -> Result<Vec<&'a XmlNode>, XPathError> {
    if path.absolute {
        return Ok(select(doc, path, None)?
            .iter()
            .filter_map(|p| resolve(doc, p))
            .collect());
    }
    let ctx = context.ok_or_else(|| XPathError::NoContext(path.to_string()))?;
    let mut current = vec![ctx];
    for step in &path.steps {
        current = current
            .into_iter()
            .flat_map(|n| n.elements().filter(|e| step.matches(&e.name)))
            .collect();
    }
    Ok(current)
}
