//! Exported source schemas: a tree of `<element name=".." minOccurs maxOccurs>`
//! declarations under a `<Schema id=".." source="..">` root.

use thiserror::Error;

use super::xml::{parse_xml, XmlError, XmlNode};
use super::xpath::{Step, XPathExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error(transparent)]
    Xml(#[from] XmlError),
    #[error("invalid schema document: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaViolation {
    #[error("element `{0}` is not declared by the schema")]
    Undeclared(String),
    #[error("element `{path}` occurs {count} times, at most {max} allowed")]
    TooMany { path: String, count: usize, max: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementDecl {
    pub name: String,
    pub min_occurs: usize,
    /// `None` means unbounded.
    pub max_occurs: Option<usize>,
    pub children: Vec<ElementDecl>,
}

impl ElementDecl {
    pub fn is_repeating(&self) -> bool {
        self.max_occurs.map_or(true, |m| m > 1)
    }

    fn child(&self, name: &str) -> Option<&ElementDecl> {
        self.children.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSchema {
    pub schema_id: String,
    pub source: String,
    pub root: ElementDecl,
    /// The schema document as published.
    pub text: String,
}

fn occurs(node: &XmlNode, attr: &str, default: usize) -> Result<Option<usize>, SchemaError> {
    match node.attributes.get(attr).map(String::as_str) {
        None => Ok(Some(default)),
        Some("unbounded") => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| SchemaError::Invalid(format!("bad {attr} value `{v}`"))),
    }
}

fn decl(node: &XmlNode) -> Result<ElementDecl, SchemaError> {
    if node.name != "element" {
        return Err(SchemaError::Invalid(format!("unexpected `<{}>`", node.name)));
    }
    let name = node
        .attributes
        .get("name")
        .ok_or_else(|| SchemaError::Invalid("element declaration without name".into()))?
        .clone();
    let min_occurs = occurs(node, "minOccurs", 1)?
        .ok_or_else(|| SchemaError::Invalid("minOccurs cannot be unbounded".into()))?;
    let max_occurs = occurs(node, "maxOccurs", 1)?;
    let children = node.elements().map(decl).collect::<Result<Vec<_>, _>>()?;
    for (i, c) in children.iter().enumerate() {
        if children[..i].iter().any(|o| o.name == c.name) {
            return Err(SchemaError::Invalid(format!(
                "element `{}` declared twice under `{name}`",
                c.name
            )));
        }
    }
    Ok(ElementDecl {
        name,
        min_occurs,
        max_occurs,
        children,
    })
}

impl SourceSchema {
    pub fn parse(text: &str) -> Result<Self, SchemaError> {
        let doc = parse_xml(text)?;
        if doc.name != "Schema" {
            return Err(SchemaError::Invalid("root must be `<Schema>`".into()));
        }
        let attr = |k: &str| {
            doc.attributes
                .get(k)
                .cloned()
                .ok_or_else(|| SchemaError::Invalid(format!("missing `{k}` attribute")))
        };
        let mut roots = doc.elements();
        let root = roots
            .next()
            .ok_or_else(|| SchemaError::Invalid("no root element declaration".into()))?;
        if roots.next().is_some() {
            return Err(SchemaError::Invalid("more than one root element declaration".into()));
        }
        Ok(SourceSchema {
            schema_id: attr("id")?,
            source: attr("source")?,
            root: decl(root)?,
            text: text.to_string(),
        })
    }

    /// Declarations along an absolute name path, root first.
    pub fn chain(&self, path: &XPathExpr) -> Option<Vec<&ElementDecl>> {
        let mut steps = path.steps.iter();
        let first = match steps.next()? {
            Step::Name(n) if *n == self.root.name => &self.root,
            _ => return None,
        };
        let mut out = vec![first];
        for s in steps {
            let Step::Name(n) = s else { return None };
            out.push(out.last()?.child(n)?);
        }
        Some(out)
    }

    pub fn has_path(&self, path: &XPathExpr) -> bool {
        self.chain(path).is_some()
    }

    /// True when some element on the path, up to and including its last
    /// step, may repeat.
    pub fn repeats_at_or_above(&self, path: &XPathExpr) -> bool {
        self.chain(path)
            .map_or(false, |c| c.iter().any(|d| d.is_repeating()))
    }

    /// Checks element names and occurrence upper bounds. Lower bounds are
    /// not checked: result documents are projections and omit siblings.
    pub fn validate(&self, doc: &XmlNode) -> Result<(), SchemaViolation> {
        fn walk(decl: &ElementDecl, node: &XmlNode, path: &str) -> Result<(), SchemaViolation> {
            let mut counts: Vec<(&str, usize)> = Vec::new();
            for child in node.elements() {
                let child_path = format!("{path}/{}", child.name);
                let d = decl
                    .child(&child.name)
                    .ok_or_else(|| SchemaViolation::Undeclared(child_path.clone()))?;
                match counts.iter_mut().find(|(n, _)| *n == child.name) {
                    Some((_, c)) => *c += 1,
                    None => counts.push((&child.name, 1)),
                }
                walk(d, child, &child_path)?;
            }
            for (name, count) in counts {
                let d = decl.child(name).expect("checked above");
                if let Some(max) = d.max_occurs {
                    if count > max {
                        return Err(SchemaViolation::TooMany {
                            path: format!("{path}/{name}"),
                            count,
                            max,
                        });
                    }
                }
            }
            Ok(())
        }
        if doc.name != self.root.name {
            return Err(SchemaViolation::Undeclared(format!("/{}", doc.name)));
        }
        walk(&self.root, doc, &format!("/{}", doc.name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SGD: &str = include_str!("../../fixtures/sgd/schema.xml");

    #[test]
    fn sgd_schema_paths() {
        let s = SourceSchema::parse(SGD).unwrap();
        assert_eq!(s.schema_id, "sgd-export-1");
        assert_eq!(s.source, "sgd");
        assert!(s.has_path(&XPathExpr::parse("/Result/Entries/Entry/Protein").unwrap()));
        assert!(s.has_path(&XPathExpr::parse("/Result/Entries/Entry/Protein/Description").unwrap()));
        assert!(!s.has_path(&XPathExpr::parse("/Result/Entries/Protein").unwrap()));
        let entry = XPathExpr::parse("/Result/Entries/Entry").unwrap();
        assert!(s.repeats_at_or_above(&entry));
        assert!(!s.repeats_at_or_above(&XPathExpr::parse("/Result/Entries").unwrap()));
    }

    #[test]
    fn fixture_data_conforms() {
        let s = SourceSchema::parse(SGD).unwrap();
        let doc = parse_xml(include_str!("../../fixtures/sgd/data.xml")).unwrap();
        s.validate(&doc).unwrap();
    }

    #[test]
    fn violations_detected() {
        let s = SourceSchema::parse(SGD).unwrap();
        let bad = parse_xml("<Result><Entries><Entry><Protein><Oops/></Protein></Entry></Entries></Result>").unwrap();
        assert!(matches!(s.validate(&bad), Err(SchemaViolation::Undeclared(_))));
        let two = parse_xml("<Result><Entries><Entry><Protein><Name>a</Name><Name>b</Name></Protein></Entry></Entries></Result>").unwrap();
        assert!(matches!(s.validate(&two), Err(SchemaViolation::TooMany { max: 1, .. })));
    }
}
