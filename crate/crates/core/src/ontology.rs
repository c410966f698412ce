//! Domain ontology: a single-inheritance class tree plus datatype and object
//! properties, loaded from a small line-oriented text format.
//!
//! ```text
//! # comment
//! base http://medley.example/onto#
//! class Protein < BioEntity
//! dataprop hasName domain=BioEntity
//! objprop regulatedBy domain=Protein range=TranscriptionFactor
//! ```
//!
//! Declarations may reference classes declared later in the file.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_BASE_IRI: &str = "http://medley.example/onto#";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate name `{name}`")]
    Duplicate { line: usize, name: String },
    #[error("line {line}: {role} `{name}` does not name a declared class")]
    Dangling {
        line: usize,
        role: &'static str,
        name: String,
    },
    #[error("cycle in class hierarchy: {}", .0.join(" < "))]
    Cycle(Vec<String>),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("predicate `{0}` is ambiguous: it names both a class and a property")]
    Ambiguous(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassDef {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatatypeProperty {
    pub name: String,
    pub domain: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectProperty {
    pub name: String,
    pub domain: String,
    pub range: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredicateKind {
    Class,
    DatatypeProperty,
    ObjectProperty,
}

impl PredicateKind {
    pub fn arity(self) -> usize {
        match self {
            PredicateKind::Class => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredicateKind::Class => "class",
            PredicateKind::DatatypeProperty => "datatype property",
            PredicateKind::ObjectProperty => "object property",
        })
    }
}

/// Outcome of a case-insensitive predicate lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedPredicate {
    pub kind: PredicateKind,
    pub canonical: String,
    /// The lookup spelling differed from the declared spelling.
    pub casing_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Ontology {
    base_iri: String,
    classes: Vec<ClassDef>,
    datatype_properties: Vec<DatatypeProperty>,
    object_properties: Vec<ObjectProperty>,
    #[serde(skip)]
    class_index: HashMap<String, usize>,
    #[serde(skip)]
    property_index: HashMap<String, (PredicateKind, usize)>,
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn fold(name: &str) -> String {
    name.to_ascii_lowercase()
}

/// Parses and validates an ontology file.
pub fn load_ontology(text: &str) -> Result<Ontology, OntologyError> {
    let mut base_iri: Option<String> = None;
    let mut classes: Vec<(usize, ClassDef)> = Vec::new();
    let mut dprops: Vec<(usize, DatatypeProperty)> = Vec::new();
    let mut oprops: Vec<(usize, ObjectProperty)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let syntax = |message: String| OntologyError::Syntax { line, message };
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        match tokens[0] {
            "base" => {
                if tokens.len() != 2 {
                    return Err(syntax("expected `base <absolute-IRI>`".into()));
                }
                if base_iri.is_some() {
                    return Err(syntax("`base` declared more than once".into()));
                }
                let iri = tokens[1];
                if !is_absolute_iri(iri) {
                    return Err(syntax(format!("`{iri}` is not an absolute IRI")));
                }
                base_iri = Some(iri.to_string());
            }
            "class" => {
                let def = match tokens.as_slice() {
                    [_, name] => ClassDef {
                        name: name.to_string(),
                        parent: None,
                    },
                    [_, name, "<", parent] => ClassDef {
                        name: name.to_string(),
                        parent: Some(parent.to_string()),
                    },
                    _ => {
                        return Err(syntax(
                            "expected `class <Name>` or `class <Name> < <Parent>`".into(),
                        ))
                    }
                };
                check_ident(line, &def.name)?;
                if let Some(p) = &def.parent {
                    check_ident(line, p)?;
                }
                classes.push((line, def));
            }
            "dataprop" => {
                let (name, attrs) = split_decl(line, &tokens, &["domain"])?;
                dprops.push((
                    line,
                    DatatypeProperty {
                        name,
                        domain: attrs[0].clone(),
                    },
                ));
            }
            "objprop" => {
                let (name, attrs) = split_decl(line, &tokens, &["domain", "range"])?;
                oprops.push((
                    line,
                    ObjectProperty {
                        name,
                        domain: attrs[0].clone(),
                        range: attrs[1].clone(),
                    },
                ));
            }
            other => return Err(syntax(format!("unknown declaration `{other}`"))),
        }
    }

    let mut class_index = HashMap::new();
    for (i, (line, c)) in classes.iter().enumerate() {
        if class_index.insert(fold(&c.name), i).is_some() {
            return Err(OntologyError::Duplicate {
                line: *line,
                name: c.name.clone(),
            });
        }
    }
    let mut property_index = HashMap::new();
    let all_props = dprops
        .iter()
        .enumerate()
        .map(|(i, (l, p))| (*l, &p.name, PredicateKind::DatatypeProperty, i))
        .chain(
            oprops
                .iter()
                .enumerate()
                .map(|(i, (l, p))| (*l, &p.name, PredicateKind::ObjectProperty, i)),
        );
    for (line, name, kind, i) in all_props {
        if property_index.insert(fold(name), (kind, i)).is_some() {
            return Err(OntologyError::Duplicate {
                line,
                name: name.clone(),
            });
        }
    }

    let resolve_class = |line: usize, role: &'static str, name: &str| {
        class_index
            .get(&fold(name))
            .map(|&i| classes[i].1.name.clone())
            .ok_or_else(|| OntologyError::Dangling {
                line,
                role,
                name: name.to_string(),
            })
    };
    // References are stored under their declared spelling.
    let mut resolved_classes = Vec::with_capacity(classes.len());
    for (line, c) in &classes {
        let parent = match &c.parent {
            Some(p) => Some(resolve_class(*line, "parent", p)?),
            None => None,
        };
        resolved_classes.push(ClassDef {
            name: c.name.clone(),
            parent,
        });
    }
    let mut datatype_properties = Vec::with_capacity(dprops.len());
    for (line, p) in &dprops {
        datatype_properties.push(DatatypeProperty {
            name: p.name.clone(),
            domain: resolve_class(*line, "domain", &p.domain)?,
        });
    }
    let mut object_properties = Vec::with_capacity(oprops.len());
    for (line, p) in &oprops {
        object_properties.push(ObjectProperty {
            name: p.name.clone(),
            domain: resolve_class(*line, "domain", &p.domain)?,
            range: resolve_class(*line, "range", &p.range)?,
        });
    }

    let ont = Ontology {
        base_iri: base_iri.unwrap_or_else(|| DEFAULT_BASE_IRI.to_string()),
        classes: resolved_classes,
        datatype_properties,
        object_properties,
        class_index,
        property_index,
    };
    ont.check_acyclic()?;
    Ok(ont)
}

fn is_absolute_iri(s: &str) -> bool {
    match s.split_once(':') {
        Some((scheme, rest)) => {
            !rest.is_empty()
                && scheme.starts_with(|c: char| c.is_ascii_alphabetic())
                && scheme
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        }
        None => false,
    }
}

fn check_ident(line: usize, name: &str) -> Result<(), OntologyError> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(OntologyError::Syntax {
            line,
            message: format!("`{name}` is not a valid identifier"),
        })
    }
}

fn split_decl(
    line: usize,
    tokens: &[&str],
    keys: &[&str],
) -> Result<(String, Vec<String>), OntologyError> {
    let usage = || OntologyError::Syntax {
        line,
        message: format!(
            "expected `{} <name> {}`",
            tokens[0],
            keys.iter()
                .map(|k| format!("{k}=<Class>"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    };
    if tokens.len() != 2 + keys.len() {
        return Err(usage());
    }
    let name = tokens[1].to_string();
    check_ident(line, &name)?;
    let mut values = Vec::new();
    for (tok, key) in tokens[2..].iter().zip(keys) {
        match tok.split_once('=') {
            Some((k, v)) if k == *key && !v.is_empty() => {
                check_ident(line, v)?;
                values.push(v.to_string());
            }
            _ => return Err(usage()),
        }
    }
    Ok((name, values))
}

impl Ontology {
    pub fn base_iri(&self) -> &str {
        &self.base_iri
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn datatype_properties(&self) -> &[DatatypeProperty] {
        &self.datatype_properties
    }

    pub fn object_properties(&self) -> &[ObjectProperty] {
        &self.object_properties
    }

    fn check_acyclic(&self) -> Result<(), OntologyError> {
        let mut done: HashSet<usize> = HashSet::new();
        for start in 0..self.classes.len() {
            let mut path: Vec<usize> = Vec::new();
            let mut on_path = HashSet::new();
            let mut cur = Some(start);
            while let Some(i) = cur {
                if done.contains(&i) {
                    break;
                }
                if !on_path.insert(i) {
                    let from = path.iter().position(|&p| p == i).unwrap_or(0);
                    let mut cycle: Vec<String> =
                        path[from..].iter().map(|&p| self.classes[p].name.clone()).collect();
                    cycle.push(self.classes[i].name.clone());
                    return Err(OntologyError::Cycle(cycle));
                }
                path.push(i);
                cur = self.classes[i]
                    .parent
                    .as_ref()
                    .map(|p| self.class_index[&fold(p)]);
            }
            done.extend(path);
        }
        Ok(())
    }

    /// Declared spelling of a class, looked up case-insensitively.
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.class_index.get(&fold(name)).map(|&i| &self.classes[i])
    }

    pub fn datatype_property(&self, name: &str) -> Option<&DatatypeProperty> {
        match self.property_index.get(&fold(name)) {
            Some(&(PredicateKind::DatatypeProperty, i)) => Some(&self.datatype_properties[i]),
            _ => None,
        }
    }

    pub fn object_property(&self, name: &str) -> Option<&ObjectProperty> {
        match self.property_index.get(&fold(name)) {
            Some(&(PredicateKind::ObjectProperty, i)) => Some(&self.object_properties[i]),
            _ => None,
        }
    }

    fn class_or_err(&self, name: &str) -> Result<&ClassDef, OntologyError> {
        self.class(name)
            .ok_or_else(|| OntologyError::UnknownClass(name.to_string()))
    }

    /// Reflexive-transitive subclass test: `a` equals `b` or `b` is an ancestor of `a`.
    pub fn is_subclass(&self, a: &str, b: &str) -> Result<bool, OntologyError> {
        let mut cur = Some(self.class_or_err(a)?);
        let target = &self.class_or_err(b)?.name;
        while let Some(c) = cur {
            if &c.name == target {
                return Ok(true);
            }
            cur = c.parent.as_deref().and_then(|p| self.class(p));
        }
        Ok(false)
    }

    /// `is_subclass` for names already known to be declared; unknown names are unrelated.
    pub fn subsumed(&self, a: &str, b: &str) -> bool {
        self.is_subclass(a, b).unwrap_or(false)
    }

    /// Ancestors of a class, starting with the class itself.
    pub fn ancestors(&self, name: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = self.class(name);
        while let Some(c) = cur {
            out.push(c.name.as_str());
            cur = c.parent.as_deref().and_then(|p| self.class(p));
        }
        out
    }

    pub fn resolve_predicate(&self, name: &str) -> Result<ResolvedPredicate, OntologyError> {
        let key = fold(name);
        let class = self.class_index.get(&key).map(|&i| &self.classes[i].name);
        let prop = self.property_index.get(&key).map(|&(kind, i)| match kind {
            PredicateKind::DatatypeProperty => (kind, &self.datatype_properties[i].name),
            _ => (kind, &self.object_properties[i].name),
        });
        let (kind, canonical) = match (class, prop) {
            (Some(_), Some(_)) => return Err(OntologyError::Ambiguous(name.to_string())),
            (Some(c), None) => (PredicateKind::Class, c),
            (None, Some((kind, p))) => (kind, p),
            (None, None) => return Err(OntologyError::UnknownPredicate(name.to_string())),
        };
        Ok(ResolvedPredicate {
            kind,
            canonical: canonical.clone(),
            casing_warning: canonical != name,
        })
    }
}
