//! The semantic directory: registered sources, their exported schemas, key
//! paths, and the class / datatype / object mapping rules.
//!
//! Mapping file lines (`#` starts a comment):
//!
//! ```text
//! Result/Entries/Entry/Protein, Protein, 100
//! Result/Entries/Entry/Protein; Description, Protein; hasDescription, 100
//! Result/Entries/Entry/Protein; Result/Entries/Entry/Protein/References/Reference, Protein; BibRef; hasBibRef, 100
//! ```
//!
//! Registry file lines:
//!
//! ```text
//! source sgd endpoint=inproc:sgd schema=sgd-export-1 map=sgd.map
//! key sgd Protein Name
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ontology::{Ontology, OntologyError, PredicateKind};
use crate::xsource::{SourceSchema, XPathExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SemdirError {
    #[error("{source_name}.map line {line}: {message}")]
    MalformedLine {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("{source_name}.map line {line}: {error}")]
    UnknownTerm {
        source_name: String,
        line: usize,
        error: OntologyError,
    },
    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
    #[error("source `{source_name}`: {message}")]
    Constraint { source_name: String, message: String },
    #[error("unknown source `{0}`")]
    UnknownSource(String),
}

fn is_name(s: &str) -> bool {
    crate::ontology::is_identifier(s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceRegistration {
    pub name: String,
    pub endpoint: String,
    pub schema_id: String,
    pub map: String,
    #[serde(serialize_with = "ser_keys")]
    pub key_paths: BTreeMap<String, XPathExpr>,
}

fn ser_keys<S: serde::Serializer>(
    keys: &BTreeMap<String, XPathExpr>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(keys.iter().map(|(k, v)| (k, v.to_string())))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    pub sources: Vec<SourceRegistration>,
}

impl Registry {
    pub fn get(&self, name: &str) -> Option<&SourceRegistration> {
        self.sources.iter().find(|s| s.name == name)
    }
}

pub fn parse_registry(text: &str) -> Result<Registry, SemdirError> {
    let mut reg = Registry::default();
    let mut keys: Vec<(usize, String, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| SemdirError::Registry { line, message };
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let words: Vec<&str> = l.split_whitespace().collect();
        match words[0] {
            "source" => {
                let name = words.get(1).ok_or_else(|| err("missing source name".into()))?;
                if !is_name(name) {
                    return Err(err(format!("`{name}` is not a valid source name")));
                }
                if reg.get(name).is_some() {
                    return Err(err(format!("source `{name}` registered twice")));
                }
                let mut fields = BTreeMap::new();
                for w in &words[2..] {
                    let (k, v) = w
                        .split_once('=')
                        .ok_or_else(|| err(format!("expected key=value, found `{w}`")))?;
                    if !matches!(k, "endpoint" | "schema" | "map") {
                        return Err(err(format!("unknown field `{k}`")));
                    }
                    if fields.insert(k, v.to_string()).is_some() {
                        return Err(err(format!("field `{k}` given twice")));
                    }
                }
                let mut take = |k: &str| {
                    fields
                        .remove(k)
                        .ok_or_else(|| err(format!("missing `{k}=`")))
                };
                reg.sources.push(SourceRegistration {
                    name: name.to_string(),
                    endpoint: take("endpoint")?,
                    schema_id: take("schema")?,
                    map: take("map")?,
                    key_paths: BTreeMap::new(),
                });
            }
            "key" => {
                if words.len() != 4 {
                    return Err(err("expected `key <source> <Class> <relative-path>`".into()));
                }
                keys.push((line, words[1].into(), words[2].into(), words[3].into()));
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    for (line, source, class, path) in keys {
        let err = |message: String| SemdirError::Registry { line, message };
        let p = XPathExpr::parse(&path).map_err(|e| err(e.to_string()))?;
        if p.absolute {
            return Err(err("key paths are relative".into()));
        }
        let s = reg
            .sources
            .iter_mut()
            .find(|s| s.name == source)
            .ok_or_else(|| err(format!("key for unregistered source `{source}`")))?;
        if s.key_paths.insert(class.clone(), p).is_some() {
            return Err(err(format!("key for `{source}`/`{class}` given twice")));
        }
    }
    Ok(reg)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ClassMapping {
    pub source: String,
    #[serde(serialize_with = "ser_path")]
    pub element_location: XPathExpr,
    pub class_name: String,
    pub correspondence_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DatatypeMapping {
    pub source: String,
    #[serde(serialize_with = "ser_path")]
    pub domain_location: XPathExpr,
    #[serde(serialize_with = "ser_path")]
    pub value_location: XPathExpr,
    pub domain_name: String,
    pub property_name: String,
    pub correspondence_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct ObjectMapping {
    pub source: String,
    #[serde(serialize_with = "ser_path")]
    pub domain_location: XPathExpr,
    #[serde(serialize_with = "ser_path")]
    pub range_location: XPathExpr,
    pub domain_name: String,
    pub range_name: String,
    pub property_name: String,
    pub correspondence_index: u32,
}

fn ser_path<S: serde::Serializer>(p: &XPathExpr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&p.to_string())
}

impl DatatypeMapping {
    /// Absolute location of the value element.
    pub fn value_path(&self) -> XPathExpr {
        self.domain_location.join(&self.value_location)
    }
}

impl ObjectMapping {
    /// Deepest element containing both the domain and the range elements.
    pub fn ancestor(&self) -> XPathExpr {
        self.domain_location.common_prefix(&self.range_location)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Mapping {
    Class(ClassMapping),
    Datatype(DatatypeMapping),
    Object(ObjectMapping),
}

impl Mapping {
    pub fn source(&self) -> &str {
        match self {
            Mapping::Class(m) => &m.source,
            Mapping::Datatype(m) => &m.source,
            Mapping::Object(m) => &m.source,
        }
    }

    pub fn correspondence_index(&self) -> u32 {
        match self {
            Mapping::Class(m) => m.correspondence_index,
            Mapping::Datatype(m) => m.correspondence_index,
            Mapping::Object(m) => m.correspondence_index,
        }
    }

    /// The mapping-file line for this rule.
    pub fn to_line(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mapping::Class(m) => write!(
                f,
                "{}, {}, {}",
                m.element_location.to_mapping_text(),
                m.class_name,
                m.correspondence_index
            ),
            Mapping::Datatype(m) => write!(
                f,
                "{}; {}, {}; {}, {}",
                m.domain_location.to_mapping_text(),
                m.value_location.to_mapping_text(),
                m.domain_name,
                m.property_name,
                m.correspondence_index
            ),
            Mapping::Object(m) => write!(
                f,
                "{}; {}, {}; {}; {}, {}",
                m.domain_location.to_mapping_text(),
                m.range_location.to_mapping_text(),
                m.domain_name,
                m.range_name,
                m.property_name,
                m.correspondence_index
            ),
        }
    }
}

/// Parses one source's mapping file, resolving ontology terms to their
/// declared spelling.
pub fn parse_mapping_file(
    source: &str,
    text: &str,
    ont: &Ontology,
) -> Result<Vec<Mapping>, SemdirError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        out.push(parse_mapping_line(source, line, l, ont)?);
    }
    Ok(out)
}

fn parse_mapping_line(
    source: &str,
    line: usize,
    l: &str,
    ont: &Ontology,
) -> Result<Mapping, SemdirError> {
    let malformed = |message: &str| SemdirError::MalformedLine {
        source_name: source.to_string(),
        line,
        message: message.to_string(),
    };
    let unknown = |error: OntologyError| SemdirError::UnknownTerm {
        source_name: source.to_string(),
        line,
        error,
    };
    let fields: Vec<&str> = l.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(malformed("expected three comma-separated fields"));
    }
    let index: u32 = fields[2]
        .parse()
        .map_err(|_| malformed("correspondence index is not an integer"))?;
    if index > 100 {
        return Err(malformed("correspondence index must be between 0 and 100"));
    }
    let abs = |t: &str| -> Result<XPathExpr, SemdirError> {
        let p = XPathExpr::parse(t).map_err(|e| malformed(&e.to_string()))?;
        if !crate::xsource::xquery::is_concrete(&p) {
            return Err(malformed("mapping locations cannot contain wildcards"));
        }
        Ok(p.as_absolute())
    };
    let class = |t: &str| -> Result<String, SemdirError> {
        if !is_name(t) {
            return Err(malformed(&format!("`{t}` is not an identifier")));
        }
        ont.class(t)
            .map(|c| c.name.clone())
            .ok_or_else(|| unknown(OntologyError::UnknownClass(t.to_string())))
    };
    let property = |t: &str, want: PredicateKind| -> Result<String, SemdirError> {
        let r = ont.resolve_predicate(t).map_err(unknown)?;
        if r.kind != want {
            return Err(malformed(&format!("`{t}` is a {}, expected a {want}", r.kind)));
        }
        Ok(r.canonical)
    };
    let left: Vec<&str> = fields[0].split(';').map(str::trim).collect();
    let mid: Vec<&str> = fields[1].split(';').map(str::trim).collect();
    match (left.len(), mid.len()) {
        (1, 1) => Ok(Mapping::Class(ClassMapping {
            source: source.to_string(),
            element_location: abs(left[0])?,
            class_name: class(mid[0])?,
            correspondence_index: index,
        })),
        (2, 2) => {
            let value = XPathExpr::parse(left[1]).map_err(|e| malformed(&e.to_string()))?;
            if value.absolute {
                return Err(malformed("value location must be relative"));
            }
            Ok(Mapping::Datatype(DatatypeMapping {
                source: source.to_string(),
                domain_location: abs(left[0])?,
                value_location: value,
                domain_name: class(mid[0])?,
                property_name: property(mid[1], PredicateKind::DatatypeProperty)?,
                correspondence_index: index,
            }))
        }
        (2, 3) => Ok(Mapping::Object(ObjectMapping {
            source: source.to_string(),
            domain_location: abs(left[0])?,
            range_location: abs(left[1])?,
            domain_name: class(mid[0])?,
            range_name: class(mid[1])?,
            property_name: property(mid[2], PredicateKind::ObjectProperty)?,
            correspondence_index: index,
        })),
        _ => Err(malformed("separator structure matches no mapping kind")),
    }
}

/// Immutable directory shared by all requests.
#[derive(Debug, Clone)]
pub struct SemanticDirectory {
    ontology: Arc<Ontology>,
    sources: Vec<SourceRegistration>,
    schemas: BTreeMap<String, Arc<SourceSchema>>,
    class_mappings: Vec<ClassMapping>,
    datatype_mappings: Vec<DatatypeMapping>,
    object_mappings: Vec<ObjectMapping>,
}

impl SemanticDirectory {
    /// Builds and checks a directory. `mappings` holds each source's parsed
    /// rules; rules below `min_index` are dropped, along with rules whose
    /// locations are no longer class-mapped.
    pub fn new(
        ontology: Arc<Ontology>,
        registry: Registry,
        mappings: BTreeMap<String, Vec<Mapping>>,
        schemas: BTreeMap<String, SourceSchema>,
        min_index: u32,
    ) -> Result<Self, SemdirError> {
        let mut dir = SemanticDirectory {
            ontology,
            sources: registry.sources,
            schemas: BTreeMap::new(),
            class_mappings: Vec::new(),
            datatype_mappings: Vec::new(),
            object_mappings: Vec::new(),
        };
        for name in mappings.keys().chain(schemas.keys()) {
            if !dir.sources.iter().any(|s| &s.name == name) {
                return Err(SemdirError::UnknownSource(name.clone()));
            }
        }
        for reg in &dir.sources {
            let schema = schemas.get(&reg.name).ok_or_else(|| SemdirError::Constraint {
                source_name: reg.name.clone(),
                message: "no exported schema available".into(),
            })?;
            if schema.schema_id != reg.schema_id {
                return Err(SemdirError::Constraint {
                    source_name: reg.name.clone(),
                    message: format!(
                        "registered schema `{}` but the source exports `{}`",
                        reg.schema_id, schema.schema_id
                    ),
                });
            }
        }
        dir.schemas = schemas.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
        for reg in dir.sources.clone() {
            let rules = mappings.get(&reg.name).cloned().unwrap_or_default();
            let mut seen = std::collections::HashSet::new();
            for m in rules {
                if m.source() != reg.name {
                    return Err(SemdirError::Constraint {
                        source_name: reg.name.clone(),
                        message: format!("rule `{m}` belongs to source `{}`", m.source()),
                    });
                }
                // Re-registering an identical rule is a no-op.
                if !seen.insert(m.clone()) {
                    continue;
                }
                match m {
                    Mapping::Class(c) => dir.class_mappings.push(c),
                    Mapping::Datatype(d) => dir.datatype_mappings.push(d),
                    Mapping::Object(o) => dir.object_mappings.push(o),
                }
            }
        }
        dir.check()?;
        dir.class_mappings.retain(|m| m.correspondence_index >= min_index);
        let located = |dir: &SemanticDirectory, s: &str, l: &XPathExpr| dir.location_class(s, l).is_some();
        let keep_d: Vec<bool> = dir
            .datatype_mappings
            .iter()
            .map(|m| m.correspondence_index >= min_index && located(&dir, &m.source, &m.domain_location))
            .collect();
        let keep_o: Vec<bool> = dir
            .object_mappings
            .iter()
            .map(|m| {
                m.correspondence_index >= min_index
                    && located(&dir, &m.source, &m.domain_location)
                    && located(&dir, &m.source, &m.range_location)
            })
            .collect();
        let mut it = keep_d.into_iter();
        dir.datatype_mappings.retain(|_| it.next().unwrap());
        let mut it = keep_o.into_iter();
        dir.object_mappings.retain(|_| it.next().unwrap());
        Ok(dir)
    }

    fn check(&self) -> Result<(), SemdirError> {
        let ont = &self.ontology;
        let fail = |source: &str, message: String| SemdirError::Constraint {
            source_name: source.to_string(),
            message,
        };
        for reg in &self.sources {
            let schema = &self.schemas[&reg.name];
            let classes: Vec<&ClassMapping> = self
                .class_mappings
                .iter()
                .filter(|m| m.source == reg.name)
                .collect();
            for (i, m) in classes.iter().enumerate() {
                if !schema.has_path(&m.element_location) {
                    return Err(fail(&reg.name, format!("`{}` is not in the exported schema", m.element_location)));
                }
                if classes[..i].iter().any(|o| o.element_location == m.element_location) {
                    return Err(fail(&reg.name, format!("`{}` is mapped to two classes", m.element_location)));
                }
                let key = reg.key_paths.get(&m.class_name).ok_or_else(|| {
                    fail(&reg.name, format!("class `{}` has no key path", m.class_name))
                })?;
                if !schema.has_path(&m.element_location.join(key)) {
                    return Err(fail(
                        &reg.name,
                        format!("key path `{key}` missing under `{}`", m.element_location),
                    ));
                }
            }
            for class in reg.key_paths.keys() {
                if !classes.iter().any(|m| &m.class_name == class) {
                    return Err(fail(&reg.name, format!("key path for unmapped class `{class}`")));
                }
            }
            let class_at = |loc: &XPathExpr| {
                classes
                    .iter()
                    .find(|m| &m.element_location == loc)
                    .map(|m| m.class_name.as_str())
            };
            let expect_class = |loc: &XPathExpr, name: &str| -> Result<(), SemdirError> {
                match class_at(loc) {
                    Some(c) if c == name => Ok(()),
                    Some(c) => Err(fail(&reg.name, format!("`{loc}` is mapped to `{c}`, not `{name}`"))),
                    None => Err(fail(&reg.name, format!("`{loc}` has no class mapping"))),
                }
            };
            for m in self.datatype_mappings.iter().filter(|m| m.source == reg.name) {
                expect_class(&m.domain_location, &m.domain_name)?;
                if !schema.has_path(&m.value_path()) {
                    return Err(fail(&reg.name, format!("`{}` is not in the exported schema", m.value_path())));
                }
                let declared = &ont.datatype_property(&m.property_name).expect("resolved at parse").domain;
                if !ont.subsumed(&m.domain_name, declared) {
                    return Err(fail(
                        &reg.name,
                        format!("`{}` is not a subclass of `{declared}`, the domain of `{}`", m.domain_name, m.property_name),
                    ));
                }
            }
            for m in self.object_mappings.iter().filter(|m| m.source == reg.name) {
                expect_class(&m.domain_location, &m.domain_name)?;
                expect_class(&m.range_location, &m.range_name)?;
                let p = ont.object_property(&m.property_name).expect("resolved at parse");
                if !ont.subsumed(&m.domain_name, &p.domain) || !ont.subsumed(&m.range_name, &p.range) {
                    return Err(fail(
                        &reg.name,
                        format!("`{}` -> `{}` does not fit the declaration of `{}`", m.domain_name, m.range_name, p.name),
                    ));
                }
                if m.domain_location == m.range_location {
                    return Err(fail(&reg.name, format!("`{}` maps both ends to one element", p.name)));
                }
                let a = m.ancestor();
                if a.steps.is_empty() || !schema.repeats_at_or_above(&a) {
                    return Err(fail(
                        &reg.name,
                        format!("`{}` and `{}` share no repeating ancestor", m.domain_location, m.range_location),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn ontology_arc(&self) -> Arc<Ontology> {
        self.ontology.clone()
    }

    pub fn sources(&self) -> &[SourceRegistration] {
        &self.sources
    }

    pub fn source(&self, name: &str) -> Option<&SourceRegistration> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn source_rank(&self, name: &str) -> usize {
        self.sources.iter().position(|s| s.name == name).unwrap_or(usize::MAX)
    }

    pub fn schema(&self, source: &str) -> Option<&SourceSchema> {
        self.schemas.get(source).map(|s| s.as_ref())
    }

    pub fn class_mappings(&self) -> &[ClassMapping] {
        &self.class_mappings
    }

    pub fn datatype_mappings(&self) -> &[DatatypeMapping] {
        &self.datatype_mappings
    }

    pub fn object_mappings(&self) -> &[ObjectMapping] {
        &self.object_mappings
    }

    /// All rules in registry order, each source's rules in file order by kind.
    pub fn mappings(&self) -> Vec<Mapping> {
        let mut out = Vec::new();
        for s in &self.sources {
            out.extend(self.class_mappings.iter().filter(|m| m.source == s.name).cloned().map(Mapping::Class));
            out.extend(self.datatype_mappings.iter().filter(|m| m.source == s.name).cloned().map(Mapping::Datatype));
            out.extend(self.object_mappings.iter().filter(|m| m.source == s.name).cloned().map(Mapping::Object));
        }
        out
    }

    pub fn key_path(&self, source: &str, class: &str) -> Option<&XPathExpr> {
        self.source(source)?.key_paths.get(class)
    }

    /// Class mapped at an element location of a source.
    pub fn location_class(&self, source: &str, location: &XPathExpr) -> Option<&str> {
        self.class_mappings
            .iter()
            .find(|m| m.source == source && &m.element_location == location)
            .map(|m| m.class_name.as_str())
    }

    /// Class mappings whose class is `class` or one of its subclasses.
    pub fn lookup_class(&self, class: &str) -> Vec<&ClassMapping> {
        self.class_mappings
            .iter()
            .filter(|m| self.ontology.subsumed(&m.class_name, class))
            .collect()
    }

    /// Datatype mappings of `property` whose domain class is within `domain`.
    pub fn lookup_datatype(&self, domain: &str, property: &str) -> Vec<&DatatypeMapping> {
        self.datatype_mappings
            .iter()
            .filter(|m| m.property_name == property && self.ontology.subsumed(&m.domain_name, domain))
            .collect()
    }

    /// Object mappings of `property` whose domain and range classes are
    /// within `domain` and `range`.
    pub fn lookup_object(&self, domain: &str, range: &str, property: &str) -> Vec<&ObjectMapping> {
        self.object_mappings
            .iter()
            .filter(|m| {
                m.property_name == property
                    && self.ontology.subsumed(&m.domain_name, domain)
                    && self.ontology.subsumed(&m.range_name, range)
            })
            .collect()
    }

    pub fn datatype_mappings_of(&self, property: &str) -> Vec<&DatatypeMapping> {
        self.datatype_mappings.iter().filter(|m| m.property_name == property).collect()
    }

    pub fn object_mappings_of(&self, property: &str) -> Vec<&ObjectMapping> {
        self.object_mappings.iter().filter(|m| m.property_name == property).collect()
    }

    /// The directory seen through an allow-list of sources.
    pub fn restrict(&self, allowed: &[String]) -> Result<SemanticDirectory, SemdirError> {
        for a in allowed {
            if self.source(a).is_none() {
                return Err(SemdirError::UnknownSource(a.clone()));
            }
        }
        let keep = |s: &str| allowed.iter().any(|a| a == s);
        Ok(SemanticDirectory {
            ontology: self.ontology.clone(),
            sources: self.sources.iter().filter(|s| keep(&s.name)).cloned().collect(),
            schemas: self.schemas.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            class_mappings: self.class_mappings.iter().filter(|m| keep(&m.source)).cloned().collect(),
            datatype_mappings: self.datatype_mappings.iter().filter(|m| keep(&m.source)).cloned().collect(),
            object_mappings: self.object_mappings.iter().filter(|m| keep(&m.source)).cloned().collect(),
        })
    }
}
