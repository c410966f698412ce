//! The controller: configuration, and the parse → validate → plan →
//! execute → integrate → serialize pipeline behind every request.
//!
//! Configuration is a `key = value` text file; `#` starts a comment line
//! and relative paths resolve against the file's directory:
//!
//! ```text
//! ontology = yeast.onto
//! registry = registry.txt
//! listen = 127.0.0.1:8080
//! format = xml
//! sources = sgd, yeastract, mips, biogrid, phosphogrid
//! searchable = hasName, hasSystematicName, hasDescription
//! min_index = 0
//! ```
//!
//! Sources registered with an `inproc:<name>` endpoint are served from
//! `<registry dir>/<name>/`; `http://` endpoints are source daemons.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cq::{parse_query, validate, CqError, Position, Term};
use crate::integrator::{answer_plan, serialize, CallRecord, Format, IntegrationError, ResultSet};
use crate::ontology::{load_ontology, Ontology};
use crate::planner::{plan_query, render_groups, render_plan, PlanTree};
use crate::semdir::{parse_mapping_file, parse_registry, SemanticDirectory};
use crate::xsource::{DataService, FixtureService, HttpService, ServiceError, SourceSchema};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Request,
    Parse,
    Validate,
    Plan,
    Execute,
    Serialize,
}

/// How a failure should be reported: the caller's fault, an unreachable
/// source, or anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Client,
    Transport,
    Internal,
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize)]
#[error("{stage:?} error: {message}")]
pub struct MediatorError {
    pub stage: Stage,
    pub class: ErrorClass,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Position>,
}

impl MediatorError {
    fn new(stage: Stage, class: ErrorClass, message: impl ToString) -> Self {
        MediatorError {
            stage,
            class,
            message: message.to_string(),
            position: None,
        }
    }

    fn config(message: impl ToString) -> Self {
        Self::new(Stage::Config, ErrorClass::Internal, message)
    }

    fn from_cq(stage: Stage, e: CqError) -> Self {
        let position = match &e {
            CqError::Syntax { pos, .. } | CqError::EmptyBody { pos } => Some(*pos),
            _ => None,
        };
        MediatorError {
            position,
            ..Self::new(stage, ErrorClass::Client, e)
        }
    }

    fn from_integration(e: IntegrationError) -> Self {
        let class = match &e {
            IntegrationError::Service(ServiceError::Transport { .. }) => ErrorClass::Transport,
            IntegrationError::UnknownFormat(_) => ErrorClass::Client,
            _ => ErrorClass::Internal,
        };
        Self::new(Stage::Execute, class, e)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediatorConfig {
    pub ontology: PathBuf,
    pub registry: PathBuf,
    pub listen: String,
    pub format: Format,
    /// Allow-list of registered sources; `None` means all.
    pub sources: Option<Vec<String>>,
    pub searchable: Vec<String>,
    pub min_index: u32,
}

impl Default for MediatorConfig {
    fn default() -> Self {
        MediatorConfig {
            ontology: PathBuf::from("yeast.onto"),
            registry: PathBuf::from("registry.txt"),
            listen: "127.0.0.1:8080".into(),
            format: Format::Xml,
            sources: None,
            searchable: vec!["hasName".into(), "hasSystematicName".into(), "hasDescription".into()],
            min_index: 0,
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

impl MediatorConfig {
    /// Parses config text; relative paths are joined onto `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, MediatorError> {
        let mut c = MediatorConfig::default();
        let mut ontology = None;
        let mut registry = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| MediatorError::config(format!("config line {}: {m}", i + 1));
            let (key, value) = line.split_once('=').ok_or_else(|| bad("expected `key = value`"))?;
            let value = value.trim();
            match key.trim() {
                "ontology" => ontology = Some(base.join(value)),
                "registry" => registry = Some(base.join(value)),
                "listen" => c.listen = value.to_string(),
                "format" => c.format = value.parse().map_err(|e: IntegrationError| bad(&e.to_string()))?,
                "sources" => c.sources = Some(list(value)),
                "searchable" => c.searchable = list(value),
                "min_index" => c.min_index = value.parse().map_err(|_| bad("min_index must be an integer"))?,
                other => return Err(bad(&format!("unknown key `{other}`"))),
            }
        }
        c.ontology = ontology.unwrap_or_else(|| base.join(&c.ontology));
        c.registry = registry.unwrap_or_else(|| base.join(&c.registry));
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, MediatorError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MediatorError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// A query to answer. `keyword` runs the quick search when `query` is empty.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    #[serde(default)]
    pub query: String,
    #[serde(default)]
    pub keyword: Option<String>,
    #[serde(default)]
    pub sources: Option<Vec<String>>,
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub explain: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroupRow {
    pub label: String,
    pub atoms: String,
    pub sources: Vec<String>,
    pub placement: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub groups: Vec<GroupRow>,
    pub groups_text: String,
    pub plan_text: String,
    pub calls: Vec<CallRecord>,
    pub calls_per_source: BTreeMap<String, usize>,
    pub type_check_drops: usize,
    pub skipped_elements: usize,
    pub warnings: Vec<String>,
    /// Milliseconds per stage.
    pub timing_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryResponse {
    pub format: Format,
    pub body: String,
    pub result: ResultSet,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SourceInfo {
    pub name: String,
    pub endpoint: String,
    pub schema_id: String,
    pub description: String,
}

pub struct Mediator {
    config: MediatorConfig,
    directory: SemanticDirectory,
    services: BTreeMap<String, Arc<dyn DataService>>,
}

fn ms(since: Instant) -> f64 {
    (since.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

impl Mediator {
    /// Wires an already loaded directory and services; the config's
    /// allow-list narrows the directory.
    pub fn new(
        config: MediatorConfig,
        directory: SemanticDirectory,
        services: BTreeMap<String, Arc<dyn DataService>>,
    ) -> Result<Self, MediatorError> {
        let directory = match &config.sources {
            Some(allowed) => directory.restrict(allowed).map_err(MediatorError::config)?,
            None => directory,
        };
        for s in directory.sources() {
            if !services.contains_key(&s.name) {
                return Err(MediatorError::config(format!("no data service for source `{}`", s.name)));
            }
        }
        Ok(Mediator {
            config,
            directory,
            services,
        })
    }

    /// The shipped fixture deployment, served in process.
    pub fn fixtures() -> Self {
        Self::new(MediatorConfig::default(), crate::fixtures::directory(), crate::fixtures::services())
            .expect("fixture deployment is consistent")
    }

    /// Loads the ontology, registry, mappings and sources a config names.
    pub fn from_config(config: MediatorConfig) -> Result<Self, MediatorError> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| MediatorError::config(format!("{}: {e}", p.display())));
        let ont = Arc::new(load_ontology(&read(&config.ontology)?).map_err(MediatorError::config)?);
        let registry = parse_registry(&read(&config.registry)?).map_err(MediatorError::config)?;
        let reg_dir = config.registry.parent().unwrap_or(Path::new(".")).to_path_buf();
        let mut services: BTreeMap<String, Arc<dyn DataService>> = BTreeMap::new();
        let mut maps = BTreeMap::new();
        let mut schemas = BTreeMap::new();
        for s in &registry.sources {
            let svc: Arc<dyn DataService> = if let Some(name) = s.endpoint.strip_prefix("inproc:") {
                Arc::new(FixtureService::from_dir(&s.name, &reg_dir.join(name)).map_err(MediatorError::config)?)
            } else if s.endpoint.starts_with("http://") || s.endpoint.starts_with("https://") {
                Arc::new(HttpService::new(&s.name, &s.endpoint, Duration::from_secs(30)))
            } else {
                return Err(MediatorError::config(format!("unsupported endpoint `{}`", s.endpoint)));
            };
            let schema = SourceSchema::parse(&svc.schema().map_err(MediatorError::config)?).map_err(MediatorError::config)?;
            schemas.insert(s.name.clone(), schema);
            let map = parse_mapping_file(&s.name, &read(&reg_dir.join(&s.map))?, &ont).map_err(MediatorError::config)?;
            maps.insert(s.name.clone(), map);
            services.insert(s.name.clone(), svc);
        }
        let dir = SemanticDirectory::new(ont, registry, maps, schemas, config.min_index).map_err(MediatorError::config)?;
        Self::new(config, dir, services)
    }

    pub fn config(&self) -> &MediatorConfig {
        &self.config
    }

    pub fn directory(&self) -> &SemanticDirectory {
        &self.directory
    }

    pub fn ontology(&self) -> &Ontology {
        self.directory.ontology()
    }

    pub fn services(&self) -> &BTreeMap<String, Arc<dyn DataService>> {
        &self.services
    }

    /// Classes and properties, for query builders.
    pub fn ontology_json(&self) -> serde_json::Value {
        let o = self.ontology();
        serde_json::json!({
            "base": o.base_iri(),
            "classes": o.classes(),
            "datatype_properties": o.datatype_properties(),
            "object_properties": o.object_properties(),
        })
    }

    pub fn sources_info(&self) -> Vec<SourceInfo> {
        self.directory
            .sources()
            .iter()
            .map(|s| {
                let description = self.services[&s.name]
                    .provenance()
                    .map(|p| p.description)
                    .unwrap_or_default();
                SourceInfo {
                    name: s.name.clone(),
                    endpoint: s.endpoint.clone(),
                    schema_id: s.schema_id.clone(),
                    description,
                }
            })
            .collect()
    }

    fn directory_for(&self, sources: &Option<Vec<String>>) -> Result<SemanticDirectory, MediatorError> {
        match sources {
            Some(s) => self
                .directory
                .restrict(s)
                .map_err(|e| MediatorError::new(Stage::Request, ErrorClass::Client, e)),
            None => Ok(self.directory.clone()),
        }
    }

    fn format_for(&self, format: &Option<String>) -> Result<Format, MediatorError> {
        match format {
            Some(f) => f
                .parse()
                .map_err(|e: IntegrationError| MediatorError::new(Stage::Request, ErrorClass::Client, e)),
            None => Ok(self.config.format),
        }
    }

    /// Parses, validates and plans without touching any source.
    pub fn plan(&self, text: &str, sources: &Option<Vec<String>>) -> Result<(PlanTree, SemanticDirectory), MediatorError> {
        let dir = self.directory_for(sources)?;
        let parsed = parse_query(text).map_err(|e| MediatorError::from_cq(Stage::Parse, e))?;
        let q = validate(&parsed, dir.ontology()).map_err(|e| MediatorError::from_cq(Stage::Validate, e))?;
        let tree = plan_query(&q, &dir).map_err(|e| MediatorError::new(Stage::Plan, ErrorClass::Client, e))?;
        Ok((tree, dir))
    }

    /// Group table followed by the plan tree.
    pub fn explain(&self, text: &str, sources: &Option<Vec<String>>) -> Result<String, MediatorError> {
        let (tree, _) = self.plan(text, sources)?;
        Ok(format!("{}\n{}", render_groups(&tree.groups, &tree.placements), render_plan(&tree)))
    }

    pub fn handle_query(&self, req: &QueryRequest) -> Result<QueryResponse, MediatorError> {
        if req.query.trim().is_empty() {
            if let Some(k) = &req.keyword {
                return self.quick_search(k, req);
            }
        }
        let format = self.format_for(&req.format)?;
        let mut timing = BTreeMap::new();
        let t0 = Instant::now();
        let (tree, dir) = self.plan(&req.query, &req.sources)?;
        timing.insert("plan".to_string(), ms(t0));
        let t1 = Instant::now();
        let (rs, raw) = answer_plan(&tree, &dir, &self.services).map_err(MediatorError::from_integration)?;
        timing.insert("execute".to_string(), ms(t1));
        let t2 = Instant::now();
        let body = serialize(&rs, format);
        timing.insert("serialize".to_string(), ms(t2));

        let mut warnings = tree.query.warnings.clone();
        warnings.extend(raw.report.warnings.iter().cloned());
        let diagnostics = Diagnostics {
            groups: tree
                .groups
                .iter()
                .zip(&tree.placements)
                .map(|(g, p)| GroupRow {
                    label: g.label.clone(),
                    atoms: g.query_text(),
                    sources: g.sources.clone(),
                    placement: serde_json::to_value(p)
                        .map(|v| match v {
                            serde_json::Value::String(s) => s,
                            other => other.to_string(),
                        })
                        .unwrap_or_default(),
                })
                .collect(),
            groups_text: render_groups(&tree.groups, &tree.placements),
            plan_text: render_plan(&tree),
            calls: raw.report.calls.clone(),
            calls_per_source: raw.report.calls_per_source.clone(),
            type_check_drops: raw.report.type_check_drops,
            skipped_elements: raw.report.skipped_elements,
            warnings,
            timing_ms: timing,
        };
        Ok(QueryResponse {
            format,
            body,
            result: rs,
            diagnostics,
        })
    }

    /// Keyword search: one single-atom query per searchable property that
    /// some selected source maps, with the answers unioned.
    pub fn quick_search(&self, keyword: &str, req: &QueryRequest) -> Result<QueryResponse, MediatorError> {
        let format = self.format_for(&req.format)?;
        let dir = self.directory_for(&req.sources)?;
        let literal = Term::Constant(keyword.to_string()).to_string();
        let mut merged: Option<QueryResponse> = None;
        for p in &self.config.searchable {
            if dir.datatype_mappings_of(p).is_empty() {
                continue;
            }
            let sub = QueryRequest {
                query: format!("Ans(X) :- {p}(X, {literal});"),
                keyword: None,
                sources: req.sources.clone(),
                format: req.format.clone(),
                explain: req.explain,
            };
            let r = self.handle_query(&sub)?;
            merged = Some(match merged {
                None => r,
                Some(mut acc) => {
                    let rows: BTreeSet<_> = acc.result.rows.drain(..).chain(r.result.rows).collect();
                    acc.result.rows = rows.into_iter().collect();
                    acc.result.graph.merge(&r.result.graph);
                    let mut prov: BTreeMap<String, _> =
                        acc.result.provenance.drain(..).map(|p| (p.source.clone(), p)).collect();
                    for p in r.result.provenance {
                        prov.entry(p.source.clone()).or_insert(p);
                    }
                    acc.result.provenance = prov.into_values().collect();
                    let d = &mut acc.diagnostics;
                    d.groups.extend(r.diagnostics.groups);
                    d.groups_text.push_str(&r.diagnostics.groups_text);
                    d.plan_text.push_str(&r.diagnostics.plan_text);
                    d.calls.extend(r.diagnostics.calls);
                    d.calls.sort();
                    for (s, n) in r.diagnostics.calls_per_source {
                        *d.calls_per_source.entry(s).or_default() += n;
                    }
                    d.type_check_drops += r.diagnostics.type_check_drops;
                    d.warnings.extend(r.diagnostics.warnings);
                    acc
                }
            });
        }
        let mut resp = merged.ok_or_else(|| {
            MediatorError::new(Stage::Plan, ErrorClass::Client, "no searchable property is mapped by the selected sources")
        })?;
        resp.body = serialize(&resp.result, format);
        Ok(resp)
    }
}
