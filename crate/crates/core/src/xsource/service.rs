//! Data services: the per-source query API (`query`, `schema`,
//! `provenance`) in an in-process fixture form and an HTTP client form.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use thiserror::Error;

use super::schema::{SchemaError, SourceSchema};
use super::xml::{escape_text, parse_xml, serialize_xml, XmlError, XmlNode};
use super::xquery::{eval_xquery, XQueryExpr};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ServiceError {
    #[error("unknown source `{0}`")]
    UnknownSource(String),
    #[error("source `{source_name}` rejected the query: {message}")]
    Query { source_name: String, message: String },
    #[error("source `{source_name}` unreachable: {message}")]
    Transport { source_name: String, message: String },
    #[error("source `{source_name}` produced an invalid result: {message}")]
    Internal { source_name: String, message: String },
    #[error("source `{source_name}` could not be loaded: {message}")]
    Load { source_name: String, message: String },
}

impl ServiceError {
    pub fn source_name(&self) -> &str {
        match self {
            ServiceError::UnknownSource(s) => s,
            ServiceError::Query { source_name, .. }
            | ServiceError::Transport { source_name, .. }
            | ServiceError::Internal { source_name, .. }
            | ServiceError::Load { source_name, .. } => source_name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProvenanceRecord {
    pub source: String,
    pub endpoint: String,
    pub schema_id: String,
    pub description: String,
    pub retrieved_at: String,
}

impl ProvenanceRecord {
    pub fn to_xml(&self) -> XmlNode {
        let leaf = |name: &str, value: &str| XmlNode::new(name).with_text(value);
        XmlNode::new("Provenance")
            .with_child(leaf("Source", &self.source))
            .with_child(leaf("Endpoint", &self.endpoint))
            .with_child(leaf("Schema", &self.schema_id))
            .with_child(leaf("Description", &self.description))
            .with_child(leaf("RetrievedAt", &self.retrieved_at))
    }

    pub fn from_xml(node: &XmlNode) -> Result<Self, String> {
        if node.name != "Provenance" {
            return Err(format!("expected <Provenance>, found <{}>", node.name));
        }
        let field = |name: &str| {
            node.elements()
                .find(|e| e.name == name)
                .map(|e| e.text())
                .ok_or_else(|| format!("missing <{name}>"))
        };
        Ok(ProvenanceRecord {
            source: field("Source")?,
            endpoint: field("Endpoint")?,
            schema_id: field("Schema")?,
            description: field("Description")?,
            retrieved_at: field("RetrievedAt")?,
        })
    }
}

pub fn now_rfc3339() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// A query answer: the serialized result document plus where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceResponse {
    pub xml: String,
    pub provenance: ProvenanceRecord,
}

pub trait DataService: Send + Sync {
    fn name(&self) -> &str;
    fn endpoint(&self) -> &str;
    fn query(&self, xquery: &str) -> Result<ServiceResponse, ServiceError>;
    fn schema(&self) -> Result<String, ServiceError>;
    fn provenance(&self) -> Result<ProvenanceRecord, ServiceError>;
}

impl fmt::Debug for dyn DataService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DataService({} @ {})", self.name(), self.endpoint())
    }
}

/// A source answering from an XML document held in memory.
#[derive(Debug, Clone)]
pub struct FixtureService {
    name: String,
    endpoint: String,
    data: Arc<XmlNode>,
    schema: Arc<SourceSchema>,
    description: String,
}

impl FixtureService {
    pub fn new(
        name: &str,
        data_xml: &str,
        schema_xml: &str,
        description: &str,
    ) -> Result<Self, ServiceError> {
        let load = |message: String| ServiceError::Load {
            source_name: name.to_string(),
            message,
        };
        let data = parse_xml(data_xml).map_err(|e: XmlError| load(e.to_string()))?;
        let schema = SourceSchema::parse(schema_xml).map_err(|e: SchemaError| load(e.to_string()))?;
        if schema.source != name {
            return Err(load(format!(
                "schema declares source `{}`",
                schema.source
            )));
        }
        schema
            .validate(&data)
            .map_err(|e| load(format!("data does not conform to its schema: {e}")))?;
        Ok(FixtureService {
            name: name.to_string(),
            endpoint: format!("inproc:{name}"),
            data: Arc::new(data),
            schema: Arc::new(schema),
            description: description.trim().to_string(),
        })
    }

    /// Loads `<dir>/data.xml`, `<dir>/schema.xml` and `<dir>/description.txt`.
    pub fn from_dir(name: &str, dir: &std::path::Path) -> Result<Self, ServiceError> {
        let read = |file: &str| {
            std::fs::read_to_string(dir.join(file)).map_err(|e| ServiceError::Load {
                source_name: name.to_string(),
                message: format!("{}: {e}", dir.join(file).display()),
            })
        };
        Self::new(
            name,
            &read("data.xml")?,
            &read("schema.xml")?,
            &read("description.txt")?,
        )
    }

    pub fn with_endpoint(mut self, endpoint: impl Into<String>) -> Self {
        self.endpoint = endpoint.into();
        self
    }

    pub fn document(&self) -> &XmlNode {
        &self.data
    }

    pub fn source_schema(&self) -> &SourceSchema {
        &self.schema
    }

    /// Evaluates a query and returns the serialized result document.
    pub fn answer(&self, xquery: &str) -> Result<String, ServiceError> {
        let q = XQueryExpr::parse(xquery).map_err(|e| ServiceError::Query {
            source_name: self.name.clone(),
            message: e.to_string(),
        })?;
        let result = eval_xquery(&self.data, &q);
        self.schema
            .validate(&result)
            .map_err(|e| ServiceError::Internal {
                source_name: self.name.clone(),
                message: e.to_string(),
            })?;
        Ok(serialize_xml(&result))
    }
}

impl DataService for FixtureService {
    fn name(&self) -> &str {
        &self.name
    }

    fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn query(&self, xquery: &str) -> Result<ServiceResponse, ServiceError> {
        Ok(ServiceResponse {
            xml: self.answer(xquery)?,
            provenance: self.provenance()?,
        })
    }

    fn schema(&self) -> Result<String, ServiceError> {
        Ok(self.schema.text.clone())
    }

    fn provenance(&self) -> Result<ProvenanceRecord, ServiceError> {
        Ok(ProvenanceRecord {
            source: self.name.clone(),
            endpoint: self.endpoint.clone(),
            schema_id: self.schema.schema_id.clone(),
            description: self.description.clone(),
            retrieved_at: now_rfc3339(),
        })
    }
}

/// Client for a source daemon speaking `POST /query`, `GET /schema` and
/// `GET /provenance`.
pub struct HttpService {
    name: String,
    base_url: String,
    agent: ureq::Agent,
}

impl fmt::Debug for HttpService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HttpService")
            .field("name", &self.name)
            .field("base_url", &self.base_url)
            .finish()
    }
}

impl HttpService {
    pub fn new(name: &str, base_url: &str, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpService {
            name: name.to_string(),
            base_url: base_url.trim_end_matches('/').to_string(),
            agent,
        }
    }

    fn transport(&self, message: impl fmt::Display) -> ServiceError {
        ServiceError::Transport {
            source_name: self.name.clone(),
            message: message.to_string(),
        }
    }

    fn finish(&self, resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<(u16, String), ServiceError> {
        let mut resp = resp.map_err(|e| self.transport(e))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| self.transport(e))?;
        Ok((status, body))
    }

    fn get(&self, path: &str) -> Result<String, ServiceError> {
        let (status, body) = self.finish(self.agent.get(&format!("{}{path}", self.base_url)).call())?;
        if status != 200 {
            return Err(self.transport(format!("GET {path} answered {status}: {body}")));
        }
        Ok(body)
    }
}

impl DataService for HttpService {
    fn name(&self) -> &str {
        &self.name
    }

    fn endpoint(&self) -> &str {
        &self.base_url
    }

    fn query(&self, xquery: &str) -> Result<ServiceResponse, ServiceError> {
        let (status, body) = self.finish(
            self.agent
                .post(&format!("{}/query", self.base_url))
                .header("Content-Type", "application/xquery")
                .send(xquery),
        )?;
        match status {
            200 => Ok(ServiceResponse {
                xml: body,
                provenance: self.provenance()?,
            }),
            400 => Err(ServiceError::Query {
                source_name: self.name.clone(),
                message: body,
            }),
            _ => Err(self.transport(format!("POST /query answered {status}: {body}"))),
        }
    }

    fn schema(&self) -> Result<String, ServiceError> {
        self.get("/schema")
    }

    fn provenance(&self) -> Result<ProvenanceRecord, ServiceError> {
        let body = self.get("/provenance")?;
        let node = parse_xml(&body).map_err(|e| self.transport(e))?;
        ProvenanceRecord::from_xml(&node).map_err(|e| self.transport(e))
    }
}

/// Plain-text rendering of a provenance record, used in diagnostics.
pub fn provenance_line(p: &ProvenanceRecord) -> String {
    format!(
        "{} ({}, schema {}) retrieved {}: {}",
        p.source,
        p.endpoint,
        p.schema_id,
        p.retrieved_at,
        escape_text(&p.description)
    )
}
