//! XML engine and data-service layer.

pub mod schema;
pub mod service;
pub mod xml;
pub mod xpath;
pub mod xquery;

pub use schema::{ElementDecl, SchemaError, SchemaViolation, SourceSchema};
pub use service::{
    DataService, FixtureService, HttpService, ProvenanceRecord, ServiceError, ServiceResponse,
};
pub use xml::{normalize_value, parse_xml, serialize_xml, XmlChild, XmlError, XmlNode};
pub use xpath::{eval_xpath, NodePath, Step, XPathError, XPathExpr};
pub use xquery::{eval_xquery, quote_literal, WhereClause, XQueryError, XQueryExpr};
