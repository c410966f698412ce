//! Ontology-based mediator over XML data services.
//!
//! Queries are conjunctive queries over an ontology. The planner splits a
//! query into predicate groups using the semantic directory's mapping
//! rules, builds a plan tree, and the integrator runs the resulting XQuery
//! sub-queries against the data services and joins the answers into a
//! provenance-annotated instance graph.

pub mod cq;
pub mod ontology;
pub mod xsource;
pub mod fixtures;
pub mod semdir;
pub mod planner;
pub mod integrator;
pub mod mediator;
