//! The shipped fixture deployment, embedded in the library: ontology,
//! registry, five file-backed sources and the worked example query.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::ontology::{load_ontology, Ontology};
use crate::semdir::{parse_mapping_file, parse_registry, SemanticDirectory};
use crate::xsource::{DataService, FixtureService, SourceSchema};

pub const ONTOLOGY: &str = include_str!("../fixtures/yeast.onto");
pub const REGISTRY: &str = include_str!("../fixtures/registry.txt");
pub const WORKED_EXAMPLE: &str = include_str!("../fixtures/worked_example.cq");

pub struct FixtureSource {
    pub name: &'static str,
    pub data: &'static str,
    pub schema: &'static str,
    pub description: &'static str,
    pub map: &'static str,
}

macro_rules! fixture_source {
    ($name:literal) => {
        FixtureSource {
            name: $name,
            data: include_str!(concat!("../fixtures/", $name, "/data.xml")),
            schema: include_str!(concat!("../fixtures/", $name, "/schema.xml")),
            description: include_str!(concat!("../fixtures/", $name, "/description.txt")),
            map: include_str!(concat!("../fixtures/", $name, ".map")),
        }
    };
}

pub const SOURCES: [FixtureSource; 5] = [
    fixture_source!("sgd"),
    fixture_source!("yeastract"),
    fixture_source!("mips"),
    fixture_source!("biogrid"),
    fixture_source!("phosphogrid"),
];

pub fn source(name: &str) -> Option<&'static FixtureSource> {
    SOURCES.iter().find(|s| s.name == name)
}

pub fn ontology() -> Arc<Ontology> {
    Arc::new(load_ontology(ONTOLOGY).expect("shipped ontology loads"))
}

pub fn service(name: &str) -> FixtureService {
    let s = source(name).expect("shipped source");
    FixtureService::new(s.name, s.data, s.schema, s.description).expect("shipped source loads")
}

pub fn services() -> BTreeMap<String, Arc<dyn DataService>> {
    SOURCES
        .iter()
        .map(|s| (s.name.to_string(), Arc::new(service(s.name)) as Arc<dyn DataService>))
        .collect()
}

pub fn directory_with(ont: Arc<Ontology>, min_index: u32) -> SemanticDirectory {
    let registry = parse_registry(REGISTRY).expect("shipped registry parses");
    let mut maps = BTreeMap::new();
    let mut schemas = BTreeMap::new();
    for s in &SOURCES {
        maps.insert(
            s.name.to_string(),
            parse_mapping_file(s.name, s.map, &ont).expect("shipped mappings parse"),
        );
        schemas.insert(s.name.to_string(), SourceSchema::parse(s.schema).expect("shipped schema parses"));
    }
    SemanticDirectory::new(ont, registry, maps, schemas, min_index).expect("shipped directory is consistent")
}

pub fn directory() -> SemanticDirectory {
    directory_with(ontology(), 0)
}
