#![allow(dead_code)]

use porgysim_core::models::{attrs, Distribution, ModelConfig, ModelKind};
use porgysim_core::netgen::import_edge_list;
use porgysim_core::portgraph::{ElementId, LocatedGraph, PortGraph, PropertyValue};
use porgysim_core::session::Simulation;

pub fn graph(edges: &str) -> PortGraph {
    import_edge_list(edges.as_bytes()).unwrap()
}

pub fn star() -> PortGraph {
    graph("c l0\nc l1\nc l2\n")
}

pub fn node(g: &PortGraph, name: &str) -> ElementId {
    g.nodes()
        .find(|(_, n)| n.record.get("name").and_then(PropertyValue::as_text) == Some(name))
        .map(|(id, _)| id)
        .unwrap_or_else(|| panic!("no node {name}"))
}

pub fn flag(l: &LocatedGraph, id: ElementId, attr: &str) -> bool {
    l.graph.get_property(id, attr).unwrap().and_then(PropertyValue::as_bool).unwrap()
}

pub fn real(l: &LocatedGraph, id: ElementId, attr: &str) -> f64 {
    l.graph.get_property(id, attr).unwrap().and_then(PropertyValue::as_real).unwrap()
}

pub fn active_names(l: &LocatedGraph) -> Vec<String> {
    let mut out: Vec<String> = l
        .graph
        .nodes()
        .filter(|(_, n)| n.record.get(attrs::ACTIVE) == Some(&true.into()))
        .map(|(_, n)| n.record.get("name").and_then(PropertyValue::as_text).unwrap().to_owned())
        .collect();
    out.sort();
    out
}

pub fn ic_config(seeds: &[&str], p: f64, rng_seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::new(ModelKind::Ic, seeds.iter().map(|s| s.to_string()).collect());
    cfg.probability = Some(Distribution::Const(p));
    cfg.rng_seed = rng_seed;
    cfg
}

pub fn lt_config(seeds: &[&str], theta: f64, rng_seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::new(ModelKind::Lt, seeds.iter().map(|s| s.to_string()).collect());
    cfg.theta = Some(Distribution::Const(theta));
    cfg.rng_seed = rng_seed;
    cfg
}

pub fn simulate(g: &PortGraph, cfg: ModelConfig) -> Simulation {
    Simulation::new(g, cfg).unwrap()
}
