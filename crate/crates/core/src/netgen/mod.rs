//! Random social networks and edge-list import.
//!
//! Every node carries an `In` and an `Out` port. An edge `u -> v` joins
//! `u.In` to `v.Out`, so `p_i2o` is the probability that `u` influences `v`
//! and `p_o2i` the reverse.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::models::attrs;
use crate::portgraph::{ElementId, PortGraph, Record};
use crate::SimRng;

pub const IN: &str = "In";
pub const OUT: &str = "Out";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attachment {
    #[default]
    Preferential,
    Uniform,
}

impl std::str::FromStr for Attachment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "preferential" => Ok(Attachment::Preferential),
            "uniform" => Ok(Attachment::Uniform),
            other => Err(format!("unknown attachment `{other}` (expected preferential or uniform)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct GeneratorConfig {
    pub node_count: usize,
    #[serde(default)]
    pub attachment: Attachment,
    pub edges_per_new_node: usize,
    #[serde(default)]
    pub triad_closure_prob: f64,
    #[serde(default)]
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetgenError {
    #[error("nodeCount must be at least 1")]
    NoNodes,
    #[error("edgesPerNewNode must be at least 1")]
    NoEdges,
    #[error("triadClosureProb {0} outside [0, 1]")]
    BadTriadProb(f64),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl GeneratorConfig {
    pub fn new(node_count: usize, edges_per_new_node: usize, rng_seed: u64) -> Self {
        GeneratorConfig {
            node_count,
            attachment: Attachment::Preferential,
            edges_per_new_node,
            triad_closure_prob: 0.0,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<(), NetgenError> {
        if self.node_count == 0 {
            return Err(NetgenError::NoNodes);
        }
        if self.edges_per_new_node == 0 {
            return Err(NetgenError::NoEdges);
        }
        if !(0.0..=1.0).contains(&self.triad_closure_prob) {
            return Err(NetgenError::BadTriadProb(self.triad_closure_prob));
        }
        Ok(())
    }
}

fn person(g: &mut PortGraph, name: String) -> (ElementId, [ElementId; 2]) {
    let (n, ports) = g.add_node_with_ports(Record::new().with("name", name), &[IN, OUT]);
    (n, [ports[0], ports[1]])
}

/// Growth model: node `i` links to `min(m, i)` distinct earlier nodes. The
/// first target is drawn by attachment; each further one closes a triangle
/// with probability `triadClosureProb` (a neighbour of the previous target),
/// otherwise it is drawn by attachment again. Preferential attachment weighs
/// nodes by degree + 1.
///
/// Node `i` is named `n{i}`; edges join the older node's `In` to the newer node's `Out`.
pub fn generate(config: &GeneratorConfig) -> Result<PortGraph, NetgenError> {
    config.validate()?;
    let mut rng = SimRng::seed_from_u64(config.rng_seed);
    let mut g = PortGraph::new();
    let mut handles = Vec::with_capacity(config.node_count);
    let mut adjacency: Vec<Vec<usize>> = Vec::with_capacity(config.node_count);
    // Each node once, plus once per incident edge.
    let mut urn: Vec<usize> = Vec::new();
    for i in 0..config.node_count {
        handles.push(person(&mut g, format!("n{i}")));
        adjacency.push(Vec::new());
        let want = config.edges_per_new_node.min(i);
        let mut chosen: Vec<usize> = Vec::with_capacity(want);
        let draw = |rng: &mut SimRng, urn: &[usize]| match config.attachment {
            Attachment::Preferential => urn[rng.gen_range(0..urn.len())],
            Attachment::Uniform => rng.gen_range(0..i),
        };
        while chosen.len() < want {
            let triad = chosen
                .last()
                .filter(|_| rng.gen_bool(config.triad_closure_prob))
                .and_then(|&prev| {
                    let open: Vec<usize> = adjacency[prev].iter().copied().filter(|x| !chosen.contains(x)).collect();
                    open.choose(&mut rng).copied()
                });
            let t = match triad {
                Some(t) => t,
                None => loop {
                    let t = draw(&mut rng, &urn);
                    if !chosen.contains(&t) {
                        break t;
                    }
                },
            };
            chosen.push(t);
        }
        for &t in &chosen {
            g.add_edge(handles[t].1[0], handles[i].1[1], Record::new())
                .expect("ports exist");
            adjacency[t].push(i);
            adjacency[i].push(t);
            urn.push(t);
            urn.push(i);
        }
        urn.push(i);
    }
    Ok(g)
}

/// Reads `u v [p_uv p_vu]` lines; `#` starts a comment. Nodes are named by
/// their label. Repeated pairs (in either orientation) keep the first line;
/// self loops are skipped. Both are logged as warnings.
pub fn import_edge_list(bytes: &[u8]) -> Result<PortGraph, NetgenError> {
    let text = std::str::from_utf8(bytes).map_err(|e| NetgenError::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut g = PortGraph::new();
    let mut nodes: BTreeMap<String, (ElementId, [ElementId; 2])> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let cols: Vec<&str> = content.split_whitespace().collect();
        let err = |message: String| NetgenError::Parse { line, message };
        let probs: Option<[f64; 2]> = match cols.len() {
            0 => continue,
            2 => None,
            4 => {
                let p = |s: &str| match s.parse::<f64>() {
                    Ok(x) if (0.0..=1.0).contains(&x) => Ok(x),
                    _ => Err(err(format!("probability `{s}` is not a number in [0, 1]"))),
                };
                Some([p(cols[2])?, p(cols[3])?])
            }
            1 => return Err(err("missing endpoint".into())),
            n => return Err(err(format!("expected 2 or 4 columns, found {n}"))),
        };
        let (u, v) = (cols[0], cols[1]);
        if u == v {
            log::warn!("line {line}: self loop on `{u}` skipped");
            continue;
        }
        let key = if u < v { (u.to_owned(), v.to_owned()) } else { (v.to_owned(), u.to_owned()) };
        if !seen.insert(key) {
            log::warn!("line {line}: duplicate pair `{u} {v}` collapsed");
            continue;
        }
        let mut handle = |name: &str| {
            *nodes
                .entry(name.to_owned())
                .or_insert_with(|| person(&mut g, name.to_owned()))
        };
        let (hu, hv) = (handle(u), handle(v));
        let mut record = Record::new();
        if let Some([p_uv, p_vu]) = probs {
            record = record.with(attrs::P_I2O, p_uv).with(attrs::P_O2I, p_vu);
        }
        g.add_edge(hu.1[0], hv.1[1], record).expect("ports exist");
    }
    Ok(g)
}

/// Edge-list text of `g`: one `u v p_i2o p_o2i` line per edge (probabilities
/// omitted when absent), nodes written by name or else by id.
pub fn export_edge_list(g: &PortGraph) -> String {
    let label = |port: ElementId| {
        let owner = g.port(port).expect("edge end").owner;
        match g.record(owner).and_then(|r| r.get("name")).and_then(|v| v.as_text()) {
            Some(name) => name.to_owned(),
            None => owner.to_string(),
        }
    };
    let mut out = String::new();
    for (_, e) in g.edges() {
        let (a, b) = (label(e.ends[0]), label(e.ends[1]));
        let p = |k| e.record.get(k).and_then(|v| v.as_real());
        match (p(attrs::P_I2O), p(attrs::P_O2I)) {
            (Some(x), Some(y)) => out.push_str(&format!("{a} {b} {x} {y}\n")),
            _ => out.push_str(&format!("{a} {b}\n")),
        }
    }
    out
}
