use std::fmt;

use im::{OrdMap, OrdSet};
use serde::{Deserialize, Serialize};

use super::value::{PropertyValue, Record, RecordError};

/// Attribute conventionally holding a port's name (`In`, `Out`, ...).
pub const PORT_NAME: &str = "name";

/// Identity of a node, port or edge. Stable across every state of a derivation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    Node,
    Port,
    Edge,
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ElementKind::Node => "Node",
            ElementKind::Port => "Port",
            ElementKind::Edge => "Edge",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub record: Record,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Port {
    pub owner: ElementId,
    pub record: Record,
}

/// An undirected edge between two distinct ports.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub ends: [ElementId; 2],
    pub record: Record,
}

impl Edge {
    /// The endpoint opposite to `port`, if `port` is an endpoint.
    pub fn other_end(&self, port: ElementId) -> Option<ElementId> {
        match self.ends {
            [a, b] if a == port => Some(b),
            [a, b] if b == port => Some(a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("element id {0} is already in use")]
    DuplicateId(ElementId),
    #[error("port {port} references missing node {owner}")]
    OrphanPort { port: ElementId, owner: ElementId },
    #[error("edge {edge} references missing port {port}")]
    DanglingEdge { edge: ElementId, port: ElementId },
    #[error("edge {0} connects a port to itself")]
    DegenerateEdge(ElementId),
    #[error("duplicate edge between ports {0} and {1}")]
    DuplicateEdge(ElementId, ElementId),
    #[error("element {id} is not a {expected}")]
    WrongKind { id: ElementId, expected: ElementKind },
    #[error("port {0} still has incident edges")]
    PortInUse(ElementId),
    #[error("node {0} still owns ports")]
    NodeInUse(ElementId),
    #[error("element {id}: {source}")]
    Record {
        id: ElementId,
        #[source]
        source: RecordError,
    },
}

/// A port graph whose nodes, ports and edges carry records.
///
/// Storage is persistent: cloning a graph is O(1) and clones share structure,
/// so every committed state of a derivation can be kept cheaply.
#[derive(Clone, Debug, Default)]
pub struct PortGraph {
    nodes: OrdMap<ElementId, Node>,
    ports: OrdMap<ElementId, Port>,
    edges: OrdMap<ElementId, Edge>,
    node_ports: OrdMap<ElementId, OrdSet<ElementId>>,
    port_edges: OrdMap<ElementId, OrdSet<ElementId>>,
    next_id: u64,
}

impl PartialEq for PortGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.ports == other.ports && self.edges == other.edges
    }
}

impl PortGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from explicitly identified elements, checking every invariant.
    pub fn from_elements(
        nodes: impl IntoIterator<Item = (ElementId, Record)>,
        ports: impl IntoIterator<Item = (ElementId, ElementId, Record)>,
        edges: impl IntoIterator<Item = (ElementId, [ElementId; 2], Record)>,
    ) -> Result<Self, GraphError> {
        let mut g = PortGraph::new();
        for (id, record) in nodes {
            g.insert_node(id, record)?;
        }
        for (id, owner, record) in ports {
            g.insert_port(id, owner, record)?;
        }
        for (id, ends, record) in edges {
            g.insert_edge(id, ends, record)?;
        }
        Ok(g)
    }

    fn fresh_id(&mut self) -> ElementId {
        let id = ElementId(self.next_id);
        self.next_id += 1;
        id
    }

    /// The next id this graph will hand out.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Ensures ids handed out from now on are at least `floor`.
    pub fn reserve_ids(&mut self, floor: u64) {
        self.next_id = self.next_id.max(floor);
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.kind_of(id).is_some()
    }

    pub fn kind_of(&self, id: ElementId) -> Option<ElementKind> {
        if self.nodes.contains_key(&id) {
            Some(ElementKind::Node)
        } else if self.ports.contains_key(&id) {
            Some(ElementKind::Port)
        } else if self.edges.contains_key(&id) {
            Some(ElementKind::Edge)
        } else {
            None
        }
    }

    fn check_free(&self, id: ElementId) -> Result<(), GraphError> {
        if self.contains(id) {
            Err(GraphError::DuplicateId(id))
        } else {
            Ok(())
        }
    }

    pub fn add_node(&mut self, record: Record) -> ElementId {
        let id = self.fresh_id();
        self.nodes.insert(id, Node { record });
        self.node_ports.insert(id, OrdSet::new());
        id
    }

    pub fn add_port(&mut self, owner: ElementId, record: Record) -> Result<ElementId, GraphError> {
        let id = ElementId(self.next_id);
        self.insert_port(id, owner, record)?;
        Ok(id)
    }

    pub fn add_edge(&mut self, a: ElementId, b: ElementId, record: Record) -> Result<ElementId, GraphError> {
        let id = ElementId(self.next_id);
        self.insert_edge(id, [a, b], record)?;
        Ok(id)
    }

    /// Adds a node carrying one port per name in `port_names`.
    pub fn add_node_with_ports(&mut self, record: Record, port_names: &[&str]) -> (ElementId, Vec<ElementId>) {
        let node = self.add_node(record);
        let ports = port_names
            .iter()
            .map(|name| {
                self.add_port(node, Record::new().with(PORT_NAME, *name))
                    .expect("owner was just created")
            })
            .collect();
        (node, ports)
    }

    pub fn insert_node(&mut self, id: ElementId, record: Record) -> Result<(), GraphError> {
        self.check_free(id)?;
        self.nodes.insert(id, Node { record });
        self.node_ports.insert(id, OrdSet::new());
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    pub fn insert_port(&mut self, id: ElementId, owner: ElementId, record: Record) -> Result<(), GraphError> {
        self.check_free(id)?;
        let Some(owned) = self.node_ports.get_mut(&owner) else {
            return Err(GraphError::OrphanPort { port: id, owner });
        };
        owned.insert(id);
        self.ports.insert(id, Port { owner, record });
        self.port_edges.insert(id, OrdSet::new());
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    pub fn insert_edge(&mut self, id: ElementId, ends: [ElementId; 2], record: Record) -> Result<(), GraphError> {
        self.check_free(id)?;
        self.check_ends(id, ends)?;
        for port in ends {
            self.port_edges.get_mut(&port).expect("checked").insert(id);
        }
        self.edges.insert(id, Edge { ends, record });
        self.next_id = self.next_id.max(id.0 + 1);
        Ok(())
    }

    fn check_ends(&self, edge: ElementId, [a, b]: [ElementId; 2]) -> Result<(), GraphError> {
        for port in [a, b] {
            if !self.ports.contains_key(&port) {
                return Err(GraphError::DanglingEdge { edge, port });
            }
        }
        if a == b {
            return Err(GraphError::DegenerateEdge(edge));
        }
        match self.edge_between(a, b) {
            Some(existing) if existing != edge => Err(GraphError::DuplicateEdge(a, b)),
            _ => Ok(()),
        }
    }

    /// Reattaches an existing edge to new endpoints.
    pub fn set_edge_ends(&mut self, id: ElementId, ends: [ElementId; 2]) -> Result<(), GraphError> {
        let old = self.edges.get(&id).ok_or(GraphError::UnknownElement(id))?.ends;
        if old == ends {
            return Ok(());
        }
        self.check_ends(id, ends)?;
        for port in old {
            if let Some(set) = self.port_edges.get_mut(&port) {
                set.remove(&id);
            }
        }
        for port in ends {
            self.port_edges.get_mut(&port).expect("checked").insert(id);
        }
        self.edges.get_mut(&id).expect("present").ends = ends;
        Ok(())
    }

    pub fn remove_edge(&mut self, id: ElementId) -> Result<Edge, GraphError> {
        let edge = self.edges.remove(&id).ok_or(GraphError::UnknownElement(id))?;
        for port in edge.ends {
            if let Some(set) = self.port_edges.get_mut(&port) {
                set.remove(&id);
            }
        }
        Ok(edge)
    }

    /// Removes a port; it must have no incident edges.
    pub fn remove_port(&mut self, id: ElementId) -> Result<Port, GraphError> {
        match self.port_edges.get(&id) {
            None => return Err(GraphError::UnknownElement(id)),
            Some(set) if !set.is_empty() => return Err(GraphError::PortInUse(id)),
            Some(_) => {}
        }
        self.port_edges.remove(&id);
        let port = self.ports.remove(&id).expect("indexed");
        if let Some(set) = self.node_ports.get_mut(&port.owner) {
            set.remove(&id);
        }
        Ok(port)
    }

    /// Removes a node; it must own no ports.
    pub fn remove_node(&mut self, id: ElementId) -> Result<Node, GraphError> {
        match self.node_ports.get(&id) {
            None => return Err(GraphError::UnknownElement(id)),
            Some(set) if !set.is_empty() => return Err(GraphError::NodeInUse(id)),
            Some(_) => {}
        }
        self.node_ports.remove(&id);
        Ok(self.nodes.remove(&id).expect("indexed"))
    }

    pub fn node(&self, id: ElementId) -> Option<&Node> {
        self.nodes.get(&id)
    }

    pub fn port(&self, id: ElementId) -> Option<&Port> {
        self.ports.get(&id)
    }

    pub fn edge(&self, id: ElementId) -> Option<&Edge> {
        self.edges.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (ElementId, &Node)> + '_ {
        self.nodes.iter().map(|(k, v)| (*k, v))
    }

    pub fn ports(&self) -> impl Iterator<Item = (ElementId, &Port)> + '_ {
        self.ports.iter().map(|(k, v)| (*k, v))
    }

    pub fn edges(&self) -> impl Iterator<Item = (ElementId, &Edge)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, v))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.nodes.keys().copied()
    }

    /// Every element id, grouped by kind (nodes, ports, edges), each group sorted.
    pub fn element_ids(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.nodes
            .keys()
            .chain(self.ports.keys())
            .chain(self.edges.keys())
            .copied()
    }

    pub fn ids_of_kind(&self, kind: ElementKind) -> Vec<ElementId> {
        match kind {
            ElementKind::Node => self.nodes.keys().copied().collect(),
            ElementKind::Port => self.ports.keys().copied().collect(),
            ElementKind::Edge => self.edges.keys().copied().collect(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn port_count(&self) -> usize {
        self.ports.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ports_of(&self, node: ElementId) -> impl Iterator<Item = ElementId> + '_ {
        self.node_ports.get(&node).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn edges_at(&self, port: ElementId) -> impl Iterator<Item = ElementId> + '_ {
        self.port_edges.get(&port).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn edge_between(&self, a: ElementId, b: ElementId) -> Option<ElementId> {
        self.port_edges
            .get(&a)?
            .iter()
            .copied()
            .find(|e| self.edges[e].other_end(a) == Some(b))
    }

    /// The port of `node` whose `name` attribute equals `name`.
    pub fn port_named(&self, node: ElementId, name: &str) -> Option<ElementId> {
        self.ports_of(node).find(|p| {
            self.ports[p].record.get(PORT_NAME).and_then(PropertyValue::as_text) == Some(name)
        })
    }

    /// Nodes adjacent to `node` through any port.
    pub fn neighbours(&self, node: ElementId) -> impl Iterator<Item = ElementId> + '_ {
        self.ports_of(node).flat_map(move |p| {
            self.edges_at(p).filter_map(move |e| {
                let other = self.edges[&e].other_end(p)?;
                Some(self.ports[&other].owner)
            })
        })
    }

    pub fn record(&self, id: ElementId) -> Option<&Record> {
        self.nodes
            .get(&id)
            .map(|n| &n.record)
            .or_else(|| self.ports.get(&id).map(|p| &p.record))
            .or_else(|| self.edges.get(&id).map(|e| &e.record))
    }

    pub fn record_mut(&mut self, id: ElementId) -> Option<&mut Record> {
        if let Some(n) = self.nodes.get_mut(&id) {
            return Some(&mut n.record);
        }
        if let Some(p) = self.ports.get_mut(&id) {
            return Some(&mut p.record);
        }
        self.edges.get_mut(&id).map(|e| &mut e.record)
    }

    /// Reads one attribute. Absence of the attribute is `Ok(None)`.
    pub fn get_property(&self, id: ElementId, name: &str) -> Result<Option<&PropertyValue>, GraphError> {
        self.record(id)
            .map(|r| r.get(name))
            .ok_or(GraphError::UnknownElement(id))
    }

    pub fn set_property(&mut self, id: ElementId, name: &str, value: PropertyValue) -> Result<(), GraphError> {
        let record = self.record_mut(id).ok_or(GraphError::UnknownElement(id))?;
        record
            .set(name, value)
            .map(|_| ())
            .map_err(|source| GraphError::Record { id, source })
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<(), GraphError> {
        for (&id, port) in &self.ports {
            if !self.nodes.contains_key(&port.owner) {
                return Err(GraphError::OrphanPort { port: id, owner: port.owner });
            }
            if self.nodes.contains_key(&id) {
                return Err(GraphError::DuplicateId(id));
            }
        }
        let mut pairs = std::collections::BTreeSet::new();
        for (&id, edge) in &self.edges {
            if self.nodes.contains_key(&id) || self.ports.contains_key(&id) {
                return Err(GraphError::DuplicateId(id));
            }
            for port in edge.ends {
                if !self.ports.contains_key(&port) {
                    return Err(GraphError::DanglingEdge { edge: id, port });
                }
            }
            let [a, b] = edge.ends;
            if a == b {
                return Err(GraphError::DegenerateEdge(id));
            }
            if !pairs.insert((a.min(b), a.max(b))) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_nodes() -> (PortGraph, [ElementId; 4]) {
        let mut g = PortGraph::new();
        let (_, p1) = g.add_node_with_ports(Record::new(), &["In", "Out"]);
        let (_, p2) = g.add_node_with_ports(Record::new(), &["In", "Out"]);
        (g, [p1[0], p1[1], p2[0], p2[1]])
    }

    #[test]
    fn empty_graph_is_valid() {
        let g = PortGraph::new();
        assert!(g.validate().is_ok());
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn minimal_adjacency() {
        let (mut g, [n1_in, _, _, n2_out]) = two_nodes();
        g.add_edge(n1_in, n2_out, Record::new()).unwrap();
        assert_eq!((g.node_count(), g.port_count(), g.edge_count()), (2, 4, 1));
        g.validate().unwrap();
    }

    #[test]
    fn duplicate_edge_rejected() {
        let (mut g, [n1_in, _, _, n2_out]) = two_nodes();
        g.add_edge(n1_in, n2_out, Record::new()).unwrap();
        let err = g.add_edge(n2_out, n1_in, Record::new()).unwrap_err();
        assert!(matches!(err, GraphError::DuplicateEdge(..)), "{err}");
        assert!(err.to_string().contains("duplicate edge"));
    }

    #[test]
    fn orphan_port_and_dangling_edge() {
        let err = PortGraph::from_elements([], [(ElementId(1), ElementId(0), Record::new())], []).unwrap_err();
        assert!(matches!(err, GraphError::OrphanPort { .. }));
        let err = PortGraph::from_elements(
            [(ElementId(0), Record::new())],
            [(ElementId(1), ElementId(0), Record::new())],
            [(ElementId(2), [ElementId(1), ElementId(9)], Record::new())],
        )
        .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEdge { .. }));
    }

    #[test]
    fn property_access() {
        let mut g = PortGraph::new();
        let n = g.add_node(Record::new().with("active", true));
        assert_eq!(g.get_property(n, "active").unwrap(), Some(&PropertyValue::Bool(true)));
        assert_eq!(g.get_property(n, "theta").unwrap(), None);
        assert_eq!(g.get_property(ElementId(99), "active"), Err(GraphError::UnknownElement(ElementId(99))));
    }

    #[test]
    fn clones_are_independent() {
        let (mut g, [a, _, _, d]) = two_nodes();
        let before = g.clone();
        g.add_edge(a, d, Record::new()).unwrap();
        assert_eq!(before.edge_count(), 0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn removal_requires_detached_elements() {
        let (mut g, [a, _, _, d]) = two_nodes();
        let e = g.add_edge(a, d, Record::new()).unwrap();
        assert_eq!(g.remove_port(a), Err(GraphError::PortInUse(a)));
        g.remove_edge(e).unwrap();
        let owner = g.port(a).unwrap().owner;
        g.remove_port(a).unwrap();
        assert_eq!(g.remove_node(owner), Err(GraphError::NodeInUse(owner)));
        g.validate().unwrap();
    }
}
