//! Differences between two states of one derivation.

use serde::{Deserialize, Serialize};

use super::graph::{ElementId, GraphError, PortGraph};
use super::located::{LocatedGraph, Selection};
use super::value::Record;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: ElementId,
    pub properties: Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortEntry {
    pub id: ElementId,
    pub owner: ElementId,
    pub properties: Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub id: ElementId,
    pub ends: [ElementId; 2],
    pub properties: Record,
}

/// What turns a parent state into a child: new or changed elements, removed
/// ids, and the position/ban sets when they differ.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Delta {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ports: Vec<PortEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed: Vec<ElementId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<ElementId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub banned: Option<Vec<ElementId>>,
    pub next_id: u64,
}

impl Delta {
    pub fn between(parent: &LocatedGraph, child: &LocatedGraph) -> Delta {
        let (p, c) = (&parent.graph, &child.graph);
        let nodes = c
            .nodes()
            .filter(|(id, n)| p.node(*id) != Some(n))
            .map(|(id, n)| NodeEntry {
                id,
                properties: n.record.clone(),
            })
            .collect();
        let ports = c
            .ports()
            .filter(|(id, x)| p.port(*id) != Some(x))
            .map(|(id, x)| PortEntry {
                id,
                owner: x.owner,
                properties: x.record.clone(),
            })
            .collect();
        let edges = c
            .edges()
            .filter(|(id, x)| p.edge(*id) != Some(x))
            .map(|(id, x)| EdgeEntry {
                id,
                ends: x.ends,
                properties: x.record.clone(),
            })
            .collect();
        let removed = p.element_ids().filter(|id| !c.contains(*id)).collect();
        let set = |a: &Selection, b: &Selection| (a != b).then(|| b.iter().copied().collect());
        Delta {
            nodes,
            ports,
            edges,
            removed,
            position: set(&parent.position, &child.position),
            banned: set(&parent.banned, &child.banned),
            next_id: c.next_id(),
        }
    }

    pub fn apply(&self, parent: &LocatedGraph) -> Result<LocatedGraph, GraphError> {
        let mut g: PortGraph = parent.graph.clone();
        let kind = |id| g.kind_of(id);
        let mut removed_edges = Vec::new();
        let mut removed_ports = Vec::new();
        let mut removed_nodes = Vec::new();
        for &id in &self.removed {
            match kind(id) {
                Some(super::ElementKind::Edge) => removed_edges.push(id),
                Some(super::ElementKind::Port) => removed_ports.push(id),
                Some(super::ElementKind::Node) => removed_nodes.push(id),
                None => return Err(GraphError::UnknownElement(id)),
            }
        }
        for id in removed_edges {
            g.remove_edge(id)?;
        }
        // Edges that move are detached first so ports can be removed.
        for e in &self.edges {
            if g.edge(e.id).is_some_and(|old| old.ends != e.ends) {
                g.remove_edge(e.id)?;
            }
        }
        for id in removed_ports {
            g.remove_port(id)?;
        }
        for id in removed_nodes {
            g.remove_node(id)?;
        }
        for n in &self.nodes {
            match g.record_mut(n.id) {
                Some(r) => *r = n.properties.clone(),
                None => g.insert_node(n.id, n.properties.clone())?,
            }
        }
        for p in &self.ports {
            match g.port(p.id) {
                Some(old) if old.owner == p.owner => *g.record_mut(p.id).expect("present") = p.properties.clone(),
                Some(_) => {
                    return Err(GraphError::WrongKind {
                        id: p.id,
                        expected: super::ElementKind::Port,
                    })
                }
                None => g.insert_port(p.id, p.owner, p.properties.clone())?,
            }
        }
        for e in &self.edges {
            match g.edge(e.id) {
                Some(_) => *g.record_mut(e.id).expect("present") = e.properties.clone(),
                None => g.insert_edge(e.id, e.ends, e.properties.clone())?,
            }
        }
        g.reserve_ids(self.next_id);
        let position = match &self.position {
            Some(ids) => ids.iter().copied().collect(),
            None => parent.position.clone(),
        };
        let banned = match &self.banned {
            Some(ids) => ids.iter().copied().collect(),
            None => parent.banned.clone(),
        };
        LocatedGraph::with_sets(g, position, banned)
    }
}
