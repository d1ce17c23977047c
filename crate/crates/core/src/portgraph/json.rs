//! JSON graph documents.
//!
//! ```json
//! {"nodes": [{"id": 0, "properties": {"active": {"kind": "bool", "v": true}}}],
//!  "ports": [{"id": 1, "owner": 0, "properties": {}}],
//!  "edges": [],
//!  "position": [0], "banned": []}
//! ```
//! `position` and `banned` are present only for located graphs.

use serde::{Deserialize, Serialize};

use super::graph::{ElementId, GraphError, PortGraph};
use super::located::{LocatedGraph, Selection};
use super::value::Record;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed graph document at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid graph: {0}")]
    Invalid(#[from] GraphError),
    #[error("cannot encode graph: {0}")]
    Encode(String),
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeDoc {
    id: ElementId,
    properties: Record,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc {
    id: ElementId,
    owner: ElementId,
    properties: Record,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: ElementId,
    ends: [ElementId; 2],
    properties: Record,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    ports: Vec<PortDoc>,
    edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<Vec<ElementId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    banned: Option<Vec<ElementId>>,
}

/// Either a bare port graph or a located one, as read from a document.
#[derive(Clone, Debug, PartialEq)]
pub enum GraphDocument {
    Plain(PortGraph),
    Located(LocatedGraph),
}

impl GraphDocument {
    pub fn graph(&self) -> &PortGraph {
        match self {
            GraphDocument::Plain(g) => g,
            GraphDocument::Located(l) => &l.graph,
        }
    }

    /// The located view; a plain graph gets whole-graph position and no ban.
    pub fn into_located(self) -> LocatedGraph {
        match self {
            GraphDocument::Plain(g) => LocatedGraph::new(g),
            GraphDocument::Located(l) => l,
        }
    }
}

fn graph_doc(g: &PortGraph) -> GraphDoc {
    GraphDoc {
        nodes: g
            .nodes()
            .map(|(id, n)| NodeDoc {
                id,
                properties: n.record.clone(),
            })
            .collect(),
        ports: g
            .ports()
            .map(|(id, p)| PortDoc {
                id,
                owner: p.owner,
                properties: p.record.clone(),
            })
            .collect(),
        edges: g
            .edges()
            .map(|(id, e)| EdgeDoc {
                id,
                ends: e.ends,
                properties: e.record.clone(),
            })
            .collect(),
        position: None,
        banned: None,
    }
}

fn encode(doc: &GraphDoc) -> Result<Vec<u8>, FormatError> {
    let mut out = serde_json::to_vec_pretty(doc).map_err(|e| FormatError::Encode(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn serialize_graph(g: &PortGraph) -> Result<Vec<u8>, FormatError> {
    encode(&graph_doc(g))
}

pub fn serialize_located(l: &LocatedGraph) -> Result<Vec<u8>, FormatError> {
    let mut doc = graph_doc(&l.graph);
    doc.position = Some(l.position.iter().copied().collect());
    doc.banned = Some(l.banned.iter().copied().collect());
    encode(&doc)
}

pub fn serialize_document(doc: &GraphDocument) -> Result<Vec<u8>, FormatError> {
    match doc {
        GraphDocument::Plain(g) => serialize_graph(g),
        GraphDocument::Located(l) => serialize_located(l),
    }
}

pub fn deserialize_graph(bytes: &[u8]) -> Result<GraphDocument, FormatError> {
    let doc: GraphDoc = serde_json::from_slice(bytes)?;
    let graph = PortGraph::from_elements(
        doc.nodes.into_iter().map(|n| (n.id, n.properties)),
        doc.ports.into_iter().map(|p| (p.id, p.owner, p.properties)),
        doc.edges.into_iter().map(|e| (e.id, e.ends, e.properties)),
    )?;
    if doc.position.is_none() && doc.banned.is_none() {
        return Ok(GraphDocument::Plain(graph));
    }
    let position: Selection = match doc.position {
        Some(ids) => ids.into_iter().collect(),
        None => graph.element_ids().collect(),
    };
    let banned: Selection = doc.banned.unwrap_or_default().into_iter().collect();
    Ok(GraphDocument::Located(LocatedGraph::with_sets(graph, position, banned)?))
}
