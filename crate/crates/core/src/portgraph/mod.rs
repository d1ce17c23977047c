//! Port graphs with property records, located graphs and their JSON format.

mod delta;
mod graph;
mod json;
mod located;
mod value;

pub use delta::{Delta, EdgeEntry, NodeEntry, PortEntry};
pub use graph::{Edge, ElementId, ElementKind, GraphError, Node, Port, PortGraph, PORT_NAME};
pub use json::{
    deserialize_graph, serialize_document, serialize_graph, serialize_located, FormatError, GraphDocument,
};
pub use located::{LocatedGraph, Selection};
pub use value::{PropertyValue, Record, RecordError, ValueKind};
