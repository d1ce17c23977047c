use im::OrdSet;

use super::graph::{ElementId, GraphError, PortGraph};

/// A set of element ids (nodes, ports or edges) of one graph.
pub type Selection = OrdSet<ElementId>;

/// A port graph with a position subgraph (where rewriting may happen) and a
/// banned subgraph (where it may not).
#[derive(Clone, Debug, PartialEq)]
pub struct LocatedGraph {
    pub graph: PortGraph,
    pub position: Selection,
    pub banned: Selection,
}

impl LocatedGraph {
    /// Whole-graph position, nothing banned.
    pub fn new(graph: PortGraph) -> Self {
        let position = graph.element_ids().collect();
        LocatedGraph {
            graph,
            position,
            banned: Selection::new(),
        }
    }

    pub fn with_sets(graph: PortGraph, position: Selection, banned: Selection) -> Result<Self, GraphError> {
        check_subset(&graph, &position)?;
        check_subset(&graph, &banned)?;
        Ok(LocatedGraph { graph, position, banned })
    }

    /// Replaces the position set; the graph is untouched.
    pub fn set_position(&mut self, selection: Selection) -> Result<(), GraphError> {
        check_subset(&self.graph, &selection)?;
        self.position = selection;
        Ok(())
    }

    /// Replaces the banned set; the graph is untouched.
    pub fn set_ban(&mut self, selection: Selection) -> Result<(), GraphError> {
        check_subset(&self.graph, &selection)?;
        self.banned = selection;
        Ok(())
    }

    /// Resets the position to every element of the graph.
    pub fn focus_whole_graph(&mut self) {
        self.position = self.graph.element_ids().collect();
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        self.graph.validate()?;
        check_subset(&self.graph, &self.position)?;
        check_subset(&self.graph, &self.banned)
    }
}

fn check_subset(graph: &PortGraph, ids: &Selection) -> Result<(), GraphError> {
    match ids.iter().find(|id| !graph.contains(**id)) {
        Some(id) => Err(GraphError::UnknownElement(*id)),
        None => Ok(()),
    }
}
