use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::portgraph::{deserialize_graph, serialize_located, Delta, FormatError, GraphError};

use super::tree::{Derivation, DerivationTree, StateEntry, StepGroup};

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("state {index}: {source}")]
    Replay {
        index: usize,
        #[source]
        source: GraphError,
    },
    #[error("malformed tree document: {0}")]
    Malformed(String),
}

/// Serialised tree: the root state in full, every other state as a delta
/// against its parent.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDocument {
    pub root: Box<RawValue>,
    pub root_next_id: u64,
    pub states: Vec<StateRecord>,
    pub groups: Vec<StepGroup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    #[serde(flatten)]
    pub derivation: Derivation,
    pub delta: Delta,
}

impl DerivationTree {
    pub fn to_document(&self) -> Result<TreeDocument, PersistError> {
        let root = &self.states[0].located;
        let text = String::from_utf8(serialize_located(root)?).expect("serialised graph is UTF-8");
        let root_json = RawValue::from_string(text.trim_end().to_owned()).expect("serialised graph is JSON");
        let states = self.states[1..]
            .iter()
            .map(|entry| {
                let d = entry.derivation.clone().expect("non-root");
                let parent = &self.states[d.parent.0 as usize].located;
                StateRecord {
                    delta: Delta::between(parent, &entry.located),
                    derivation: d,
                }
            })
            .collect();
        Ok(TreeDocument {
            root: root_json,
            root_next_id: root.graph.next_id(),
            states,
            groups: self.groups.clone(),
        })
    }

    pub fn from_document(doc: &TreeDocument) -> Result<Self, PersistError> {
        let mut root = deserialize_graph(doc.root.get().as_bytes())?.into_located();
        root.graph.reserve_ids(doc.root_next_id);
        let mut tree = DerivationTree::new(root);
        for (i, rec) in doc.states.iter().enumerate() {
            let index = i + 1;
            let parent = rec.derivation.parent.0 as usize;
            if parent >= index {
                return Err(PersistError::Malformed(format!("state {index} precedes its parent")));
            }
            let located = rec
                .delta
                .apply(&tree.states[parent].located)
                .map_err(|source| PersistError::Replay { index, source })?;
            tree.states[parent].children.push(super::StateId(index as u64));
            tree.states.push(StateEntry {
                located,
                derivation: Some(rec.derivation.clone()),
                children: Vec::new(),
            });
        }
        tree.groups = doc.groups.clone();
        tree.recompute_floor();
        Ok(tree)
    }
}
