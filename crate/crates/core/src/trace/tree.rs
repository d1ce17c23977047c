use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::portgraph::{ElementId, LocatedGraph, Record};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub u64);

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupId(pub u64);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TreeError {
    #[error("unknown state {0}")]
    UnknownState(StateId),
    #[error("unknown step group {0:?}")]
    UnknownGroup(GroupId),
    #[error("step group {group:?} continues from state {expected}, not {found}")]
    GroupMismatch { group: GroupId, expected: StateId, found: StateId },
    #[error("step group {0:?} is closed")]
    GroupClosed(GroupId),
    #[error("element {0} never existed in this derivation")]
    UnknownElement(ElementId),
    #[error("unknown export format `{0}` (expected csv-metrics, jsonl-events or dot-tree)")]
    UnknownFormat(String),
}

/// The rule application leading into a state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Derivation {
    pub parent: StateId,
    pub rule: String,
    /// Host ids of the left-hand-side image.
    pub image: Vec<ElementId>,
    /// Number of applications from the root; strictly increasing along a branch.
    pub app: u64,
    pub group: GroupId,
}

#[derive(Clone, Debug)]
pub(crate) struct StateEntry {
    pub located: LocatedGraph,
    pub derivation: Option<Derivation>,
    pub children: Vec<StateId>,
}

/// One strategy execution: a chain of applications starting at `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepGroup {
    pub start: StateId,
    pub states: Vec<StateId>,
    pub label: String,
    /// False while running, or when the execution aborted.
    pub complete: bool,
    pub closed: bool,
}

impl StepGroup {
    pub fn end(&self) -> StateId {
        self.states.last().copied().unwrap_or(self.start)
    }
}

/// Append-only tree of graph states. States share structure, so keeping
/// every intermediate state is cheap.
#[derive(Clone, Debug)]
pub struct DerivationTree {
    pub(crate) states: Vec<StateEntry>,
    pub(crate) groups: Vec<StepGroup>,
    id_floor: u64,
}

/// One entry of `branch_states`: the state reached at the end of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepState {
    /// 0 for the root.
    pub step: usize,
    pub state: StateId,
    pub group: Option<GroupId>,
    pub applications: usize,
    pub complete: bool,
}

/// One `trace_element` entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementSnapshot {
    pub state: StateId,
    pub record: Record,
    /// The record differs from the parent state's (or the element is new there).
    pub changed: bool,
}

impl DerivationTree {
    pub fn new(root: LocatedGraph) -> Self {
        let id_floor = root.graph.next_id();
        DerivationTree {
            states: vec![StateEntry {
                located: root,
                derivation: None,
                children: Vec::new(),
            }],
            groups: Vec::new(),
            id_floor,
        }
    }

    pub fn root(&self) -> StateId {
        StateId(0)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, id: StateId) -> bool {
        (id.0 as usize) < self.states.len()
    }

    fn entry(&self, id: StateId) -> Result<&StateEntry, TreeError> {
        self.states.get(id.0 as usize).ok_or(TreeError::UnknownState(id))
    }

    pub fn state(&self, id: StateId) -> Result<&LocatedGraph, TreeError> {
        self.entry(id).map(|e| &e.located)
    }

    pub fn derivation(&self, id: StateId) -> Result<Option<&Derivation>, TreeError> {
        self.entry(id).map(|e| e.derivation.as_ref())
    }

    pub fn parent(&self, id: StateId) -> Result<Option<StateId>, TreeError> {
        Ok(self.derivation(id)?.map(|d| d.parent))
    }

    pub fn children(&self, id: StateId) -> Result<&[StateId], TreeError> {
        self.entry(id).map(|e| e.children.as_slice())
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u64).map(StateId)
    }

    pub fn leaves(&self) -> Vec<StateId> {
        self.state_ids().filter(|&s| self.states[s.0 as usize].children.is_empty()).collect()
    }

    pub fn group(&self, id: GroupId) -> Result<&StepGroup, TreeError> {
        self.groups.get(id.0 as usize).ok_or(TreeError::UnknownGroup(id))
    }

    pub fn groups(&self) -> &[StepGroup] {
        &self.groups
    }

    /// Lowest element id that no state of the tree has used; new elements must start here.
    pub fn id_floor(&self) -> u64 {
        self.id_floor
    }

    pub(crate) fn recompute_floor(&mut self) {
        self.id_floor = self.states.iter().map(|e| e.located.graph.next_id()).max().unwrap_or(0);
    }

    pub fn open_group(&mut self, start: StateId, label: &str) -> Result<GroupId, TreeError> {
        self.entry(start)?;
        self.groups.push(StepGroup {
            start,
            states: Vec::new(),
            label: label.to_owned(),
            complete: false,
            closed: false,
        });
        Ok(GroupId(self.groups.len() as u64 - 1))
    }

    pub fn close_group(&mut self, id: GroupId, complete: bool) -> Result<(), TreeError> {
        let g = self.groups.get_mut(id.0 as usize).ok_or(TreeError::UnknownGroup(id))?;
        g.closed = true;
        g.complete = complete;
        Ok(())
    }

    /// Appends `child` under `parent` as part of `group`, which must end at `parent`.
    pub fn commit(
        &mut self,
        parent: StateId,
        child: LocatedGraph,
        rule: &str,
        image: Vec<ElementId>,
        group: GroupId,
    ) -> Result<StateId, TreeError> {
        let app = match &self.entry(parent)?.derivation {
            Some(d) => d.app + 1,
            None => 1,
        };
        let g = self.groups.get(group.0 as usize).ok_or(TreeError::UnknownGroup(group))?;
        if g.closed {
            return Err(TreeError::GroupClosed(group));
        }
        if g.end() != parent {
            return Err(TreeError::GroupMismatch {
                group,
                expected: g.end(),
                found: parent,
            });
        }
        let id = StateId(self.states.len() as u64);
        self.id_floor = self.id_floor.max(child.graph.next_id());
        self.states.push(StateEntry {
            located: child,
            derivation: Some(Derivation {
                parent,
                rule: rule.to_owned(),
                image,
                app,
                group,
            }),
            children: Vec::new(),
        });
        self.states[parent.0 as usize].children.push(id);
        self.groups[group.0 as usize].states.push(id);
        Ok(id)
    }

    /// States from the root to `leaf`, inclusive.
    pub fn path(&self, leaf: StateId) -> Result<Vec<StateId>, TreeError> {
        let mut path = vec![leaf];
        let mut cur = leaf;
        while let Some(p) = self.parent(cur)? {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Ok(path)
    }

    /// The root, then the last state of every propagation step on the way to `leaf`.
    ///
    /// A step cut short (by an abort, or because `leaf` lies inside it) is
    /// reported with `complete = false`.
    pub fn branch_states(&self, leaf: StateId) -> Result<Vec<StepState>, TreeError> {
        let path = self.path(leaf)?;
        let mut out = vec![StepState {
            step: 0,
            state: path[0],
            group: None,
            applications: 0,
            complete: true,
        }];
        for &s in &path[1..] {
            let d = self.derivation(s)?.expect("non-root");
            match out.last_mut() {
                Some(last) if last.group == Some(d.group) => {
                    last.state = s;
                    last.applications += 1;
                }
                _ => {
                    let step = out.len();
                    out.push(StepState {
                        step,
                        state: s,
                        group: Some(d.group),
                        applications: 1,
                        complete: false,
                    });
                }
            }
        }
        for st in &mut out[1..] {
            let g = &self.groups[st.group.expect("non-root").0 as usize];
            st.complete = g.closed && g.complete && g.end() == st.state;
        }
        Ok(out)
    }

    /// Snapshots of `element` in every state holding it, in commit order.
    pub fn trace_element(&self, element: ElementId) -> Result<Vec<ElementSnapshot>, TreeError> {
        let mut out = Vec::new();
        for (i, entry) in self.states.iter().enumerate() {
            let Some(record) = entry.located.graph.record(element) else {
                continue;
            };
            let changed = match &entry.derivation {
                None => false,
                Some(d) => self.states[d.parent.0 as usize].located.graph.record(element) != Some(record),
            };
            out.push(ElementSnapshot {
                state: StateId(i as u64),
                record: record.clone(),
                changed,
            });
        }
        if out.is_empty() {
            return Err(TreeError::UnknownElement(element));
        }
        Ok(out)
    }

    /// Applications along the branch ending at `leaf`, with their step number.
    pub fn branch_events(&self, leaf: StateId) -> Result<Vec<Event>, TreeError> {
        let step_of: HashMap<GroupId, usize> = self
            .branch_states(leaf)?
            .iter()
            .filter_map(|s| s.group.map(|g| (g, s.step)))
            .collect();
        let mut events = Vec::new();
        for s in self.path(leaf)?.into_iter().skip(1) {
            let d = self.derivation(s)?.expect("non-root");
            events.push(Event {
                step: step_of[&d.group],
                app: d.app,
                rule: d.rule.clone(),
                parent: d.parent,
                child: s,
                image: d.image.clone(),
            });
        }
        Ok(events)
    }
}

/// One rule application, as exported to the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: usize,
    pub app: u64,
    pub rule: String,
    pub parent: StateId,
    pub child: StateId,
    pub image: Vec<ElementId>,
}
