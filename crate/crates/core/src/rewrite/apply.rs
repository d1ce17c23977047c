use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;

use crate::portgraph::{ElementId, GraphError, LocatedGraph, PortGraph, PropertyValue, Record, Selection};

use super::expr::{EvalEnv, EvalError};
use super::matcher::Match;
use super::rule::{RewriteRule, RhsValue};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ApplyError {
    #[error("match does not fit the rule: {0}")]
    BadMatch(String),
    #[error("evaluating `{attr}` on `{elem}`: {source}")]
    Eval {
        elem: String,
        attr: String,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Result of one rule application.
#[derive(Clone, Debug, PartialEq)]
pub struct Application {
    pub result: LocatedGraph,
    /// Host id of each rhs element, in flat order.
    pub rhs_images: Vec<ElementId>,
    /// Elements that did not exist before.
    pub created: Vec<ElementId>,
    /// Elements that no longer exist.
    pub removed: Vec<ElementId>,
    /// Preserved or created elements whose record was written.
    pub updated: Vec<ElementId>,
}

struct MatchEnv<'a> {
    rule: &'a RewriteRule,
    graph: &'a PortGraph,
    m: &'a Match,
}

impl EvalEnv for MatchEnv<'_> {
    fn property(&self, elem: &str, attr: &str) -> Result<Option<PropertyValue>, EvalError> {
        let i = self
            .rule
            .lhs_index(elem)
            .ok_or_else(|| EvalError::UnboundElement(elem.to_owned()))?;
        Ok(self
            .graph
            .record(self.m.images[i])
            .and_then(|r| r.get(attr))
            .cloned())
    }

    fn variable(&self, name: &str) -> Option<PropertyValue> {
        self.m.bindings.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone())
    }
}

/// Applies `rule` at `m`, returning a new state; `located` is left untouched.
///
/// All right-hand-side expressions are evaluated against the input state
/// before anything is written.
pub fn apply_rule(
    rule: &RewriteRule,
    m: &Match,
    located: &LocatedGraph,
    rng: &mut dyn RngCore,
) -> Result<Application, ApplyError> {
    let host = &located.graph;
    let plan = &rule.plan;
    let (ln, lp) = (rule.lhs.nodes.len(), rule.lhs.ports.len());
    let (rn, rp) = (rule.rhs.nodes.len(), rule.rhs.ports.len());
    if m.images.len() != rule.lhs.len() {
        return Err(ApplyError::BadMatch(format!(
            "{} images for {} lhs elements",
            m.images.len(),
            rule.lhs.len()
        )));
    }
    for (i, &id) in m.images.iter().enumerate() {
        if host.kind_of(id) != Some(rule.lhs.kind_at(i)) {
            return Err(ApplyError::BadMatch(format!("{id} is not a {}", rule.lhs.kind_at(i))));
        }
    }

    let env = MatchEnv { rule, graph: host, m };
    let mut writes: Vec<(usize, String, PropertyValue)> = Vec::new();
    for (i, (elem, assigns)) in rule.rhs.names().zip(rule.rhs.labels()).enumerate() {
        for a in assigns {
            let v = match &a.value {
                RhsValue::Literal(v) => v.clone(),
                RhsValue::Expr(e) => e.eval(&env, rng).map_err(|source| ApplyError::Eval {
                    elem: elem.to_owned(),
                    attr: a.attr.clone(),
                    source,
                })?,
            };
            writes.push((i, a.attr.clone(), v));
        }
    }

    let mut g = host.clone();
    let image_set: BTreeSet<ElementId> = m.images.iter().copied().collect();
    let mut preserved = vec![false; rule.lhs.len()];
    for i in 0..rule.rhs.len() {
        if let Some(o) = rule.rhs_origin(i) {
            preserved[o] = true;
        }
    }
    let mut removed = Vec::new();
    let mut created = Vec::new();

    for e in 0..rule.lhs.edges.len() {
        if !preserved[ln + lp + e] {
            let id = m.images[ln + lp + e];
            g.remove_edge(id)?;
            removed.push(id);
        }
    }

    let mut rhs_images: Vec<Option<ElementId>> = (0..rule.rhs.len())
        .map(|i| rule.rhs_origin(i).map(|o| m.images[o]))
        .collect();
    for slot in rhs_images.iter_mut().take(rn) {
        if slot.is_none() {
            let id = g.add_node(Record::new());
            *slot = Some(id);
            created.push(id);
        }
    }
    for p in 0..rp {
        if rhs_images[rn + p].is_none() {
            let owner = rhs_images[plan.rhs_port_owner[p]].expect("nodes placed");
            let id = g.add_port(owner, Record::new())?;
            rhs_images[rn + p] = Some(id);
            created.push(id);
        }
    }

    // Host edges hanging off lhs ports follow the bridges.
    let lhs_port_of: BTreeMap<ElementId, usize> = (0..lp).map(|p| (m.images[ln + p], p)).collect();
    let targets = |port: ElementId| -> Vec<ElementId> {
        match lhs_port_of.get(&port) {
            Some(&p) => plan.bridge_targets[p]
                .iter()
                .map(|&r| rhs_images[rn + r].expect("ports placed"))
                .collect(),
            None => vec![port],
        }
    };
    let mut external: BTreeSet<ElementId> = BTreeSet::new();
    for p in 0..lp {
        external.extend(host.edges_at(m.images[ln + p]).filter(|e| !image_set.contains(e)));
    }
    for eid in external {
        let edge = g.edge(eid).expect("external edge survives lhs deletion").clone();
        let (ta, tb) = (targets(edge.ends[0]), targets(edge.ends[1]));
        if ta.is_empty() || tb.is_empty() {
            g.remove_edge(eid)?;
            removed.push(eid);
            continue;
        }
        let mut first = true;
        for &a in &ta {
            for &b in &tb {
                if first {
                    g.set_edge_ends(eid, [a, b])?;
                    first = false;
                } else {
                    let id = g.add_edge(a, b, edge.record.clone())?;
                    created.push(id);
                }
            }
        }
    }

    for p in 0..lp {
        if !preserved[ln + p] {
            let id = m.images[ln + p];
            for e in g.edges_at(id).collect::<Vec<_>>() {
                g.remove_edge(e)?;
                removed.push(e);
            }
            g.remove_port(id)?;
            removed.push(id);
        }
    }
    for (&id, _) in m.images[..ln].iter().zip(&preserved).filter(|(_, &kept)| !kept) {
        for port in g.ports_of(id).collect::<Vec<_>>() {
            for e in g.edges_at(port).collect::<Vec<_>>() {
                g.remove_edge(e)?;
                removed.push(e);
            }
            g.remove_port(port)?;
            removed.push(port);
        }
        g.remove_node(id)?;
        removed.push(id);
    }

    for (e, &[a, b]) in plan.rhs_edge_ends.iter().enumerate() {
        let i = rn + rp + e;
        if rhs_images[i].is_none() {
            let (a, b) = (rhs_images[rn + a].expect("placed"), rhs_images[rn + b].expect("placed"));
            let id = g.add_edge(a, b, Record::new())?;
            rhs_images[i] = Some(id);
            created.push(id);
        }
    }
    let rhs_images: Vec<ElementId> = rhs_images.into_iter().map(|i| i.expect("all placed")).collect();

    let mut updated = Vec::new();
    for (i, attr, v) in writes {
        let id = rhs_images[i];
        g.set_property(id, &attr, v)?;
        updated.push(id);
    }
    updated.dedup();

    let removed_set: BTreeSet<ElementId> = removed.iter().copied().collect();
    let mut position: Selection = located
        .position
        .iter()
        .filter(|id| !image_set.contains(id) && !removed_set.contains(id))
        .copied()
        .collect();
    position.extend(plan.position_update.iter().map(|&i| rhs_images[i]));
    let mut banned: Selection = located.banned.iter().filter(|id| !removed_set.contains(id)).copied().collect();
    banned.extend(plan.ban_update.iter().map(|&i| rhs_images[i]));

    Ok(Application {
        result: LocatedGraph {
            graph: g,
            position,
            banned,
        },
        rhs_images,
        created,
        removed,
        updated,
    })
}
