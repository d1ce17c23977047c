use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::portgraph::{ElementId, ElementKind, LocatedGraph, PortGraph};
use crate::scalar::Tolerance;

use super::predicate::Bindings;
use super::rule::RewriteRule;

/// How a match is picked among several candidates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Sorted by the tuple of host ids; the first is chosen.
    Deterministic,
    /// Uniform choice driven by the run rng.
    #[default]
    Random,
}

impl std::str::FromStr for MatchMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "deterministic" => Ok(MatchMode::Deterministic),
            "random" => Ok(MatchMode::Random),
            other => Err(format!("unknown match mode `{other}` (expected deterministic or random)")),
        }
    }
}

/// An injective morphism from the rule's left-hand side into a host graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    /// Host image of each lhs element, in flat order (nodes, ports, edges).
    pub images: Vec<ElementId>,
    pub bindings: Bindings,
}

impl Match {
    pub fn image_of(&self, rule: &RewriteRule, name: &str) -> Option<ElementId> {
        rule.lhs_index(name).map(|i| self.images[i])
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("match has {found} elements, rule left-hand side has {expected}")]
    Arity { expected: usize, found: usize },
    #[error("element {0} is mapped twice")]
    NotInjective(ElementId),
    #[error("`{name}` is mapped to {id}, which is not a {kind} of the graph")]
    WrongKind { name: String, id: ElementId, kind: ElementKind },
    #[error("`{0}` breaks adjacency or port ownership")]
    Structure(String),
    #[error("`{0}` fails its property predicates")]
    Predicate(String),
    #[error("match does not overlap the position")]
    OutsidePosition,
    #[error("match touches banned element {0}")]
    Banned(ElementId),
}

#[derive(Clone, Copy, Debug)]
enum Anchor {
    Free(ElementKind),
    PortOf(usize),
    EdgeAt(usize),
    OtherEnd { edge: usize, from: usize },
    OwnerOf(usize),
}

struct Search<'a> {
    rule: &'a RewriteRule,
    host: &'a PortGraph,
    located: &'a LocatedGraph,
    tol: Tolerance<f64>,
    order: Vec<(usize, Anchor)>,
    images: Vec<Option<ElementId>>,
    bindings: Bindings,
    out: Vec<Match>,
}

/// Visits lhs elements so that, within a connected component, each element
/// is reachable from an already-placed one.
fn search_order(rule: &RewriteRule) -> Vec<(usize, Anchor)> {
    let lhs = &rule.lhs;
    let plan = &rule.plan;
    let (nn, np) = (lhs.nodes.len(), lhs.ports.len());
    let total = lhs.len();
    let mut placed = vec![false; total];
    let mut order = Vec::with_capacity(total);
    let mut queue = VecDeque::new();
    let mut place = |i: usize, a: Anchor, order: &mut Vec<_>, queue: &mut VecDeque<usize>| {
        if !placed[i] {
            placed[i] = true;
            order.push((i, a));
            queue.push_back(i);
        }
    };
    let starts: Vec<(usize, ElementKind)> = (0..nn)
        .map(|i| (i, ElementKind::Node))
        .chain((nn..nn + np).map(|i| (i, ElementKind::Port)))
        .chain((nn + np..total).map(|i| (i, ElementKind::Edge)))
        .collect();
    for (start, kind) in starts {
        place(start, Anchor::Free(kind), &mut order, &mut queue);
        while let Some(i) = queue.pop_front() {
            if i < nn {
                for (p, &owner) in plan.lhs_port_owner.iter().enumerate() {
                    if owner == i {
                        place(nn + p, Anchor::PortOf(i), &mut order, &mut queue);
                    }
                }
            } else if i < nn + np {
                let p = i - nn;
                place(plan.lhs_port_owner[p], Anchor::OwnerOf(p), &mut order, &mut queue);
                for (e, ends) in plan.lhs_edge_ends.iter().enumerate() {
                    if ends.contains(&p) {
                        place(nn + np + e, Anchor::EdgeAt(p), &mut order, &mut queue);
                    }
                }
            } else {
                let e = i - nn - np;
                for (k, &p) in plan.lhs_edge_ends[e].iter().enumerate() {
                    let from = plan.lhs_edge_ends[e][1 - k];
                    place(nn + p, Anchor::OtherEnd { edge: e, from }, &mut order, &mut queue);
                }
            }
        }
    }
    order
}

impl<'a> Search<'a> {
    fn candidates(&self, anchor: Anchor) -> Vec<ElementId> {
        let (nn, np) = (self.rule.lhs.nodes.len(), self.rule.lhs.ports.len());
        let img = |i: usize| self.images[i].expect("anchor placed first");
        match anchor {
            Anchor::Free(ElementKind::Node) => self.host.node_ids().collect(),
            Anchor::Free(kind) => self.host.ids_of_kind(kind),
            Anchor::PortOf(n) => self.host.ports_of(img(n)).collect(),
            Anchor::EdgeAt(p) => self.host.edges_at(img(nn + p)).collect(),
            Anchor::OtherEnd { edge, from } => {
                let e = img(nn + np + edge);
                self.host.edge(e).and_then(|x| x.other_end(img(nn + from))).into_iter().collect()
            }
            Anchor::OwnerOf(p) => self.host.port(img(nn + p)).map(|x| x.owner).into_iter().collect(),
        }
    }

    fn run(&mut self, depth: usize) {
        if depth == self.order.len() {
            let images: Vec<ElementId> = self.images.iter().map(|i| i.expect("complete")).collect();
            if images.iter().any(|id| self.located.position.contains(id)) {
                self.out.push(Match {
                    images,
                    bindings: self.bindings.clone(),
                });
            }
            return;
        }
        let (i, anchor) = self.order[depth];
        for cand in self.candidates(anchor) {
            let mark = self.bindings.len();
            if self.admissible(i, cand) {
                self.images[i] = Some(cand);
                self.run(depth + 1);
                self.images[i] = None;
            }
            self.bindings.truncate(mark);
        }
    }

    fn admissible(&mut self, i: usize, cand: ElementId) -> bool {
        if self.located.banned.contains(&cand) || self.images.contains(&Some(cand)) {
            return false;
        }
        if !consistent(self.rule, self.host, &self.images, i, cand) {
            return false;
        }
        let preds = self.rule.lhs.labels().nth(i).expect("index in range");
        let record = self.host.record(cand).expect("candidate exists");
        preds.iter().all(|p| p.holds(record, &mut self.bindings, self.tol))
    }
}

/// Structural check of `cand` as image of lhs element `i` against the
/// already-placed images.
fn consistent(rule: &RewriteRule, host: &PortGraph, images: &[Option<ElementId>], i: usize, cand: ElementId) -> bool {
    let plan = &rule.plan;
    let (nn, np) = (rule.lhs.nodes.len(), rule.lhs.ports.len());
    let kind = rule.lhs.kind_at(i);
    if host.kind_of(cand) != Some(kind) {
        return false;
    }
    match kind {
        ElementKind::Node => plan
            .lhs_port_owner
            .iter()
            .enumerate()
            .filter(|(_, &o)| o == i)
            .all(|(p, _)| images[nn + p].is_none_or(|hp| host.port(hp).map(|x| x.owner) == Some(cand))),
        ElementKind::Port => {
            let p = i - nn;
            let owner = host.port(cand).expect("kind checked").owner;
            if images[plan.lhs_port_owner[p]].is_some_and(|n| n != owner) {
                return false;
            }
            plan.lhs_edge_ends.iter().enumerate().all(|(e, ends)| {
                !ends.contains(&p)
                    || images[nn + np + e].is_none_or(|he| host.edge(he).expect("placed").ends.contains(&cand))
            })
        }
        ElementKind::Edge => {
            let ends = host.edge(cand).expect("kind checked").ends;
            plan.lhs_edge_ends[i - nn - np]
                .iter()
                .all(|&p| images[nn + p].is_none_or(|hp| ends.contains(&hp)))
        }
    }
}

/// All matches of `rule` in `located`, sorted by their image tuples.
///
/// A match must touch the position and avoid the banned set.
pub fn all_matches(rule: &RewriteRule, located: &LocatedGraph, tol: Tolerance<f64>) -> Vec<Match> {
    let mut s = Search {
        rule,
        host: &located.graph,
        located,
        tol,
        order: search_order(rule),
        images: vec![None; rule.lhs.len()],
        bindings: Vec::new(),
        out: Vec::new(),
    };
    s.run(0);
    let mut out = s.out;
    out.sort_by(|a, b| a.images.cmp(&b.images));
    out
}

/// All matches, sorted in deterministic mode and shuffled by `rng` in random mode.
pub fn find_matches(
    rule: &RewriteRule,
    located: &LocatedGraph,
    rng: &mut dyn RngCore,
    mode: MatchMode,
    tol: Tolerance<f64>,
) -> Vec<Match> {
    let mut out = all_matches(rule, located, tol);
    if mode == MatchMode::Random {
        out.shuffle(rng);
    }
    out
}

/// One match: the smallest in deterministic mode, a uniform pick in random mode.
pub fn choose_match(
    rule: &RewriteRule,
    located: &LocatedGraph,
    rng: &mut dyn RngCore,
    mode: MatchMode,
    tol: Tolerance<f64>,
) -> Option<Match> {
    let mut all = all_matches(rule, located, tol);
    if all.is_empty() {
        return None;
    }
    let i = match mode {
        MatchMode::Deterministic => 0,
        MatchMode::Random => rng.gen_range(0..all.len()),
    };
    Some(all.swap_remove(i))
}

/// Checks an explicitly given image vector and computes its bindings.
pub fn verify_match(
    rule: &RewriteRule,
    located: &LocatedGraph,
    images: &[ElementId],
    tol: Tolerance<f64>,
) -> Result<Match, MatchError> {
    let n = rule.lhs.len();
    if images.len() != n {
        return Err(MatchError::Arity {
            expected: n,
            found: images.len(),
        });
    }
    let names: Vec<&str> = rule.lhs.names().collect();
    let host = &located.graph;
    let mut placed: Vec<Option<ElementId>> = vec![None; n];
    let mut bindings = Vec::new();
    for (i, (&id, preds)) in images.iter().zip(rule.lhs.labels()).enumerate() {
        if placed.contains(&Some(id)) {
            return Err(MatchError::NotInjective(id));
        }
        let kind = rule.lhs.kind_at(i);
        if host.kind_of(id) != Some(kind) {
            return Err(MatchError::WrongKind {
                name: names[i].to_owned(),
                id,
                kind,
            });
        }
        if !consistent(rule, host, &placed, i, id) {
            return Err(MatchError::Structure(names[i].to_owned()));
        }
        let record = host.record(id).expect("kind checked");
        if !preds.iter().all(|p| p.holds(record, &mut bindings, tol)) {
            return Err(MatchError::Predicate(names[i].to_owned()));
        }
        placed[i] = Some(id);
    }
    if let Some(&b) = images.iter().find(|id| located.banned.contains(id)) {
        return Err(MatchError::Banned(b));
    }
    if !images.iter().any(|id| located.position.contains(id)) {
        return Err(MatchError::OutsidePosition);
    }
    Ok(Match {
        images: images.to_vec(),
        bindings,
    })
}
