use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::portgraph::{ElementKind, PropertyValue};

use super::expr::Expr;
use super::predicate::{Operand, PredicateError, PropertyPredicate};

#[derive(Clone, Debug, PartialEq)]
pub struct RuleNode<L> {
    pub name: String,
    pub label: L,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RulePort<L> {
    pub name: String,
    pub owner: String,
    pub label: L,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleEdge<L> {
    pub name: String,
    pub ends: [String; 2],
    pub label: L,
}

/// One side of a rule: a small port graph whose elements are named.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleGraph<L> {
    pub nodes: Vec<RuleNode<L>>,
    pub ports: Vec<RulePort<L>>,
    pub edges: Vec<RuleEdge<L>>,
}

impl<L> Default for RuleGraph<L> {
    fn default() -> Self {
        RuleGraph {
            nodes: Vec::new(),
            ports: Vec::new(),
            edges: Vec::new(),
        }
    }
}

impl<L> RuleGraph<L> {
    pub fn node(&mut self, name: &str, label: L) -> &mut Self {
        self.nodes.push(RuleNode {
            name: name.into(),
            label,
        });
        self
    }

    pub fn port(&mut self, name: &str, owner: &str, label: L) -> &mut Self {
        self.ports.push(RulePort {
            name: name.into(),
            owner: owner.into(),
            label,
        });
        self
    }

    pub fn edge(&mut self, name: &str, ends: [&str; 2], label: L) -> &mut Self {
        self.edges.push(RuleEdge {
            name: name.into(),
            ends: ends.map(String::from),
            label,
        });
        self
    }

    /// Number of elements; also the length of a match on this side.
    pub fn len(&self) -> usize {
        self.nodes.len() + self.ports.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Names in flat order: nodes, then ports, then edges.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.nodes
            .iter()
            .map(|n| n.name.as_str())
            .chain(self.ports.iter().map(|p| p.name.as_str()))
            .chain(self.edges.iter().map(|e| e.name.as_str()))
    }

    pub fn labels(&self) -> impl Iterator<Item = &L> {
        self.nodes
            .iter()
            .map(|n| &n.label)
            .chain(self.ports.iter().map(|p| &p.label))
            .chain(self.edges.iter().map(|e| &e.label))
    }

    /// Kind of the element at flat index `i`.
    pub fn kind_at(&self, i: usize) -> ElementKind {
        if i < self.nodes.len() {
            ElementKind::Node
        } else if i < self.nodes.len() + self.ports.len() {
            ElementKind::Port
        } else {
            ElementKind::Edge
        }
    }

    fn index(&self) -> HashMap<&str, usize> {
        self.names().enumerate().map(|(i, n)| (n, i)).collect()
    }
}

pub type Pattern = RuleGraph<Vec<PropertyPredicate>>;

/// Value written to an attribute of a right-hand-side element.
#[derive(Clone, Debug, PartialEq)]
pub enum RhsValue {
    Literal(PropertyValue),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub attr: String,
    pub value: RhsValue,
}

impl Assignment {
    pub fn literal(attr: &str, v: impl Into<PropertyValue>) -> Self {
        Assignment {
            attr: attr.into(),
            value: RhsValue::Literal(v.into()),
        }
    }

    /// Panics if `text` is not a valid expression; meant for built-in rules.
    pub fn expr(attr: &str, text: &str) -> Self {
        Assignment {
            attr: attr.into(),
            value: RhsValue::Expr(Expr::parse(text).expect("valid built-in expression")),
        }
    }
}

pub type Replacement = RuleGraph<Vec<Assignment>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArrowPortKind {
    /// The attached left-hand-side port survives as the attached right-hand-side port(s).
    Bridge,
}

impl ArrowPortKind {
    pub fn name(self) -> &'static str {
        "bridge"
    }

    pub fn parse(s: &str) -> Result<Self, RuleError> {
        match s {
            "bridge" => Ok(ArrowPortKind::Bridge),
            other => Err(RuleError::UnsupportedArrowPort(other.to_owned())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrowPort {
    pub name: String,
    pub kind: ArrowPortKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrowEdge {
    pub arrow_port: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuleError {
    #[error("rule has an empty left-hand side")]
    EmptyLhs,
    #[error("name `{0}` is used more than once in the rule")]
    DuplicateName(String),
    #[error("port `{port}` has unknown owner `{owner}`")]
    UnknownOwner { port: String, owner: String },
    #[error("edge `{edge}` references `{port}`, which is not a port on the same side")]
    BadEdgeEnd { edge: String, port: String },
    #[error("arrow port type `{0}` is not supported (only `bridge`)")]
    UnsupportedArrowPort(String),
    #[error("arrow edge references unknown arrow port `{0}`")]
    UnknownArrowPort(String),
    #[error("arrow edge target `{0}` is not a left- or right-hand-side port")]
    BadArrowTarget(String),
    #[error("bridge `{0}` must connect at least one left-hand-side and one right-hand-side port")]
    IncompleteBridge(String),
    #[error("position/ban update references `{0}`, which is not a right-hand-side element")]
    BadLocationUpdate(String),
    #[error("`{0}` appears in both the position and the ban update")]
    OverlappingUpdates(String),
    #[error("element `{elem}`: {source}")]
    Predicate {
        elem: String,
        #[source]
        source: PredicateError,
    },
    #[error("expression on `{elem}` reads `{reference}`, which is not bound by the left-hand side")]
    UnboundReference { elem: String, reference: String },
    #[error("attribute `{attr}` assigned twice on `{elem}`")]
    DuplicateAssignment { elem: String, attr: String },
}

/// Index tables derived from a validated rule.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RulePlan {
    /// Owner node index of each lhs port.
    pub lhs_port_owner: Vec<usize>,
    /// Port indices (0-based among ports) of each lhs edge.
    pub lhs_edge_ends: Vec<[usize; 2]>,
    pub rhs_port_owner: Vec<usize>,
    pub rhs_edge_ends: Vec<[usize; 2]>,
    /// For each lhs port, the rhs ports it is bridged to.
    pub bridge_targets: Vec<Vec<usize>>,
    /// Lhs node / port / edge index whose host element each rhs element takes over.
    pub rhs_node_origin: Vec<Option<usize>>,
    pub rhs_port_origin: Vec<Option<usize>>,
    pub rhs_edge_origin: Vec<Option<usize>>,
    /// Flat rhs indices receiving position (J) and ban (K) status.
    pub position_update: Vec<usize>,
    pub ban_update: Vec<usize>,
    /// Name -> flat lhs index, including rhs names resolved to their origin.
    pub reference: HashMap<String, usize>,
}

/// A located port-graph rewrite rule `L => R` with its arrow node.
#[derive(Clone, Debug, PartialEq)]
pub struct RewriteRule {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Replacement,
    pub arrow_ports: Vec<ArrowPort>,
    pub arrow_edges: Vec<ArrowEdge>,
    /// J: rhs elements that become the new position; `None` means all of rhs.
    pub position_update: Option<Vec<String>>,
    /// K: rhs elements added to the banned set.
    pub ban_update: Vec<String>,
    pub(crate) plan: RulePlan,
}

pub struct RuleParts {
    pub name: String,
    pub lhs: Pattern,
    pub rhs: Replacement,
    pub arrow_ports: Vec<ArrowPort>,
    pub arrow_edges: Vec<ArrowEdge>,
    pub position_update: Option<Vec<String>>,
    pub ban_update: Vec<String>,
}

impl RuleParts {
    pub fn new(name: &str, lhs: Pattern, rhs: Replacement) -> Self {
        RuleParts {
            name: name.into(),
            lhs,
            rhs,
            arrow_ports: Vec::new(),
            arrow_edges: Vec::new(),
            position_update: None,
            ban_update: Vec::new(),
        }
    }

    /// Adds a bridge port joining `lhs_port` to `rhs_port`.
    pub fn bridge(mut self, lhs_port: &str, rhs_port: &str) -> Self {
        let name = format!("bridge{}", self.arrow_ports.len());
        self.arrow_edges.push(ArrowEdge {
            arrow_port: name.clone(),
            target: lhs_port.into(),
        });
        self.arrow_edges.push(ArrowEdge {
            arrow_port: name.clone(),
            target: rhs_port.into(),
        });
        self.arrow_ports.push(ArrowPort {
            name,
            kind: ArrowPortKind::Bridge,
        });
        self
    }

    pub fn build(self) -> Result<RewriteRule, RuleError> {
        RewriteRule::new(self)
    }
}

fn side_tables<L>(g: &RuleGraph<L>) -> Result<(Vec<usize>, Vec<[usize; 2]>), RuleError> {
    let nodes: HashMap<&str, usize> = g.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
    let ports: HashMap<&str, usize> = g.ports.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
    let owners = g
        .ports
        .iter()
        .map(|p| {
            nodes.get(p.owner.as_str()).copied().ok_or_else(|| RuleError::UnknownOwner {
                port: p.name.clone(),
                owner: p.owner.clone(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ends = g
        .edges
        .iter()
        .map(|e| {
            let end = |n: &String| {
                ports.get(n.as_str()).copied().ok_or_else(|| RuleError::BadEdgeEnd {
                    edge: e.name.clone(),
                    port: n.clone(),
                })
            };
            Ok([end(&e.ends[0])?, end(&e.ends[1])?])
        })
        .collect::<Result<Vec<_>, RuleError>>()?;
    Ok((owners, ends))
}

impl RewriteRule {
    pub fn new(parts: RuleParts) -> Result<Self, RuleError> {
        let RuleParts {
            name,
            lhs,
            rhs,
            arrow_ports,
            arrow_edges,
            position_update,
            ban_update,
        } = parts;
        if lhs.nodes.is_empty() {
            return Err(RuleError::EmptyLhs);
        }
        let mut seen = BTreeSet::new();
        for n in lhs.names().chain(rhs.names()).chain(arrow_ports.iter().map(|a| a.name.as_str())) {
            if !seen.insert(n) {
                return Err(RuleError::DuplicateName(n.to_owned()));
            }
        }
        let (lhs_port_owner, lhs_edge_ends) = side_tables(&lhs)?;
        let (rhs_port_owner, rhs_edge_ends) = side_tables(&rhs)?;

        let lhs_ports: HashMap<&str, usize> = lhs.ports.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        let rhs_ports: HashMap<&str, usize> = rhs.ports.iter().enumerate().map(|(i, p)| (p.name.as_str(), i)).collect();
        let mut bridges: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); arrow_ports.len()];
        for edge in &arrow_edges {
            let a = arrow_ports
                .iter()
                .position(|p| p.name == edge.arrow_port)
                .ok_or_else(|| RuleError::UnknownArrowPort(edge.arrow_port.clone()))?;
            if let Some(&l) = lhs_ports.get(edge.target.as_str()) {
                bridges[a].0.push(l);
            } else if let Some(&r) = rhs_ports.get(edge.target.as_str()) {
                bridges[a].1.push(r);
            } else {
                return Err(RuleError::BadArrowTarget(edge.target.clone()));
            }
        }
        let mut bridge_targets = vec![Vec::new(); lhs.ports.len()];
        let mut bridged_from = vec![Vec::new(); rhs.ports.len()];
        for (port, (ls, rs)) in arrow_ports.iter().zip(&bridges) {
            if ls.is_empty() || rs.is_empty() {
                return Err(RuleError::IncompleteBridge(port.name.clone()));
            }
            for &l in ls {
                for &r in rs {
                    if !bridge_targets[l].contains(&r) {
                        bridge_targets[l].push(r);
                        bridged_from[r].push(l);
                    }
                }
            }
        }

        // Identity inheritance: an rhs node takes over the lhs node one of its
        // ports is bridged from; its ports then take over bridged ports of that
        // node, and edges whose both ports were taken over keep their lhs edge.
        let mut rhs_node_origin = vec![None; rhs.nodes.len()];
        let mut node_claimed = vec![false; lhs.nodes.len()];
        for (n, origin) in rhs_node_origin.iter_mut().enumerate() {
            let candidate = (0..rhs.ports.len())
                .filter(|&r| rhs_port_owner[r] == n)
                .flat_map(|r| bridged_from[r].iter().map(|&l| lhs_port_owner[l]))
                .find(|&m| !node_claimed[m]);
            if let Some(m) = candidate {
                node_claimed[m] = true;
                *origin = Some(m);
            }
        }
        let mut rhs_port_origin = vec![None; rhs.ports.len()];
        let mut port_claimed = vec![false; lhs.ports.len()];
        for r in 0..rhs.ports.len() {
            let Some(m) = rhs_node_origin[rhs_port_owner[r]] else { continue };
            if let Some(&l) = bridged_from[r].iter().find(|&&l| lhs_port_owner[l] == m && !port_claimed[l]) {
                port_claimed[l] = true;
                rhs_port_origin[r] = Some(l);
            }
        }
        let mut rhs_edge_origin = vec![None; rhs.edges.len()];
        let mut edge_claimed = vec![false; lhs.edges.len()];
        for (e, [a, b]) in rhs_edge_ends.iter().enumerate() {
            let (Some(la), Some(lb)) = (rhs_port_origin[*a], rhs_port_origin[*b]) else { continue };
            if let Some(le) = lhs_edge_ends
                .iter()
                .enumerate()
                .position(|(i, ends)| !edge_claimed[i] && (*ends == [la, lb] || *ends == [lb, la]))
            {
                edge_claimed[le] = true;
                rhs_edge_origin[e] = Some(le);
            }
        }

        let rhs_index = rhs.index();
        let lookup_rhs = |names: &[String]| {
            names
                .iter()
                .map(|n| rhs_index.get(n.as_str()).copied().ok_or_else(|| RuleError::BadLocationUpdate(n.clone())))
                .collect::<Result<Vec<_>, _>>()
        };
        let position_idx = match &position_update {
            Some(names) => lookup_rhs(names)?,
            None => (0..rhs.len()).collect(),
        };
        let ban_idx = lookup_rhs(&ban_update)?;
        if position_update.is_some() {
            if let Some(n) = ban_update.iter().find(|n| position_update.as_ref().unwrap().contains(n)) {
                return Err(RuleError::OverlappingUpdates(n.clone()));
            }
        }

        let mut reference: HashMap<String, usize> =
            lhs.names().enumerate().map(|(i, n)| (n.to_owned(), i)).collect();
        let (ln, lp) = (lhs.nodes.len(), lhs.ports.len());
        for (i, o) in rhs_node_origin.iter().enumerate() {
            if let Some(o) = o {
                reference.insert(rhs.nodes[i].name.clone(), *o);
            }
        }
        for (i, o) in rhs_port_origin.iter().enumerate() {
            if let Some(o) = o {
                reference.insert(rhs.ports[i].name.clone(), ln + o);
            }
        }
        for (i, o) in rhs_edge_origin.iter().enumerate() {
            if let Some(o) = o {
                reference.insert(rhs.edges[i].name.clone(), ln + lp + o);
            }
        }

        let mut variables = BTreeSet::new();
        for (elem, preds) in lhs.names().zip(lhs.labels()) {
            for p in preds {
                p.validate().map_err(|source| RuleError::Predicate {
                    elem: elem.to_owned(),
                    source,
                })?;
                if let Some(Operand::Var { var }) = &p.operand {
                    variables.insert(var.clone());
                }
            }
        }
        for (elem, assigns) in rhs.names().zip(rhs.labels()) {
            let mut attrs = BTreeSet::new();
            for a in assigns {
                if !attrs.insert(a.attr.as_str()) {
                    return Err(RuleError::DuplicateAssignment {
                        elem: elem.to_owned(),
                        attr: a.attr.clone(),
                    });
                }
                if let RhsValue::Expr(e) = &a.value {
                    let unbound = e
                        .elements()
                        .into_iter()
                        .find(|r| !reference.contains_key(*r))
                        .or_else(|| e.variables().into_iter().find(|v| !variables.contains(*v)));
                    if let Some(r) = unbound {
                        return Err(RuleError::UnboundReference {
                            elem: elem.to_owned(),
                            reference: r.to_owned(),
                        });
                    }
                }
            }
        }

        let plan = RulePlan {
            lhs_port_owner,
            lhs_edge_ends,
            rhs_port_owner,
            rhs_edge_ends,
            bridge_targets,
            rhs_node_origin,
            rhs_port_origin,
            rhs_edge_origin,
            position_update: position_idx,
            ban_update: ban_idx,
            reference,
        };
        Ok(RewriteRule {
            name,
            lhs,
            rhs,
            arrow_ports,
            arrow_edges,
            position_update,
            ban_update,
            plan,
        })
    }

    pub fn into_parts(self) -> RuleParts {
        RuleParts {
            name: self.name,
            lhs: self.lhs,
            rhs: self.rhs,
            arrow_ports: self.arrow_ports,
            arrow_edges: self.arrow_edges,
            position_update: self.position_update,
            ban_update: self.ban_update,
        }
    }

    /// Flat lhs index of an element name (lhs names, or rhs names of preserved elements).
    pub fn lhs_index(&self, name: &str) -> Option<usize> {
        self.plan.reference.get(name).copied()
    }

    /// Flat rhs index -> flat lhs index of the element it takes over, if any.
    pub(crate) fn rhs_origin(&self, i: usize) -> Option<usize> {
        let (rn, rp) = (self.rhs.nodes.len(), self.rhs.ports.len());
        let (ln, lp) = (self.lhs.nodes.len(), self.lhs.ports.len());
        if i < rn {
            self.plan.rhs_node_origin[i]
        } else if i < rn + rp {
            self.plan.rhs_port_origin[i - rn].map(|o| ln + o)
        } else {
            self.plan.rhs_edge_origin[i - rn - rp].map(|o| ln + lp + o)
        }
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({} lhs / {} rhs elements)",
            self.name,
            self.lhs.len(),
            self.rhs.len()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::predicate::Comparator;

    fn io_node(g: &mut Pattern, n: &str) {
        g.node(n, vec![]);
        g.port(&format!("{n}_in"), n, vec![PropertyPredicate::new("name", Comparator::Eq, "In")]);
        g.port(&format!("{n}_out"), n, vec![PropertyPredicate::new("name", Comparator::Eq, "Out")]);
    }

    fn io_rhs(g: &mut Replacement, n: &str) {
        g.node(n, vec![]);
        g.port(&format!("{n}_in"), n, vec![]);
        g.port(&format!("{n}_out"), n, vec![]);
    }

    #[test]
    fn bridges_preserve_identity() {
        let mut lhs = Pattern::default();
        io_node(&mut lhs, "w");
        let mut rhs = Replacement::default();
        io_rhs(&mut rhs, "w2");
        let rule = RuleParts::new("activate", lhs, rhs)
            .bridge("w_in", "w2_in")
            .bridge("w_out", "w2_out")
            .build()
            .unwrap();
        assert_eq!(rule.plan.rhs_node_origin, vec![Some(0)]);
        assert_eq!(rule.plan.rhs_port_origin, vec![Some(0), Some(1)]);
        assert_eq!(rule.lhs_index("w2"), Some(0));
        assert_eq!(rule.plan.position_update, vec![0, 1, 2]);
    }

    #[test]
    fn validation_errors() {
        let mut lhs = Pattern::default();
        io_node(&mut lhs, "w");
        let mut rhs = Replacement::default();
        io_rhs(&mut rhs, "w2");

        let mut parts = RuleParts::new("r", lhs.clone(), rhs.clone()).bridge("w_in", "w2_in");
        parts.arrow_ports[0].kind = ArrowPortKind::Bridge;
        assert!(parts.build().is_ok());

        assert_eq!(ArrowPortKind::parse("merging"), Err(RuleError::UnsupportedArrowPort("merging".into())));

        let parts = RuleParts::new("r", lhs.clone(), rhs.clone()).bridge("w_in", "nowhere");
        assert_eq!(parts.build().unwrap_err(), RuleError::BadArrowTarget("nowhere".into()));

        let mut parts = RuleParts::new("r", lhs.clone(), rhs.clone());
        parts.arrow_ports.push(ArrowPort {
            name: "b".into(),
            kind: ArrowPortKind::Bridge,
        });
        parts.arrow_edges.push(ArrowEdge {
            arrow_port: "b".into(),
            target: "w_in".into(),
        });
        assert_eq!(parts.build().unwrap_err(), RuleError::IncompleteBridge("b".into()));

        let mut parts = RuleParts::new("r", lhs.clone(), rhs.clone());
        parts.position_update = Some(vec!["w2".into()]);
        parts.ban_update = vec!["w2".into()];
        assert_eq!(parts.build().unwrap_err(), RuleError::OverlappingUpdates("w2".into()));

        let mut bad_rhs = rhs.clone();
        bad_rhs.nodes[0].label.push(Assignment::expr("sigma", r#"q.property("sigma")"#));
        let err = RuleParts::new("r", lhs.clone(), bad_rhs).build().unwrap_err();
        assert!(matches!(err, RuleError::UnboundReference { .. }));

        let mut dup = rhs.clone();
        dup.node("w", vec![]);
        assert_eq!(
            RuleParts::new("r", lhs.clone(), dup).build().unwrap_err(),
            RuleError::DuplicateName("w".into())
        );

        assert_eq!(
            RuleParts::new("r", Pattern::default(), rhs).build().unwrap_err(),
            RuleError::EmptyLhs
        );
    }
}
