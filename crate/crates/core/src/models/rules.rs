//! Rule sets and strategy programs of the two propagation models.

use crate::portgraph::PORT_NAME;
use crate::rewrite::{Assignment, Comparator, Pattern, PropertyPredicate, Replacement, RewriteRule, RuleParts};

use super::attrs;

/// Strategy of the independent cascade model.
pub const IC_STRATEGY: &str = include_str!("ic.strat");
/// Strategy of the linear threshold model.
pub const LT_STRATEGY: &str = include_str!("lt.strat");

#[derive(Clone, Copy)]
enum Orientation {
    /// Active node on the `In` side: reads `p_i2o`.
    D2s,
    /// Active node on the `Out` side: reads `p_o2i`.
    S2d,
}

impl Orientation {
    fn ports(self) -> (&'static str, &'static str) {
        match self {
            Orientation::D2s => ("In", "Out"),
            Orientation::S2d => ("Out", "In"),
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Orientation::D2s => "i2o",
            Orientation::S2d => "o2i",
        }
    }

    fn label(self) -> &'static str {
        match self {
            Orientation::D2s => "d2s",
            Orientation::S2d => "s2d",
        }
    }
}

fn is(attr: &str, v: bool) -> PropertyPredicate {
    PropertyPredicate::new(attr, Comparator::Eq, v)
}

fn named(port: &str) -> Vec<PropertyPredicate> {
    vec![PropertyPredicate::new(PORT_NAME, Comparator::Eq, port)]
}

/// Active `v` and inactive `w` joined by an unmarked edge, `v` on `from`'s side.
fn trial_pattern(o: Orientation) -> Pattern {
    let (from, to) = o.ports();
    let mut lhs = Pattern::default();
    lhs.node("v", vec![is(attrs::ACTIVE, true)])
        .node("w", vec![is(attrs::ACTIVE, false)])
        .port("vp", "v", named(from))
        .port("wp", "w", named(to))
        .edge("e", ["vp", "wp"], vec![is(attrs::MARKED, false)]);
    lhs
}

fn trial_rule(name: String, o: Orientation, w_update: Vec<Assignment>, e_update: Vec<Assignment>) -> RewriteRule {
    let mut rhs = Replacement::default();
    rhs.node("v'", vec![])
        .node("w'", w_update)
        .port("vp'", "v'", vec![])
        .port("wp'", "w'", vec![])
        .edge("e'", ["vp'", "wp'"], e_update);
    RuleParts::new(&name, trial_pattern(o), rhs)
        .bridge("vp", "vp'")
        .bridge("wp", "wp'")
        .build()
        .expect("built-in trial rule is valid")
}

fn ic_trial(o: Orientation) -> RewriteRule {
    let sigma = format!(
        "max(e.property(\"p_{}\") / random(1), w'.property(\"{}\"))",
        o.suffix(),
        attrs::SIGMA
    );
    trial_rule(
        format!("IC trial {}", o.label()),
        o,
        vec![
            Assignment::literal(attrs::VISITED, true),
            Assignment::expr(attrs::SIGMA, &sigma),
        ],
        vec![Assignment::literal(attrs::MARKED, true)],
    )
}

fn lt_trial(o: Orientation) -> RewriteRule {
    let (p, prev) = (format!("p_{}", o.suffix()), format!("p_prev_{}", o.suffix()));
    // Take out what this edge contributed before (nothing on a first trial),
    // then add its current probability.
    let base = format!(
        "(w.property(\"{j}\") - e.property(\"{prev}\")) / (1 - e.property(\"{prev}\"))",
        j = attrs::JOINT_INFLUENCE
    );
    let joint = format!("{base} + (1 - {base}) * e.property(\"{p}\")");
    let sigma = format!("ratio_or({joint}, w.property(\"{}\"), 2)", attrs::THETA);
    trial_rule(
        format!("LT trial {}", o.label()),
        o,
        vec![
            Assignment::literal(attrs::VISITED, true),
            Assignment::expr(attrs::JOINT_INFLUENCE, &joint),
            Assignment::expr(attrs::SIGMA, &sigma),
        ],
        vec![
            Assignment::literal(attrs::MARKED, true),
            Assignment::expr(&prev, &format!("e.property(\"{p}\")")),
        ],
    )
}

fn activate(name: &str) -> RewriteRule {
    let mut lhs = Pattern::default();
    lhs.node("w", vec![is(attrs::VISITED, true), is(attrs::ACTIVE, false)])
        .port("wi", "w", named("In"))
        .port("wo", "w", named("Out"));
    let mut rhs = Replacement::default();
    rhs.node("w'", vec![Assignment::literal(attrs::ACTIVE, true)])
        .port("wi'", "w'", vec![])
        .port("wo'", "w'", vec![]);
    RuleParts::new(name, lhs, rhs)
        .bridge("wi", "wi'")
        .bridge("wo", "wo'")
        .build()
        .expect("built-in activation rule is valid")
}

/// `IC trial d2s`, `IC trial s2d`, `IC activate`.
pub fn ic_rules() -> Vec<RewriteRule> {
    vec![ic_trial(Orientation::D2s), ic_trial(Orientation::S2d), activate("IC activate")]
}

/// `LT trial s2d`, `LT trial d2s`, `LT activate`.
pub fn lt_rules() -> Vec<RewriteRule> {
    vec![lt_trial(Orientation::S2d), lt_trial(Orientation::D2s), activate("LT activate")]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portgraph::{ElementId, LocatedGraph, PortGraph, PropertyValue, Record};
    use crate::rewrite::{all_matches, apply_rule, FixedDraw};
    use crate::scalar::Tolerance;

    /// `v` (active) `In` to `w` (inactive) `Out`.
    fn pair(p_i2o: f64, lt: bool) -> (LocatedGraph, ElementId, ElementId) {
        let mut g = PortGraph::new();
        let mut node = |active: bool| {
            let mut r = Record::new()
                .with(attrs::ACTIVE, active)
                .with(attrs::VISITED, false)
                .with(attrs::SIGMA, 0.0);
            if lt {
                r = r.with(attrs::THETA, 0.5).with(attrs::JOINT_INFLUENCE, 0.2);
            }
            g.add_node_with_ports(r, &["In", "Out"])
        };
        let (v, vp) = node(true);
        let (w, wp) = node(false);
        let mut e = Record::new()
            .with(attrs::P_I2O, p_i2o)
            .with(attrs::P_O2I, 0.1)
            .with(attrs::MARKED, false);
        if lt {
            e = e.with(attrs::P_PREV_I2O, 0.0).with(attrs::P_PREV_O2I, 0.0);
        }
        g.add_edge(vp[0], wp[1], e).unwrap();
        (LocatedGraph::new(g), v, w)
    }

    fn real(l: &LocatedGraph, id: ElementId, attr: &str) -> f64 {
        l.graph.get_property(id, attr).unwrap().and_then(PropertyValue::as_real).unwrap()
    }

    fn trial(rule: &RewriteRule, l: &LocatedGraph, r: f64) -> LocatedGraph {
        let ms = all_matches(rule, l, Tolerance::default());
        assert_eq!(ms.len(), 1);
        apply_rule(rule, &ms[0], l, &mut FixedDraw::yielding(r)).unwrap().result
    }

    #[test]
    fn ic_trial_sets_sigma_to_probability_over_draw() {
        let rules = ic_rules();
        for (p, r, sigma) in [(0.5, 0.25, 2.0), (0.8, 0.5, 1.6)] {
            let (l, _, w) = pair(p, false);
            assert!(all_matches(&rules[1], &l, Tolerance::default()).is_empty());
            let out = trial(&rules[0], &l, r);
            assert!((real(&out, w, attrs::SIGMA) - sigma).abs() < 1e-12);
            assert_eq!(out.graph.get_property(w, attrs::VISITED).unwrap(), Some(&true.into()));
            let (_, e) = out.graph.edges().next().unwrap();
            assert_eq!(e.record.get(attrs::MARKED), Some(&true.into()));
            assert!(all_matches(&rules[0], &out, Tolerance::default()).is_empty());
        }
    }

    #[test]
    fn lt_trial_accumulates_joint_influence() {
        let rules = lt_rules();
        let (l, _, w) = pair(0.5, true);
        let out = trial(&rules[1], &l, 0.9);
        // 1 - (1 - 0.2)(1 - 0.5) = 0.6, over theta 0.5.
        assert!((real(&out, w, attrs::JOINT_INFLUENCE) - 0.6).abs() < 1e-12);
        assert!((real(&out, w, attrs::SIGMA) - 1.2).abs() < 1e-12);
        let (_, e) = out.graph.edges().next().unwrap();
        assert_eq!(e.record.get(attrs::P_PREV_I2O).and_then(PropertyValue::as_real), Some(0.5));
    }

    #[test]
    fn activation_needs_visit() {
        let rule = &ic_rules()[2];
        let (l, _, w) = pair(0.5, false);
        assert!(all_matches(rule, &l, Tolerance::default()).is_empty());
        let visited = trial(&ic_rules()[0], &l, 0.9);
        let ms = all_matches(rule, &visited, Tolerance::default());
        assert_eq!(ms.len(), 1);
        let out = apply_rule(rule, &ms[0], &visited, &mut FixedDraw(0)).unwrap().result;
        assert_eq!(out.graph.get_property(w, attrs::ACTIVE).unwrap(), Some(&true.into()));
        assert_eq!(out.graph.edge_count(), 1);
    }
}
