mod common;

use common::*;
use porgysim_core::influence64::{add_influence, joint_influence, remove_influence, replace_influence};
use porgysim_core::models::{attrs, ic_rules, lt_rules};
use porgysim_core::portgraph::{deserialize_graph, serialize_located, ElementId, ElementKind, LocatedGraph};
use porgysim_core::rewrite::{all_matches, apply_rule, Comparator, PropertyPredicate};
use porgysim_core::strategy::{Filter, StrategyProgram};
use porgysim_core::trace::DerivationTree;
use porgysim_core::{SimRng, Tolerance};
use proptest::prelude::*;
use rand::SeedableRng;

#[derive(Clone, Debug)]
enum Op {
    Add(f64),
    Remove(usize),
    Replace(usize, f64),
}

fn ops() -> impl Strategy<Value = (Vec<f64>, Vec<Op>)> {
    let p = 0.0..0.99f64;
    (
        prop::collection::vec(p.clone(), 0..10),
        prop::collection::vec(
            prop_oneof![
                p.clone().prop_map(Op::Add),
                any::<usize>().prop_map(Op::Remove),
                (any::<usize>(), p).prop_map(|(i, x)| Op::Replace(i, x)),
            ],
            0..20,
        ),
    )
}

/// Random simple graph over `n` named nodes with edge pairs, seeds and probabilities.
fn host() -> impl Strategy<Value = (String, Vec<bool>)> {
    (2usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec((0..n, 0..n, 0.0..1.0f64, 0.0..1.0f64), 0..12),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_map(move |(edges, active)| {
                let mut text: String = (0..n).map(|i| format!("n{i} n{i}\n")).collect();
                for (a, b, p, q) in edges {
                    text.push_str(&format!("n{a} n{b} {p} {q}\n"));
                }
                (text, active)
            })
    })
}

/// Self-loop lines in `text` only materialise isolated nodes.
fn prepared(text: &str, active: &[bool]) -> LocatedGraph {
    let imported = graph(text);
    let mut l = LocatedGraph::new(imported);
    let ids: Vec<ElementId> = l.graph.node_ids().collect();
    for (i, id) in ids.into_iter().enumerate() {
        let a = active.get(i).copied().unwrap_or(false);
        for (k, v) in [(attrs::ACTIVE, a), (attrs::VISITED, false)] {
            l.graph.set_property(id, k, v.into()).unwrap();
        }
        l.graph.set_property(id, attrs::SIGMA, 0.0.into()).unwrap();
        l.graph.set_property(id, attrs::THETA, 0.5.into()).unwrap();
        l.graph.set_property(id, attrs::JOINT_INFLUENCE, 0.0.into()).unwrap();
    }
    let edges: Vec<ElementId> = l.graph.edges().map(|(id, _)| id).collect();
    for e in edges {
        l.graph.set_property(e, attrs::MARKED, false.into()).unwrap();
        l.graph.set_property(e, attrs::P_PREV_I2O, 0.0.into()).unwrap();
        l.graph.set_property(e, attrs::P_PREV_O2I, 0.0.into()).unwrap();
    }
    l
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn incremental_influence_tracks_recomputation((start, ops) in ops()) {
        let mut set = start.clone();
        let mut ps = joint_influence(set.iter().copied());
        for op in ops {
            match op {
                Op::Add(p) => {
                    ps = add_influence(ps, p);
                    set.push(p);
                }
                Op::Remove(i) if !set.is_empty() => {
                    let p = set.remove(i % set.len());
                    ps = remove_influence(ps, p).unwrap();
                }
                Op::Replace(i, p) if !set.is_empty() => {
                    let k = i % set.len();
                    ps = replace_influence(ps, set[k], p).unwrap();
                    set[k] = p;
                }
                _ => {}
            }
            let exact = 1.0 - set.iter().map(|p| 1.0 - p).product::<f64>();
            prop_assert!((ps - exact).abs() <= 1e-9, "{ps} vs {exact}");
        }
    }

    #[test]
    fn f32_influence_stays_close(ps in prop::collection::vec(0.0..0.9f32, 0..8), extra in 0.0..0.9f32) {
        let joint: f32 = porgysim_core::models::joint_influence(ps.iter().copied());
        let added = porgysim_core::models::add_influence(joint, extra);
        let back = porgysim_core::models::remove_influence(added, extra).unwrap();
        prop_assert!((back - joint).abs() < 1e-4);
    }

    #[test]
    fn rewriting_keeps_graphs_valid_and_local((text, active) in host(), seed in any::<u64>()) {
        let l = prepared(&text, &active);
        let mut rng = SimRng::seed_from_u64(seed);
        for rule in ic_rules().iter().chain(lt_rules().iter()) {
            for m in all_matches(rule, &l, Tolerance::default()) {
                let app = apply_rule(rule, &m, &l, &mut rng).unwrap();
                let out = &app.result;
                out.validate().unwrap();
                out.graph.validate().unwrap();
                // Outside the image every element survives with its record.
                for id in l.graph.element_ids().filter(|id| !m.images.contains(id)) {
                    prop_assert_eq!(out.graph.record(id), l.graph.record(id));
                }
                for id in out.graph.element_ids() {
                    prop_assert!(l.graph.contains(id), "trial and activation rules create nothing");
                }
            }
        }
    }

    #[test]
    fn set_pos_is_idempotent((text, active) in host(), threshold in 0.0..2.0f64, sigmas in prop::collection::vec(0.0..2.0f64, 8)) {
        let mut l = prepared(&text, &active);
        let ids: Vec<ElementId> = l.graph.node_ids().collect();
        for (id, s) in ids.iter().zip(sigmas) {
            l.graph.set_property(*id, attrs::SIGMA, s.into()).unwrap();
        }
        let f = Filter { kind: ElementKind::Node, predicate: PropertyPredicate::new(attrs::SIGMA, Comparator::Ge, threshold) };
        let once = f.select(&l.graph, Tolerance::default());
        l.position = once.clone();
        prop_assert_eq!(f.select(&l.graph, Tolerance::default()), once);
    }

    #[test]
    fn saved_trees_replay((text, active) in host(), seed in any::<u64>()) {
        let l = prepared(&text, &active);
        for id in l.graph.edges().map(|(id, _)| id).collect::<Vec<_>>() {
            prop_assert!(l.graph.record(id).unwrap().contains(attrs::P_I2O));
        }
        let mut sim = porgysim_core::session::Simulation::from_located(
            l, ic_config(&["n0"], 0.5, seed), SimRng::seed_from_u64(seed));
        sim.run().unwrap();
        let doc = sim.tree.to_document().unwrap();
        let back = DerivationTree::from_document(&doc).unwrap();
        prop_assert_eq!(back.len(), sim.tree.len());
        for s in sim.tree.state_ids() {
            prop_assert_eq!(back.state(s).unwrap(), sim.tree.state(s).unwrap());
        }
        prop_assert_eq!(back.id_floor(), sim.tree.id_floor());
    }

    #[test]
    fn graph_documents_round_trip((text, active) in host()) {
        let l = prepared(&text, &active);
        let bytes = serialize_located(&l).unwrap();
        prop_assert_eq!(deserialize_graph(&bytes).unwrap().into_located(), l);
    }

    #[test]
    fn strategy_print_parse_round_trip(names in prop::collection::vec("[A-Za-z][A-Za-z0-9 _]{0,10}[A-Za-z0-9]", 1..5), t in 0.0..3.0f64) {
        let mut text = String::new();
        for (i, n) in names.iter().enumerate() {
            text.push_str(if i % 2 == 0 { "repeat(" } else { "one(" });
            text.push_str(n);
            text.push_str(");\n");
        }
        text.push_str(&format!("setPos(Property(CrtGraph,Node,sigma>=\"{t}\"))"));
        let p = StrategyProgram::parse(&text).unwrap();
        let printed = p.to_string();
        let again = StrategyProgram::parse(&printed).unwrap();
        prop_assert_eq!(&again, &p);
        prop_assert_eq!(again.to_string(), printed);
    }
}
