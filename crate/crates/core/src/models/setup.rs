use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::portgraph::{ElementId, GraphError, LocatedGraph, PortGraph, PropertyValue, PORT_NAME};

use super::attrs;
use super::config::{ConfigError, Distribution, ModelConfig, ModelKind};

#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error("seed `{0}` matches no node")]
    UnknownSeed(String),
    #[error("no value for element {elem} in {path}")]
    MissingValue { elem: ElementId, path: String },
    #[error("edge {0} carries no p_i2o/p_o2i and no probability distribution was given")]
    MissingProbability(ElementId),
    #[error("edge {edge}: {attr} = {value} is outside [0, 1]")]
    OutOfRange { edge: ElementId, attr: &'static str, value: f64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Node ids of `seeds`, looked up by `name` property first, then as numeric ids.
pub fn resolve_seeds(graph: &PortGraph, seeds: &[String]) -> Result<BTreeSet<ElementId>, SetupError> {
    let by_name: BTreeMap<&str, ElementId> = graph
        .nodes()
        .filter_map(|(id, n)| n.record.get(PORT_NAME).and_then(PropertyValue::as_text).map(|s| (s, id)))
        .collect();
    seeds
        .iter()
        .map(|s| {
            by_name
                .get(s.as_str())
                .copied()
                .or_else(|| s.parse().ok().map(ElementId).filter(|id| graph.node(*id).is_some()))
                .ok_or_else(|| SetupError::UnknownSeed(s.clone()))
        })
        .collect()
}

fn table_value(
    table: &BTreeMap<ElementId, Vec<f64>>,
    id: ElementId,
    col: usize,
    path: &std::path::Path,
) -> Result<f64, SetupError> {
    table
        .get(&id)
        .and_then(|v| v.get(col).or(v.first()))
        .copied()
        .ok_or_else(|| SetupError::MissingValue {
            elem: id,
            path: path.display().to_string(),
        })
}

struct Source {
    dist: Distribution,
    table: Option<BTreeMap<ElementId, Vec<f64>>>,
}

impl Source {
    fn new(dist: &Distribution) -> Result<Self, SetupError> {
        let table = match dist {
            Distribution::File(p) => Some(Distribution::load_table(p)?),
            _ => None,
        };
        Ok(Source {
            dist: dist.clone(),
            table,
        })
    }

    fn draw(&self, id: ElementId, col: usize, rng: &mut impl Rng) -> Result<f64, SetupError> {
        match (&self.table, &self.dist) {
            (Some(t), Distribution::File(p)) => table_value(t, id, col, p),
            _ => Ok(self.dist.sample(rng).expect("non-file distribution")),
        }
    }
}

/// Materialises the propagation attributes on every element and focuses the whole graph.
///
/// Values are drawn in id order: `p_i2o`, `p_o2i` per edge, then thresholds per node,
/// so both models set up from one seed share their probabilities.
pub fn setup_simulation(graph: &PortGraph, cfg: &ModelConfig, rng: &mut impl Rng) -> Result<LocatedGraph, SetupError> {
    cfg.validate()?;
    let seeds = resolve_seeds(graph, &cfg.seeds)?;
    let theta = cfg.theta.as_ref().map(Source::new).transpose()?;
    let prob = cfg.probability.as_ref().map(Source::new).transpose()?;
    let lt = cfg.model == ModelKind::Lt;
    let mut g = graph.clone();

    for (id, edge) in graph.edges() {
        let (pi, po) = match &prob {
            Some(src) => (src.draw(id, 0, rng)?, src.draw(id, 1, rng)?),
            None => {
                let get = |a| edge.record.get(a).and_then(PropertyValue::as_real);
                match (get(attrs::P_I2O), get(attrs::P_O2I)) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(SetupError::MissingProbability(id)),
                }
            }
        };
        for (attr, value) in [(attrs::P_I2O, pi), (attrs::P_O2I, po)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SetupError::OutOfRange { edge: id, attr, value });
            }
            g.set_property(id, attr, value.into())?;
        }
        g.set_property(id, attrs::MARKED, false.into())?;
        if lt {
            g.set_property(id, attrs::P_PREV_I2O, 0.0.into())?;
            g.set_property(id, attrs::P_PREV_O2I, 0.0.into())?;
        }
    }
    for id in graph.node_ids() {
        let active = seeds.contains(&id);
        g.set_property(id, attrs::ACTIVE, active.into())?;
        g.set_property(id, attrs::VISITED, false.into())?;
        g.set_property(id, attrs::SIGMA, 0.0.into())?;
        if lt {
            let t = theta.as_ref().expect("validated").draw(id, 0, rng)?;
            g.set_property(id, attrs::THETA, t.into())?;
            g.set_property(id, attrs::JOINT_INFLUENCE, 0.0.into())?;
        }
    }
    Ok(LocatedGraph::new(g))
}

/// New per-edge probabilities `(p_i2o, p_o2i)`. Edges whose values change are
/// unmarked so the next round tries them again; returns the changed edges.
pub fn reload_probabilities(
    located: &LocatedGraph,
    table: &BTreeMap<ElementId, Vec<f64>>,
) -> Result<(LocatedGraph, Vec<ElementId>), SetupError> {
    let mut next = located.clone();
    let mut changed = Vec::new();
    for (&id, values) in table {
        let Some(edge) = located.graph.edge(id) else {
            return Err(GraphError::UnknownElement(id).into());
        };
        let pi = values.first().copied().unwrap_or(0.0);
        let po = values.get(1).copied().unwrap_or(pi);
        let old = |a| edge.record.get(a).and_then(PropertyValue::as_real);
        if old(attrs::P_I2O) == Some(pi) && old(attrs::P_O2I) == Some(po) {
            continue;
        }
        next.graph.set_property(id, attrs::P_I2O, pi.into())?;
        next.graph.set_property(id, attrs::P_O2I, po.into())?;
        next.graph.set_property(id, attrs::MARKED, false.into())?;
        changed.push(id);
    }
    Ok((next, changed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portgraph::Record;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path3() -> PortGraph {
        let mut g = PortGraph::new();
        let ids: Vec<_> = (1..=3)
            .map(|i| g.add_node_with_ports(Record::new().with("name", format!("n{i}")), &["In", "Out"]))
            .collect();
        g.add_edge(ids[0].1[0], ids[1].1[1], Record::new()).unwrap();
        g.add_edge(ids[1].1[0], ids[2].1[1], Record::new()).unwrap();
        g
    }

    fn cfg() -> ModelConfig {
        let mut c = ModelConfig::new(ModelKind::Ic, vec!["n1".into()]);
        c.probability = Some(Distribution::Const(0.5));
        c
    }

    #[test]
    fn one_seed_one_active() {
        let l = setup_simulation(&path3(), &cfg(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let active = l
            .graph
            .nodes()
            .filter(|(_, n)| n.record.get("active") == Some(&true.into()))
            .count();
        assert_eq!(active, 1);
        for (_, e) in l.graph.edges() {
            assert_eq!(e.record.get("p_i2o"), Some(&0.5.into()));
            assert_eq!(e.record.get("p_o2i"), Some(&0.5.into()));
        }
        assert_eq!(l.position.len(), l.graph.element_ids().count());
    }

    #[test]
    fn uniform_draws_reproduce() {
        let mut c = cfg();
        c.model = ModelKind::Lt;
        c.probability = Some(Distribution::Uniform { lo: 0.0, hi: 1.0 });
        c.theta = Some(Distribution::Uniform { lo: 0.0, hi: 1.0 });
        let a = setup_simulation(&path3(), &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = setup_simulation(&path3(), &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let c2 = setup_simulation(&path3(), &c, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
        assert_ne!(a, c2);
    }

    #[test]
    fn seeds_by_name_or_id() {
        let g = path3();
        assert_eq!(resolve_seeds(&g, &["n2".into()]).unwrap().len(), 1);
        let first = g.node_ids().next().unwrap();
        assert!(resolve_seeds(&g, &[first.0.to_string()]).unwrap().contains(&first));
        assert!(matches!(resolve_seeds(&g, &["zz".into()]), Err(SetupError::UnknownSeed(_))));
    }

    #[test]
    fn reload_unmarks_changed_edges() {
        let l = setup_simulation(&path3(), &cfg(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let mut l2 = l.clone();
        let edges: Vec<_> = l.graph.edges().map(|(id, _)| id).collect();
        for &e in &edges {
            l2.graph.set_property(e, "marked", true.into()).unwrap();
        }
        let table = BTreeMap::from([(edges[0], vec![0.5, 0.5]), (edges[1], vec![0.9, 0.1])]);
        let (next, changed) = reload_probabilities(&l2, &table).unwrap();
        assert_eq!(changed, vec![edges[1]]);
        assert_eq!(next.graph.get_property(edges[1], "marked").unwrap(), Some(&false.into()));
        assert_eq!(next.graph.get_property(edges[0], "marked").unwrap(), Some(&true.into()));
    }
}
