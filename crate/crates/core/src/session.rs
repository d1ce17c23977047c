//! A simulation bundled with everything needed to resume it: configuration,
//! rules, strategy, derivation tree, cursor and random generator state.

use std::path::PathBuf;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::models::{reload_probabilities, setup_simulation, ConfigError, Distribution, ModelConfig, SetupError};
use crate::portgraph::{ElementId, LocatedGraph, PortGraph};
use crate::rewrite::{parse_rules, serialize_rules, RewriteRule, RuleFileError};
use crate::strategy::{
    commit_selection, AppliedStep, Filter, Interpreter, RuleLibrary, RunOptions, Status, StrategyError,
    StrategyOutcome, StrategyParseError, StrategyProgram,
};
use crate::trace::{DerivationTree, ExportFormat, MetricSeries, PersistError, StateId, TreeDocument, TreeError};
use crate::SimRng;

pub const RELOAD_RULE: &str = "reloadProbabilities";

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error("strategy: {0}")]
    Parse(#[from] StrategyParseError),
    #[error(transparent)]
    Rules(#[from] RuleFileError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Persist(#[from] PersistError),
}

pub struct Simulation {
    pub config: ModelConfig,
    pub library: RuleLibrary,
    pub program: StrategyProgram,
    pub tree: DerivationTree,
    /// State the next round starts from.
    pub cursor: StateId,
    pub rng: SimRng,
    /// Probability table reread before every round.
    pub reload: Option<PathBuf>,
}

/// Saved form of a [`Simulation`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionDocument {
    pub config: ModelConfig,
    pub strategy: String,
    pub rules: Box<RawValue>,
    pub tree: TreeDocument,
    pub cursor: StateId,
    pub rng: SimRng,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reload: Option<PathBuf>,
}

impl Simulation {
    /// Sets up `graph` for the configured model; setup draws and later matches share one generator seeded from the config.
    pub fn new(graph: &PortGraph, config: ModelConfig) -> Result<Self, SimulationError> {
        let mut rng = SimRng::seed_from_u64(config.rng_seed);
        let located = setup_simulation(graph, &config, &mut rng)?;
        Ok(Self::from_located(located, config, rng))
    }

    /// Starts from an already set-up graph with the model's built-in rules and strategy.
    pub fn from_located(located: LocatedGraph, config: ModelConfig, rng: SimRng) -> Self {
        let library = RuleLibrary::new(config.model.rules());
        let program = StrategyProgram::parse(&config.model.strategy_text(config.strict_sigma))
            .expect("built-in strategy parses");
        let tree = DerivationTree::new(located);
        let cursor = tree.root();
        Simulation {
            config,
            library,
            program,
            tree,
            cursor,
            rng,
            reload: None,
        }
    }

    /// Adds `rules` (replacing same-named ones) and switches to `program`.
    pub fn customize(&mut self, rules: Vec<RewriteRule>, program: StrategyProgram) -> Result<(), StrategyError> {
        for r in rules {
            self.library.insert(r);
        }
        self.library.check(&program)?;
        self.program = program;
        Ok(())
    }

    pub fn options(&self) -> RunOptions {
        RunOptions {
            mode: self.config.mode,
            ..RunOptions::default()
        }
    }

    pub fn current(&self) -> &LocatedGraph {
        self.tree.state(self.cursor).expect("cursor names a state")
    }

    /// Moves the cursor to `state`; the next round branches from there.
    pub fn branch(&mut self, state: StateId) -> Result<(), TreeError> {
        self.tree.state(state)?;
        self.cursor = state;
        Ok(())
    }

    /// One propagation round from the cursor, preceded by the probability reload if one is set.
    pub fn step(&mut self) -> Result<StrategyOutcome, SimulationError> {
        let options = self.options();
        let mut interp = Interpreter::new(&self.library, options);
        let mut start = self.tree.state(self.cursor)?.clone();
        let mut from = self.cursor;
        let mut group = None;
        if let Some(path) = &self.reload {
            let table = Distribution::load_table(path)?;
            let (next, changed) = reload_probabilities(&start, &table)?;
            if !changed.is_empty() {
                let g = self.tree.open_group(from, "round")?;
                from = self.tree.commit(from, next.clone(), RELOAD_RULE, changed, g)?;
                start = next;
                group = Some(g);
            }
        }
        start.focus_whole_graph();
        let mut out = interp.run_in_group(&self.program, &mut self.tree, from, start, group, &mut self.rng)?;
        if out.log.is_empty() && out.status == Status::Completed {
            out.status = Status::NoProgress;
        }
        self.cursor = out.final_state;
        Ok(out)
    }

    /// Rounds until one applies nothing or aborts, at most `max_rounds`.
    pub fn run_rounds(&mut self, max_rounds: usize) -> Result<Vec<StrategyOutcome>, SimulationError> {
        let mut outcomes = Vec::new();
        for _ in 0..max_rounds {
            let out = self.step()?;
            let stop = out.status != Status::Completed;
            outcomes.push(out);
            if stop {
                break;
            }
        }
        Ok(outcomes)
    }

    /// Rounds up to the configured maximum.
    pub fn run(&mut self) -> Result<Vec<StrategyOutcome>, SimulationError> {
        self.run_rounds(self.config.max_rounds)
    }

    /// One application of `rule` at the cursor; `images` pins the match.
    pub fn apply(&mut self, rule: &str, images: Option<&[ElementId]>) -> Result<Option<AppliedStep>, StrategyError> {
        let mut interp = Interpreter::new(&self.library, self.options());
        let step = interp.apply_at(rule, &mut self.tree, self.cursor, images, &mut self.rng)?;
        if let Some(s) = &step {
            self.cursor = s.child;
        }
        Ok(step)
    }

    /// Commits a state at the cursor whose position (or ban) is the filter's selection.
    pub fn select(&mut self, filter: &Filter, ban: bool) -> Result<StateId, TreeError> {
        let tol = self.options().tol;
        self.cursor = commit_selection(&mut self.tree, self.cursor, filter, ban, tol)?;
        Ok(self.cursor)
    }

    pub fn metrics(&self, leaf: Option<StateId>) -> Result<MetricSeries, TreeError> {
        self.tree.compute_metrics(leaf.unwrap_or(self.cursor), self.config.model.label())
    }

    pub fn export(&self, format: ExportFormat) -> Result<Vec<u8>, TreeError> {
        self.tree.export(self.cursor, format, self.config.model.label())
    }

    pub fn to_document(&self) -> Result<SessionDocument, SimulationError> {
        let rules: Vec<RewriteRule> = self.library.rules().cloned().collect();
        Ok(SessionDocument {
            config: self.config.clone(),
            strategy: self.program.to_string(),
            rules: RawValue::from_string(
                String::from_utf8(serialize_rules(&rules)).expect("rules are UTF-8").trim_end().to_owned(),
            )
            .expect("rules encode as JSON"),
            tree: self.tree.to_document()?,
            cursor: self.cursor,
            rng: self.rng.clone(),
            reload: self.reload.clone(),
        })
    }

    pub fn from_document(doc: SessionDocument) -> Result<Self, SimulationError> {
        let rules = parse_rules(doc.rules.get().as_bytes())?;
        let library = RuleLibrary::new(rules);
        let program = StrategyProgram::parse(&doc.strategy)?;
        library.check(&program)?;
        let tree = DerivationTree::from_document(&doc.tree)?;
        tree.state(doc.cursor)?;
        Ok(Simulation {
            config: doc.config,
            library,
            program,
            tree,
            cursor: doc.cursor,
            rng: doc.rng,
            reload: doc.reload,
        })
    }

    pub fn save_json(&self) -> Result<Vec<u8>, SimulationError> {
        let mut out = serde_json::to_vec_pretty(&self.to_document()?).expect("session encodes");
        out.push(b'\n');
        Ok(out)
    }

    pub fn load_json(bytes: &[u8]) -> Result<Self, SimulationError> {
        let doc: SessionDocument = serde_json::from_slice(bytes)
            .map_err(|e| PersistError::Malformed(format!("line {} column {}: {e}", e.line(), e.column())))?;
        Self::from_document(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{attrs, ModelKind};
    use crate::portgraph::Record;

    fn star() -> PortGraph {
        let mut g = PortGraph::new();
        let (_, c) = g.add_node_with_ports(Record::new().with("name", "c"), &["In", "Out"]);
        for i in 0..3 {
            let (_, l) = g.add_node_with_ports(Record::new().with("name", format!("l{i}")), &["In", "Out"]);
            g.add_edge(c[0], l[1], Record::new()).unwrap();
        }
        g
    }

    fn ic(seed: u64) -> ModelConfig {
        let mut cfg = ModelConfig::new(ModelKind::Ic, vec!["c".into()]);
        cfg.probability = Some(Distribution::Const(1.0));
        cfg.rng_seed = seed;
        cfg
    }

    #[test]
    fn star_round() {
        let mut sim = Simulation::new(&star(), ic(3)).unwrap();
        let outs = sim.run().unwrap();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].log.len(), 6);
        assert_eq!(outs[1].status, Status::NoProgress);
        let m = sim.metrics(None).unwrap();
        assert_eq!(m.active(), vec![1, 4]);
        assert_eq!(m.visited(), vec![0, 3]);
    }

    #[test]
    fn saved_session_resumes_identically() {
        let mut a = Simulation::new(&star(), ic(9)).unwrap();
        a.config.probability = Some(Distribution::Const(0.5));
        a.step().unwrap();
        let mut b = Simulation::load_json(&a.save_json().unwrap()).unwrap();
        assert_eq!(b.save_json().unwrap(), a.save_json().unwrap());
        a.step().unwrap();
        b.step().unwrap();
        assert_eq!(a.export(ExportFormat::JsonlEvents).unwrap(), b.export(ExportFormat::JsonlEvents).unwrap());
    }

    #[test]
    fn reload_joins_the_round() {
        let mut g = star();
        let edges: Vec<ElementId> = g.edges().map(|(id, _)| id).collect();
        for &e in &edges {
            g.set_property(e, attrs::P_I2O, 0.0.into()).unwrap();
            g.set_property(e, attrs::P_O2I, 0.0.into()).unwrap();
        }
        let mut cfg = ic(1);
        cfg.probability = None;
        let mut sim = Simulation::new(&g, cfg).unwrap();
        sim.step().unwrap();
        assert_eq!(sim.metrics(None).unwrap().active(), vec![1, 1]);
        let dir = std::env::temp_dir().join(format!("porgysim-reload-{}", std::process::id()));
        std::fs::write(&dir, format!("{} 1.0 1.0\n", edges[0])).unwrap();
        sim.reload = Some(dir.clone());
        let out = sim.step().unwrap();
        std::fs::remove_file(&dir).unwrap();
        // The reloaded edge is tried again (one trial, one activation) within the same step.
        assert_eq!(out.log.len(), 2);
        let m = sim.metrics(None).unwrap();
        assert_eq!(m.active(), vec![1, 1, 2]);
    }
}
