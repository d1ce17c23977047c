use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::portgraph::{ElementId, LocatedGraph};
use crate::rewrite::{apply_rule, choose_match, verify_match, ApplyError, Match, MatchError, MatchMode, RewriteRule};
use crate::scalar::Tolerance;
use crate::trace::{DerivationTree, GroupId, StateId, TreeError};

use super::program::{Filter, Instruction, StrategyProgram};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

/// Rules addressable by name.
#[derive(Clone, Debug, Default)]
pub struct RuleLibrary {
    rules: BTreeMap<String, RewriteRule>,
}

impl RuleLibrary {
    /// Later rules replace earlier ones of the same name.
    pub fn new(rules: impl IntoIterator<Item = RewriteRule>) -> Self {
        RuleLibrary {
            rules: rules.into_iter().map(|r| (r.name.clone(), r)).collect(),
        }
    }

    pub fn insert(&mut self, rule: RewriteRule) {
        self.rules.insert(rule.name.clone(), rule);
    }

    pub fn get(&self, name: &str) -> Option<&RewriteRule> {
        self.rules.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn rules(&self) -> impl Iterator<Item = &RewriteRule> {
        self.rules.values()
    }

    pub fn check(&self, program: &StrategyProgram) -> Result<(), StrategyError> {
        match program.rule_names().find(|n| self.get(n).is_none()) {
            Some(n) => Err(StrategyError::UnknownRule(n.to_owned())),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StrategyError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Apply(#[from] ApplyError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub mode: MatchMode,
    pub tol: Tolerance<f64>,
    /// Maximum number of applications over the interpreter's lifetime.
    pub budget: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            mode: MatchMode::Random,
            tol: Tolerance::default(),
            budget: DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "error", rename_all = "kebab-case")]
pub enum Status {
    Completed,
    /// A round that applied nothing; ends `run_rounds`.
    NoProgress,
    Aborted(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AppliedStep {
    pub rule: String,
    pub image: Vec<ElementId>,
    pub parent: StateId,
    pub child: StateId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrategyOutcome {
    pub status: Status,
    pub log: Vec<AppliedStep>,
    /// Last committed state.
    pub final_state: StateId,
    /// Final graph including position/ban changes made after the last commit.
    pub located: LocatedGraph,
    pub group: Option<GroupId>,
}

/// Runs strategy programs against a derivation tree, one branch at a time.
pub struct Interpreter<'a> {
    library: &'a RuleLibrary,
    options: RunOptions,
    applied: u64,
}

struct Run<'t> {
    tree: &'t mut DerivationTree,
    label: String,
    current: LocatedGraph,
    current_id: StateId,
    group: Option<GroupId>,
    log: Vec<AppliedStep>,
}

impl Run<'_> {
    fn commit(&mut self, rule: &RewriteRule, m: &Match, result: LocatedGraph) -> Result<(), TreeError> {
        let group = match self.group {
            Some(g) => g,
            None => {
                let g = self.tree.open_group(self.current_id, &self.label)?;
                self.group = Some(g);
                g
            }
        };
        let child = self
            .tree
            .commit(self.current_id, result.clone(), &rule.name, m.images.clone(), group)?;
        self.log.push(AppliedStep {
            rule: rule.name.clone(),
            image: m.images.clone(),
            parent: self.current_id,
            child,
        });
        self.current = result;
        self.current_id = child;
        Ok(())
    }
}

impl<'a> Interpreter<'a> {
    pub fn new(library: &'a RuleLibrary, options: RunOptions) -> Self {
        Interpreter {
            library,
            options,
            applied: 0,
        }
    }

    pub fn options(&self) -> RunOptions {
        self.options
    }

    /// Applications performed so far.
    pub fn applications(&self) -> u64 {
        self.applied
    }

    /// Tries one application of `rule` on `run.current`; false when nothing matches.
    fn step(&mut self, run: &mut Run<'_>, rule: &RewriteRule, rng: &mut dyn RngCore) -> Result<bool, Status> {
        if self.applied >= self.options.budget {
            return Err(Status::Aborted(format!(
                "step budget of {} applications exceeded",
                self.options.budget
            )));
        }
        run.current.graph.reserve_ids(run.tree.id_floor());
        let Some(m) = choose_match(rule, &run.current, rng, self.options.mode, self.options.tol) else {
            return Ok(false);
        };
        let app = apply_rule(rule, &m, &run.current, rng).map_err(|e| Status::Aborted(e.to_string()))?;
        run.commit(rule, &m, app.result).map_err(|e| Status::Aborted(e.to_string()))?;
        self.applied += 1;
        Ok(true)
    }

    /// Executes `program` once from state `from`, starting from the graph `start`
    /// (normally that state, possibly with a different position or ban).
    ///
    /// All applications form one propagation step of the tree. A run that
    /// applies nothing leaves the tree untouched.
    pub fn run_strategy(
        &mut self,
        program: &StrategyProgram,
        tree: &mut DerivationTree,
        from: StateId,
        start: LocatedGraph,
        rng: &mut dyn RngCore,
    ) -> Result<StrategyOutcome, StrategyError> {
        self.run_in_group(program, tree, from, start, None, rng)
    }

    /// As `run_strategy`, but continuing the open `group` (which must end at `from`) when given.
    pub fn run_in_group(
        &mut self,
        program: &StrategyProgram,
        tree: &mut DerivationTree,
        from: StateId,
        start: LocatedGraph,
        group: Option<GroupId>,
        rng: &mut dyn RngCore,
    ) -> Result<StrategyOutcome, StrategyError> {
        self.library.check(program)?;
        tree.state(from)?;
        let mut run = Run {
            tree,
            label: "strategy".to_owned(),
            current: start,
            current_id: from,
            group,
            log: Vec::new(),
        };
        let mut status = Status::Completed;
        'program: for instr in &program.instructions {
            match instr {
                Instruction::SetPos(f) => run.current.position = f.select(&run.current.graph, self.options.tol),
                Instruction::SetBan(f) => run.current.banned = f.select(&run.current.graph, self.options.tol),
                Instruction::ApplyOnce(name) => {
                    let rule = self.library.get(name).expect("checked");
                    if let Err(s) = self.step(&mut run, rule, rng) {
                        status = s;
                        break 'program;
                    }
                }
                Instruction::Repeat(name) => {
                    let rule = self.library.get(name).expect("checked");
                    loop {
                        match self.step(&mut run, rule, rng) {
                            Ok(true) => {}
                            Ok(false) => break,
                            Err(s) => {
                                status = s;
                                break 'program;
                            }
                        }
                    }
                }
            }
        }
        if let Some(g) = run.group {
            run.tree.close_group(g, status == Status::Completed)?;
        }
        Ok(StrategyOutcome {
            status,
            log: run.log,
            final_state: run.current_id,
            located: run.current,
            group: run.group,
        })
    }

    /// One propagation round from `from`: the position is reset to the whole graph first.
    pub fn run_round(
        &mut self,
        program: &StrategyProgram,
        tree: &mut DerivationTree,
        from: StateId,
        rng: &mut dyn RngCore,
    ) -> Result<StrategyOutcome, StrategyError> {
        let mut start = tree.state(from)?.clone();
        start.focus_whole_graph();
        let mut out = self.run_strategy(program, tree, from, start, rng)?;
        if out.log.is_empty() && out.status == Status::Completed {
            out.status = Status::NoProgress;
        }
        Ok(out)
    }

    /// Rounds until one applies nothing, one aborts, or `max_rounds` have run.
    pub fn run_rounds(
        &mut self,
        program: &StrategyProgram,
        tree: &mut DerivationTree,
        from: StateId,
        rng: &mut dyn RngCore,
        max_rounds: usize,
    ) -> Result<Vec<StrategyOutcome>, StrategyError> {
        let mut outcomes = Vec::new();
        let mut cur = from;
        for _ in 0..max_rounds {
            let out = self.run_round(program, tree, cur, rng)?;
            let stop = out.status != Status::Completed;
            cur = out.final_state;
            outcomes.push(out);
            if stop {
                break;
            }
        }
        Ok(outcomes)
    }

    /// Applies `rule` once at state `from`, at `images` when given, else at a
    /// match chosen by the run mode. The application forms its own step.
    pub fn apply_at(
        &mut self,
        rule: &str,
        tree: &mut DerivationTree,
        from: StateId,
        images: Option<&[ElementId]>,
        rng: &mut dyn RngCore,
    ) -> Result<Option<AppliedStep>, StrategyError> {
        let rule = self.library.get(rule).ok_or_else(|| StrategyError::UnknownRule(rule.to_owned()))?;
        let mut located = tree.state(from)?.clone();
        located.graph.reserve_ids(tree.id_floor());
        let m = match images {
            Some(ids) => verify_match(rule, &located, ids, self.options.tol)?,
            None => match choose_match(rule, &located, rng, self.options.mode, self.options.tol) {
                Some(m) => m,
                None => return Ok(None),
            },
        };
        let app = apply_rule(rule, &m, &located, rng)?;
        let group = tree.open_group(from, "apply")?;
        let child = tree.commit(from, app.result, &rule.name, m.images.clone(), group)?;
        tree.close_group(group, true)?;
        self.applied += 1;
        Ok(Some(AppliedStep {
            rule: rule.name.clone(),
            image: m.images,
            parent: from,
            child,
        }))
    }
}

/// Commits a copy of state `from` whose position (or ban, when `ban`) is the filter's selection.
pub fn commit_selection(
    tree: &mut DerivationTree,
    from: StateId,
    filter: &Filter,
    ban: bool,
    tol: Tolerance<f64>,
) -> Result<StateId, TreeError> {
    let mut located = tree.state(from)?.clone();
    let sel = filter.select(&located.graph, tol);
    let label = if ban { "setBan" } else { "setPos" };
    if ban {
        located.banned = sel;
    } else {
        located.position = sel;
    }
    let group = tree.open_group(from, label)?;
    let id = tree.commit(from, located, label, Vec::new(), group)?;
    tree.close_group(group, true)?;
    Ok(id)
}
