//! Subcommands of the `porgysim` binary.

use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use porgysim_core::models::{ConfigFile, Distribution, ModelKind, PartialConfig};
use porgysim_core::netgen::{generate, import_edge_list, Attachment, GeneratorConfig};
use porgysim_core::portgraph::{deserialize_graph, serialize_graph, PortGraph};
use porgysim_core::rewrite::{parse_rules, MatchMode, RewriteRule};
use porgysim_core::session::Simulation;
use porgysim_core::strategy::{RuleLibrary, StrategyProgram};
use porgysim_core::trace::{compare_table, ExportFormat, MetricSeries, StateId};

use crate::error::CliError;

pub const DEFAULT_ADDR: &str = "127.0.0.1:7878";

#[derive(Debug, Parser)]
#[command(name = "porgysim", version, about = "Influence propagation on port graphs by strategic rewriting")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random social network (or convert an edge list) to graph JSON.
    Generate(GenerateArgs),
    /// Set up a simulation, run propagation rounds and export the trace.
    Run(RunArgs),
    /// Advance a saved session by propagation rounds.
    Step(StepArgs),
    /// Recompute the metric series of a saved session.
    Metrics(MetricsArgs),
    /// Side-by-side active counts of two traces.
    Compare(CompareArgs),
    /// Check graph, rule and strategy files.
    Validate(ValidateArgs),
    /// Serve the HTTP/WebSocket API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 300)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub edges_per_node: usize,
    #[arg(long, default_value = "preferential")]
    pub attachment: Attachment,
    #[arg(long, default_value_t = 0.0)]
    pub triad: f64,
    #[arg(long, default_value_t = 0)]
    pub rng: u64,
    /// Convert this edge list instead of generating.
    #[arg(long, value_name = "FILE")]
    pub import: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// TOML or JSON file with `[model]`, `[init]` and `[rng]` sections; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Seed nodes by name or element id.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<String>>,
    /// Edge probabilities: `const:x`, `uniform:lo,hi` or `file:path`.
    #[arg(long = "p")]
    pub probability: Option<Distribution>,
    /// Node thresholds (LT only), same forms as `--p`.
    #[arg(long)]
    pub theta: Option<Distribution>,
    #[arg(long)]
    pub rng: Option<u64>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub mode: Option<MatchMode>,
    /// Activate on `sigma > 1` instead of `sigma >= 1`.
    #[arg(long)]
    pub strict_sigma: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Graph JSON or edge list.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Extra rule file; rules replace built-in ones of the same name.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Strategy file replacing the model's strategy.
    #[arg(long)]
    pub strategy: Option<PathBuf>,
    /// Probability table (`edge-id p_i2o [p_o2i]` lines) reread before every round.
    #[arg(long, value_name = "FILE")]
    pub p_reload: Option<PathBuf>,
    /// Directory receiving metrics.csv, events.jsonl, tree.dot and session.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StepArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Continue from this state instead of the saved cursor.
    #[arg(long)]
    pub from: Option<u64>,
    /// Write exports and the updated session here instead of overwriting the session file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long)]
    pub leaf: Option<u64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// metrics.csv or session.json.
    pub first: PathBuf,
    pub second: PathBuf,
    /// Two comma-separated column labels.
    #[arg(long, value_delimiter = ',')]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub rules: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "PORGYSIM_ADDR", default_value = DEFAULT_ADDR)]
    pub addr: SocketAddr,
    /// Snapshot sessions to this directory after every change.
    #[arg(long)]
    pub persist: Option<PathBuf>,
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Graph JSON when the file starts with `{`, edge list otherwise.
pub fn load_graph(path: &Path) -> Result<PortGraph, CliError> {
    let bytes = read(path)?;
    let located = bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{');
    let with_path = |e: CliError| CliError::new(e.code, format!("{}: {}", path.display(), e.message));
    if located {
        Ok(deserialize_graph(&bytes).map_err(|e| with_path(e.into()))?.graph().clone())
    } else {
        import_edge_list(&bytes).map_err(|e| with_path(e.into()))
    }
}

fn load_rules(path: &Path) -> Result<Vec<RewriteRule>, CliError> {
    parse_rules(&read(path)?).map_err(|e| CliError::new("rules", format!("{}: {e}", path.display())))
}

fn load_strategy(path: &Path) -> Result<StrategyProgram, CliError> {
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| CliError::new("strategy", format!("{}: not UTF-8", path.display())))?;
    StrategyProgram::parse(&text).map_err(|e| CliError::new("strategy", format!("{}: {e}", path.display())))
}

fn load_session(path: &Path) -> Result<Simulation, CliError> {
    Simulation::load_json(&read(path)?).map_err(|e| {
        let e = CliError::from(e);
        CliError::new(e.code, format!("{}: {}", path.display(), e.message))
    })
}

fn partial_config(args: &ModelArgs) -> Result<PartialConfig, CliError> {
    let mut partial = PartialConfig {
        model: args.model,
        seeds: args.seeds.clone(),
        probability: args.probability.clone(),
        theta: args.theta.clone(),
        rng_seed: args.rng,
        max_rounds: args.rounds,
        strict_sigma: args.strict_sigma.then_some(true),
        mode: args.mode,
    };
    if let Some(path) = &args.config {
        ConfigFile::load(path)?.overlay(&mut partial);
    }
    Ok(partial)
}

/// Writes metrics.csv, events.jsonl, tree.dot and session.json into `dir`.
pub fn write_exports(sim: &Simulation, dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, format) in [
        ("metrics.csv", ExportFormat::CsvMetrics),
        ("events.jsonl", ExportFormat::JsonlEvents),
        ("tree.dot", ExportFormat::DotTree),
    ] {
        write(&dir.join(name), &sim.export(format)?)?;
    }
    write(&dir.join("session.json"), &sim.save_json()?)
}

fn report(out: &mut dyn std::io::Write, sim: &Simulation, first_round: usize, outcomes: &[porgysim_core::strategy::StrategyOutcome]) {
    for (i, o) in outcomes.iter().enumerate() {
        let l = sim.tree.state(o.final_state).expect("committed state");
        let count = |attr| {
            l.graph
                .nodes()
                .filter(|(_, n)| n.record.get(attr).and_then(|v| v.as_bool()) == Some(true))
                .count()
        };
        let status = match &o.status {
            porgysim_core::strategy::Status::Completed => "completed".to_owned(),
            porgysim_core::strategy::Status::NoProgress => "no progress".to_owned(),
            porgysim_core::strategy::Status::Aborted(why) => format!("aborted: {why}"),
        };
        let _ = writeln!(
            out,
            "round {}: {} applications, active {}, visited {} ({status})",
            first_round + i,
            o.log.len(),
            count("active"),
            count("visited"),
        );
    }
}

pub fn cmd_generate(args: &GenerateArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let graph = match &args.import {
        Some(path) => import_edge_list(&read(path)?).map_err(|e| CliError::new("graph", format!("{}: {e}", path.display())))?,
        None => generate(&GeneratorConfig {
            node_count: args.nodes,
            attachment: args.attachment,
            edges_per_new_node: args.edges_per_node,
            triad_closure_prob: args.triad,
            rng_seed: args.rng,
        })?,
    };
    let bytes = serialize_graph(&graph)?;
    eprintln!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    match &args.out {
        Some(path) => write(path, &bytes),
        None => out.write_all(&bytes).map_err(|e| CliError::new("io", e.to_string())),
    }
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let partial = partial_config(&args.model)?;
    if partial.model.is_none() {
        return Err(CliError::usage("--model (or [model] kind in --config) is required"));
    }
    let config = partial.finish()?;
    let Some(graph_path) = &args.graph else {
        return Err(CliError::usage("--graph is required"));
    };
    let graph = load_graph(graph_path)?;
    let mut sim = Simulation::new(&graph, config)?;
    if args.rules.is_some() || args.strategy.is_some() {
        let rules = args.rules.as_deref().map(load_rules).transpose()?.unwrap_or_default();
        let program = match &args.strategy {
            Some(p) => load_strategy(p)?,
            None => sim.program.clone(),
        };
        sim.customize(rules, program)?;
    }
    sim.reload = args.p_reload.clone();
    let outcomes = sim.run()?;
    report(out, &sim, 1, &outcomes);
    match &args.out {
        Some(dir) => write_exports(&sim, dir),
        None => out
            .write_all(&sim.export(ExportFormat::CsvMetrics)?)
            .map_err(|e| CliError::new("io", e.to_string())),
    }
}

pub fn cmd_step(args: &StepArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let mut sim = load_session(&args.session)?;
    if let Some(from) = args.from {
        sim.branch(StateId(from))?;
    }
    let done = sim.tree.branch_states(sim.cursor)?.len();
    let outcomes = sim.run_rounds(args.rounds)?;
    report(out, &sim, done, &outcomes);
    match &args.out {
        Some(dir) => write_exports(&sim, dir),
        None => write(&args.session, &sim.save_json()?),
    }
}

pub fn cmd_metrics(args: &MetricsArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let sim = load_session(&args.session)?;
    let series = sim.metrics(args.leaf.map(StateId))?;
    let bytes = if args.json {
        let mut v = serde_json::to_vec_pretty(&series).expect("series encodes");
        v.push(b'\n');
        v
    } else {
        series.to_csv().into_bytes()
    };
    out.write_all(&bytes).map_err(|e| CliError::new("io", e.to_string()))
}

fn load_series(path: &Path) -> Result<MetricSeries, CliError> {
    let bytes = read(path)?;
    if bytes.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{') {
        return Ok(load_session(path)?.metrics(None)?);
    }
    let text = String::from_utf8_lossy(&bytes);
    MetricSeries::from_csv(&text).map_err(|m| CliError::new("trace", format!("{}: {m}", path.display())))
}

fn stem(path: &Path) -> String {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match name.as_str() {
        "metrics" | "session" => path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or(name),
        _ => name,
    }
}

pub fn cmd_compare(args: &CompareArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    let (a, b) = (load_series(&args.first)?, load_series(&args.second)?);
    let labels = match &args.labels {
        Some(l) if l.len() == 2 => [l[0].clone(), l[1].clone()],
        Some(_) => return Err(CliError::usage("--labels takes exactly two labels")),
        None => [stem(&args.first), stem(&args.second)],
    };
    let table = compare_table(&a, &b, [&labels[0], &labels[1]]);
    out.write_all(table.as_bytes()).map_err(|e| CliError::new("io", e.to_string()))
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    if args.graph.is_none() && args.rules.is_none() && args.strategy.is_none() {
        return Err(CliError::usage("give at least one of --graph, --rules, --strategy"));
    }
    let mut lines = Vec::new();
    if let Some(path) = &args.graph {
        let g = load_graph(path)?;
        lines.push(format!(
            "graph ok: {} nodes, {} ports, {} edges",
            g.node_count(),
            g.port_count(),
            g.edge_count()
        ));
    }
    let mut library = RuleLibrary::new(ModelKind::Ic.rules().into_iter().chain(ModelKind::Lt.rules()));
    if let Some(path) = &args.rules {
        let rules = load_rules(path)?;
        lines.push(format!("rules ok: {}", rules.iter().map(|r| r.name.as_str()).collect::<Vec<_>>().join(", ")));
        for r in rules {
            library.insert(r);
        }
    }
    if let Some(path) = &args.strategy {
        let program = load_strategy(path)?;
        library
            .check(&program)
            .map_err(|e| CliError::new("strategy", format!("{}: {e}", path.display())))?;
        lines.push(format!("strategy ok: {} instructions", program.instructions.len()));
    }
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
    runtime.block_on(crate::service::serve(args.addr, args.persist.clone()))
}

/// Runs a parsed command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn std::io::Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Step(a) => cmd_step(a, out),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::Compare(a) => cmd_compare(a, out),
        Command::Validate(a) => cmd_validate(a, out),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses `args` (program name first) and runs them; returns the exit status.
pub fn main_with(args: impl IntoIterator<Item = String>, out: &mut dyn std::io::Write, err: &mut dyn std::io::Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
