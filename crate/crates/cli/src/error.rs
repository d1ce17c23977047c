use std::fmt;
use std::path::Path;

use porgysim_core::models::{ConfigError, SetupError};
use porgysim_core::netgen::NetgenError;
use porgysim_core::portgraph::FormatError;
use porgysim_core::rewrite::RuleFileError;
use porgysim_core::session::SimulationError;
use porgysim_core::strategy::{StrategyError, StrategyParseError};
use porgysim_core::trace::{PersistError, TreeError};

/// A failure reported as `error[<code>]: <message>` with exit status 1 (domain) or 2 (usage).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub usage: bool,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
            usage: false,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: "usage",
            message: message.into(),
            usage: true,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::new("io", format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        if self.usage {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! domain {
    ($($ty:ty => $code:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::new($code, e.to_string())
            }
        })*
    };
}

domain! {
    ConfigError => "config",
    SetupError => "setup",
    NetgenError => "graph",
    FormatError => "graph",
    RuleFileError => "rules",
    StrategyParseError => "strategy",
    StrategyError => "simulation",
    TreeError => "trace",
    PersistError => "session",
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Config(e) => e.into(),
            SimulationError::Setup(e) => e.into(),
            SimulationError::Strategy(e) => e.into(),
            SimulationError::Parse(e) => e.into(),
            SimulationError::Rules(e) => e.into(),
            SimulationError::Tree(e) => e.into(),
            SimulationError::Persist(e) => e.into(),
        }
    }
}
