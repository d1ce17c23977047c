use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use super::tree::{DerivationTree, StateId, TreeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    CsvMetrics,
    JsonlEvents,
    DotTree,
}

impl FromStr for ExportFormat {
    type Err = TreeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv-metrics" => Ok(ExportFormat::CsvMetrics),
            "jsonl-events" => Ok(ExportFormat::JsonlEvents),
            "dot-tree" => Ok(ExportFormat::DotTree),
            other => Err(TreeError::UnknownFormat(other.to_owned())),
        }
    }
}

impl DerivationTree {
    /// One JSON object per application on the branch ending at `leaf`.
    pub fn events_jsonl(&self, leaf: StateId) -> Result<String, TreeError> {
        let mut out = String::new();
        for e in self.branch_events(leaf)? {
            out.push_str(&serde_json::to_string(&e).expect("events always encode"));
            out.push('\n');
        }
        Ok(out)
    }

    /// The whole tree in DOT; states on the branch to `leaf` are drawn bold.
    pub fn to_dot(&self, leaf: StateId) -> Result<String, TreeError> {
        let branch: BTreeSet<StateId> = self.path(leaf)?.into_iter().collect();
        let mut out = String::from("digraph derivation {\n  node [shape=circle];\n");
        for s in self.state_ids() {
            let style = if branch.contains(&s) { ", style=bold" } else { "" };
            writeln!(out, "  {s} [label=\"{s}\"{style}];").expect("string write");
        }
        for s in self.state_ids() {
            if let Some(d) = self.derivation(s)? {
                let rule = d.rule.replace('\\', "\\\\").replace('"', "\\\"");
                writeln!(out, "  {} -> {s} [label=\"{rule}\", group={}];", d.parent, d.group.0).expect("string write");
            }
        }
        out.push_str("}\n");
        Ok(out)
    }

    pub fn export(&self, leaf: StateId, format: ExportFormat, model: &str) -> Result<Vec<u8>, TreeError> {
        Ok(match format {
            ExportFormat::CsvMetrics => self.compute_metrics(leaf, model)?.to_csv(),
            ExportFormat::JsonlEvents => self.events_jsonl(leaf)?,
            ExportFormat::DotTree => self.to_dot(leaf)?,
        }
        .into_bytes())
    }
}
