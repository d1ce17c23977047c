use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::models::attrs;
use crate::portgraph::{PortGraph, PropertyValue};

use super::tree::{DerivationTree, StateId, TreeError};

/// Counts at the end of one propagation step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub state: StateId,
    pub active: usize,
    pub visited: usize,
    /// `active / visited`; absent while nothing has been visited.
    pub efficiency: Option<f64>,
    pub complete: bool,
}

/// Propagation speed (active), acknowledgement speed (visited) and efficiency per step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub leaf: StateId,
    pub model: String,
    pub steps: Vec<StepMetrics>,
}

fn count(g: &PortGraph, attr: &str) -> usize {
    g.nodes()
        .filter(|(_, n)| n.record.get(attr).and_then(PropertyValue::as_bool) == Some(true))
        .count()
}

impl MetricSeries {
    pub fn active(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.active).collect()
    }

    pub fn visited(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.visited).collect()
    }

    /// `step,active,visited,efficiency`, one row per step, empty cell for absent efficiency.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,active,visited,efficiency\n");
        for s in &self.steps {
            let eff = s.efficiency.map(|e| e.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", s.step, s.active, s.visited, eff).expect("string write");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "step,active,visited,efficiency" => {}
            _ => return Err("missing header `step,active,visited,efficiency`".into()),
        }
        let mut steps = Vec::new();
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |what: &str| format!("line {}: bad {what}", n + 2);
            if cols.len() != 4 {
                return Err(bad("column count"));
            }
            steps.push(StepMetrics {
                step: cols[0].parse().map_err(|_| bad("step"))?,
                state: StateId(0),
                active: cols[1].parse().map_err(|_| bad("active count"))?,
                visited: cols[2].parse().map_err(|_| bad("visited count"))?,
                efficiency: match cols[3] {
                    "" => None,
                    x => Some(x.parse().map_err(|_| bad("efficiency"))?),
                },
                complete: true,
            });
        }
        Ok(MetricSeries {
            leaf: StateId(0),
            model: String::new(),
            steps,
        })
    }
}

impl DerivationTree {
    pub fn compute_metrics(&self, leaf: StateId, model: &str) -> Result<MetricSeries, TreeError> {
        let steps = self
            .branch_states(leaf)?
            .into_iter()
            .map(|st| {
                let g = &self.state(st.state).expect("state on branch").graph;
                let (active, visited) = (count(g, attrs::ACTIVE), count(g, attrs::VISITED));
                StepMetrics {
                    step: st.step,
                    state: st.state,
                    active,
                    visited,
                    efficiency: (visited > 0).then(|| active as f64 / visited as f64),
                    complete: st.complete,
                }
            })
            .collect();
        Ok(MetricSeries {
            leaf,
            model: model.to_owned(),
            steps,
        })
    }
}

/// Side-by-side active counts of two series, joined on step; missing steps repeat the last value.
pub fn compare_table(a: &MetricSeries, b: &MetricSeries, labels: [&str; 2]) -> String {
    let n = a.steps.len().max(b.steps.len());
    let at = |s: &MetricSeries, i: usize| s.steps.get(i).or(s.steps.last()).map(|m| m.active);
    let mut out = format!("step,{}_active,{}_active,gap\n", labels[0], labels[1]);
    for i in 0..n {
        let (x, y) = (at(a, i), at(b, i));
        let cell = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let gap = match (x, y) {
            (Some(x), Some(y)) => (x as i64 - y as i64).to_string(),
            _ => String::new(),
        };
        writeln!(out, "{i},{},{},{gap}", cell(x), cell(y)).expect("string write");
    }
    out
}
