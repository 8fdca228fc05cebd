//! JSON document formats and CSV output for the command-line front end.
//!
//! Three document kinds exist: workloads (tasks with configuration menus
//! plus utility and demand parameters), task DAGs (nodes with option
//! menus, edges, and the profit parameters), and scenarios (a workload
//! plus an agent roster and a seed). All parsing reports the line and
//! column of schema violations; semantic violations are re-checked after
//! deserialization since serde derives do not enforce invariants.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::MarketError;
use crate::simulator::{Metrics, Scenario, TaskSpec};
use crate::taskgraph::{NodeOption, TaskGraph, TaskNode};
use crate::utility::DemandCurve;

/// Slopes of the linear consumer utility `-time_slope*t - price_slope*p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityParams {
    pub time_slope: f64,
    pub price_slope: f64,
}

impl Default for UtilityParams {
    fn default() -> Self {
        UtilityParams { time_slope: 1.0, price_slope: 1.0 }
    }
}

/// A set of priceable tasks with shared market parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadFile {
    #[serde(default)]
    pub utility: UtilityParams,
    pub demand: DemandCurve,
    pub tasks: Vec<TaskSpec>,
}

/// A task DAG document with the market parameters its profit derives from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagFile {
    #[serde(default)]
    pub utility: UtilityParams,
    #[serde(default = "default_dag_demand")]
    pub demand: DemandCurve,
    pub nodes: Vec<DagNode>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

fn default_dag_demand() -> DemandCurve {
    DemandCurve::new(100.0, 1.0).expect("static demand curve")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagNode {
    pub id: String,
    pub options: Vec<NodeOption>,
}

/// Errors from loading a document.
#[derive(Debug)]
pub enum FileError {
    Io { path: String, source: std::io::Error },
    /// Malformed JSON, anchored to its position in the file.
    Schema { path: String, line: usize, column: usize, message: String },
    /// Well-formed JSON violating a documented invariant.
    Semantic { path: String, source: MarketError },
}

impl fmt::Display for FileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FileError::Io { path, source } => write!(f, "{path}: {source}"),
            FileError::Schema { path, line, column, message } => {
                write!(f, "{path}:{line}:{column}: {message}")
            }
            FileError::Semantic { path, source } => write!(f, "{path}: {source}"),
        }
    }
}

impl std::error::Error for FileError {}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    let text = fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| FileError::Schema {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn semantic(path: &Path, source: MarketError) -> FileError {
    FileError::Semantic { path: path.display().to_string(), source }
}

fn validate_utility(u: &UtilityParams) -> Result<(), MarketError> {
    if !(u.price_slope > 0.0) || u.time_slope < 0.0 {
        return Err(MarketError::Invalid(
            "utility needs a positive price slope and nonnegative time slope".into(),
        ));
    }
    Ok(())
}

fn validate_demand(d: &DemandCurve) -> Result<(), MarketError> {
    DemandCurve::new(d.intercept, d.slope).map(|_| ())
}

fn validate_tasks(tasks: &[TaskSpec]) -> Result<(), MarketError> {
    if tasks.is_empty() {
        return Err(MarketError::Empty("workload tasks"));
    }
    for task in tasks {
        if task.configs.is_empty() {
            return Err(MarketError::Empty("task configuration menu"));
        }
        for c in &task.configs {
            if !(c.rate > 0.0) || !c.rate.is_finite() {
                return Err(MarketError::Invalid(format!(
                    "configuration {} of task {} has nonpositive rate",
                    c.id, task.id
                )));
            }
        }
        if let Some(d) = task.deadline {
            if !(d > 0.0) || !d.is_finite() {
                return Err(MarketError::Invalid(format!(
                    "task {} has a nonpositive deadline",
                    task.id
                )));
            }
        }
    }
    Ok(())
}

pub fn load_workload(path: &Path) -> Result<WorkloadFile, FileError> {
    let file: WorkloadFile = load_json(path)?;
    validate_utility(&file.utility).map_err(|e| semantic(path, e))?;
    validate_demand(&file.demand).map_err(|e| semantic(path, e))?;
    validate_tasks(&file.tasks).map_err(|e| semantic(path, e))?;
    Ok(file)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, FileError> {
    let scenario: Scenario = load_json(path)?;
    validate_demand(&scenario.demand).map_err(|e| semantic(path, e))?;
    validate_tasks(&scenario.tasks).map_err(|e| semantic(path, e))?;
    if !(scenario.price_slope > 0.0) || scenario.time_slope < 0.0 {
        return Err(semantic(
            path,
            MarketError::Invalid(
                "scenario needs a positive price slope and nonnegative time slope".into(),
            ),
        ));
    }
    if scenario.agents.is_empty() {
        return Err(semantic(path, MarketError::Empty("scenario agents")));
    }
    Ok(scenario)
}

/// Loads a DAG document and builds the validated graph plus the profit
/// function its utility and demand parameters induce.
pub fn load_dag(path: &Path) -> Result<(DagFile, TaskGraph), FileError> {
    let file: DagFile = load_json(path)?;
    validate_utility(&file.utility).map_err(|e| semantic(path, e))?;
    validate_demand(&file.demand).map_err(|e| semantic(path, e))?;
    let nodes: Vec<TaskNode> = file
        .nodes
        .iter()
        .map(|n| TaskNode::new(n.id.clone(), n.options.clone()))
        .collect();
    let graph = TaskGraph::new(nodes, &file.edges).map_err(|e| semantic(path, e))?;
    Ok((file, graph))
}

/// Overall profit of delivering the whole task in time `t` at cost `c`,
/// per the linear closed form with the document's parameters.
pub fn dag_profit(utility: UtilityParams, demand: DemandCurve) -> impl Fn(f64, f64) -> f64 {
    move |t: f64, c: f64| {
        let beta_m = demand.slope * utility.price_slope;
        let slack = demand.intercept - demand.slope * utility.time_slope * t - beta_m * c;
        if slack > 0.0 {
            slack * slack / (4.0 * beta_m)
        } else {
            0.0
        }
    }
}

/// Formats a float with 12 significant digits, stable across runs.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.11e}")
    }
}

/// Writes metrics as RFC-4180 CSV. With sweep rows, a leading column
/// carries the swept value; plain runs use a single unlabeled block.
pub fn write_metrics_csv<W: Write>(
    out: W,
    blocks: &[(Option<f64>, &Metrics)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let sweeping = blocks.iter().any(|(v, _)| v.is_some());
    let mut header = Vec::new();
    if sweeping {
        header.push("sweep_value");
    }
    header.extend_from_slice(&[
        "agent",
        "task",
        "config",
        "expected_profit",
        "expected_demand",
        "overall_profit",
        "offered_utility",
        "realized_profit",
        "trials",
        "relative_loss",
        "similarity",
    ]);
    w.write_record(&header)?;
    for (value, metrics) in blocks {
        for row in &metrics.rows {
            let mut record = Vec::new();
            if sweeping {
                record.push(value.map(fmt_sig).unwrap_or_default());
            }
            record.push(row.agent.clone());
            record.push(row.task.clone());
            record.push(row.config.clone());
            record.push(fmt_sig(row.expected_profit));
            record.push(fmt_sig(row.expected_demand));
            record.push(fmt_sig(row.overall_profit));
            record.push(fmt_sig(row.offered_utility));
            record.push(fmt_sig(row.realized_profit));
            record.push(row.trials.to_string());
            record.push(row.relative_loss.map(fmt_sig).unwrap_or_default());
            record.push(fmt_sig(row.similarity));
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-agent summary block.
pub fn write_summary_csv<W: Write>(
    out: W,
    blocks: &[(Option<f64>, &Metrics)],
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let sweeping = blocks.iter().any(|(v, _)| v.is_some());
    let mut header = Vec::new();
    if sweeping {
        header.push("sweep_value");
    }
    header.extend_from_slice(&[
        "agent",
        "total_overall_profit",
        "total_realized_profit",
        "mean_offered_utility",
        "relative_utility",
    ]);
    w.write_record(&header)?;
    for (value, metrics) in blocks {
        for agent in &metrics.agents {
            let mut record = Vec::new();
            if sweeping {
                record.push(value.map(fmt_sig).unwrap_or_default());
            }
            record.push(agent.agent.clone());
            record.push(fmt_sig(agent.total_overall_profit));
            record.push(fmt_sig(agent.total_realized_profit));
            record.push(fmt_sig(agent.mean_offered_utility));
            record.push(agent.relative_utility.map(fmt_sig).unwrap_or_default());
            w.write_record(&record)?;
        }
    }
    w.flush()?;
    Ok(())
}
