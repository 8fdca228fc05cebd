//! Seeded market simulation.
//!
//! A scenario fixes a seed, a set of tasks (each with a menu of
//! configurations carrying true completion-time histograms), one linear
//! consumer utility, a demand curve, and a roster of agents. Running the
//! market prices every task per agent model, realizes demand from the
//! offered utility, samples completions from the true distributions,
//! settles payments per the price schedule, and aggregates metrics.
//! Identical seeds produce identical metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contract::{interval_stats, Configuration, PriceSchedule};
use crate::error::{MarketError, Result};
use crate::histogram::{cosine_similarity, CompletionHistogram, DEFAULT_GRID_STEP};
use crate::pricing::{
    expected_demand, expected_profit, price_linear, select_configuration, PricingConstants,
    PricingOutcome,
};
use crate::risk::{price_risk_aware, RiskBounds, RiskParams};
use crate::taskgraph::{NodeOption, TaskGraph, TaskNode};
use crate::utility::{DemandCurve, PiecewiseUtility};

/// How an agent estimates distributions and prices contracts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentModel {
    /// Always uses one named configuration, with perfect estimates.
    NaiveFixed { config: String },
    /// Picks the most profitable configuration, with perfect estimates.
    Expert,
    /// Picks the configuration whose profile tag matches the task's
    /// intensity tag, with perfect estimates.
    Heuristic,
    /// Estimates every configuration as a Gaussian around `coeff` times
    /// the true mean with the given standard deviation, then prices like
    /// the expert on those estimates. Typical sigmas: 0.05 minutes for
    /// short low-variance workloads, 0.55 for long noisy ones.
    Estimator { coeff: f64, sigma: f64 },
    /// Estimates like `Estimator`, then prices risk-aware: `lambda`
    /// weights the worst-case loss over a one-sided box sized by the
    /// suspected overestimation factor `hedge`.
    RiskAware { lambda: f64, coeff: f64, sigma: f64, hedge: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    pub model: AgentModel,
}

/// One task: a menu of configurations with true histograms, an optional
/// workload-intensity tag, and an optional deadline override.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub id: String,
    pub configs: Vec<Configuration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
}

impl TaskSpec {
    /// The contract deadline: the override if set, otherwise the average
    /// completion time across all configurations.
    pub fn deadline(&self) -> f64 {
        self.deadline.unwrap_or_else(|| {
            let total: f64 = self.configs.iter().map(|c| c.histogram.mean()).sum();
            total / self.configs.len() as f64
        })
    }

    /// Target times of this task's contracts: one deadline.
    pub fn targets(&self) -> Vec<f64> {
        vec![0.0, self.deadline(), f64::INFINITY]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub seed: u64,
    pub tasks: Vec<TaskSpec>,
    /// Linear utility slopes shared by every consumer request.
    pub time_slope: f64,
    pub price_slope: f64,
    pub demand: DemandCurve,
    pub agents: Vec<AgentSpec>,
    /// Executions per accepted contract.
    #[serde(default = "default_trials")]
    pub trials_per_contract: u64,
}

fn default_trials() -> u64 {
    1
}

/// Per agent-task pricing and settlement record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub agent: String,
    pub task: String,
    pub config: String,
    pub expected_profit: f64,
    pub expected_demand: f64,
    pub overall_profit: f64,
    pub offered_utility: f64,
    pub realized_profit: f64,
    pub trials: u64,
    /// `(optimal - actual) / optimal` against true statistics; absent when
    /// no profitable optimum exists for the task.
    pub relative_loss: Option<f64>,
    /// Cosine similarity of the agent's estimated histogram to the truth.
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: String,
    pub total_overall_profit: f64,
    pub total_realized_profit: f64,
    pub mean_offered_utility: f64,
    /// `(agent - expert) / |expert|` mean offered utility, when an expert
    /// is in the roster.
    pub relative_utility: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rows: Vec<MetricsRow>,
    pub agents: Vec<AgentSummary>,
}

/// Relative loss of profit: `(optimal - actual) / optimal`.
pub fn relative_loss(optimal: f64, actual: f64) -> Result<f64> {
    if !(optimal > 0.0) {
        return Err(MarketError::Invalid(format!(
            "relative loss needs a positive optimal profit, got {optimal}"
        )));
    }
    Ok((optimal - actual) / optimal)
}

/// Ranges for the synthetic workload generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    pub n_tasks: usize,
    pub n_configs: usize,
    /// True mean completion time range, minutes.
    pub mean_range: (f64, f64),
    /// True variance range, squared minutes.
    pub var_range: (f64, f64),
    /// Configuration rate range, cents per minute.
    pub rate_range: (f64, f64),
}

impl Default for WorkloadParams {
    fn default() -> Self {
        WorkloadParams {
            n_tasks: 20,
            n_configs: 5,
            mean_range: (1.0, 100.0),
            var_range: (0.0, 5.0),
            rate_range: (0.1, 1.0),
        }
    }
}

fn sample_range<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.0 == range.1 {
        range.0
    } else {
        rng.random_range(range.0..range.1)
    }
}

/// Deterministic synthetic task set: per task and configuration, a
/// Gaussian-derived histogram materialized on the common grid, and a rate.
pub fn generate_synthetic_workload(seed: u64, params: &WorkloadParams) -> Result<Vec<TaskSpec>> {
    if params.n_tasks == 0 || params.n_configs == 0 {
        return Err(MarketError::Empty("workload tasks or configurations"));
    }
    for (name, range, positive) in [
        ("mean", params.mean_range, true),
        ("variance", params.var_range, false),
        ("rate", params.rate_range, true),
    ] {
        if !(range.0 <= range.1) || range.0 < 0.0 || (positive && !(range.0 > 0.0)) {
            return Err(MarketError::Invalid(format!(
                "degenerate {name} range ({}, {})",
                range.0, range.1
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profiles = ["cpu", "io"];
    let mut tasks = Vec::with_capacity(params.n_tasks);
    for i in 0..params.n_tasks {
        let mut configs = Vec::with_capacity(params.n_configs);
        for j in 0..params.n_configs {
            let mean = sample_range(&mut rng, params.mean_range);
            let std = sample_range(&mut rng, params.var_range).sqrt();
            let rate = sample_range(&mut rng, params.rate_range);
            let hist = CompletionHistogram::gaussian(mean, std, DEFAULT_GRID_STEP)?;
            let mut config = Configuration::new(format!("cfg{j}"), rate, hist)?;
            if j < profiles.len() {
                config = config.with_tag("profile", profiles[j]);
            }
            configs.push(config);
        }
        tasks.push(TaskSpec {
            id: format!("task{i:03}"),
            configs,
            intensity: Some(profiles[i % profiles.len()].to_string()),
            deadline: None,
        });
    }
    Ok(tasks)
}

/// Options for the synthetic DAG generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DagParams {
    pub n_options: usize,
    pub time_range: (f64, f64),
    pub cost_range: (f64, f64),
}

impl Default for DagParams {
    fn default() -> Self {
        DagParams { n_options: 5, time_range: (1.0, 100.0), cost_range: (1.0, 50.0) }
    }
}

/// Deterministic random DAG: nodes are ordered and edges only run from
/// lower to higher index, so the result is acyclic by construction.
pub fn generate_synthetic_dag(
    seed: u64,
    n_nodes: usize,
    edge_density: f64,
    params: &DagParams,
) -> Result<TaskGraph> {
    if n_nodes == 0 {
        return Err(MarketError::Empty("dag nodes"));
    }
    if !(0.0..=1.0).contains(&edge_density) {
        return Err(MarketError::Invalid(format!(
            "edge density {edge_density} must lie in [0, 1]"
        )));
    }
    if params.n_options == 0 {
        return Err(MarketError::Empty("dag node options"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<TaskNode> = (0..n_nodes)
        .map(|i| {
            let options = (0..params.n_options)
                .map(|_| NodeOption {
                    time: sample_range(&mut rng, params.time_range),
                    cost: sample_range(&mut rng, params.cost_range),
                })
                .collect();
            TaskNode::new(format!("q{i:03}"), options)
        })
        .collect();
    let mut edges = Vec::new();
    for i in 0..n_nodes {
        for j in (i + 1)..n_nodes {
            if rng.random_range(0.0..1.0) < edge_density {
                edges.push((format!("q{i:03}"), format!("q{j:03}")));
            }
        }
    }
    TaskGraph::new(nodes, &edges)
}

/// One agent's pricing of one task.
struct PricedTask {
    config_id: String,
    config_idx: usize,
    outcome: PricingOutcome,
    similarity: f64,
}

fn estimated_menu(task: &TaskSpec, coeff: f64, sigma: f64) -> Result<Vec<Configuration>> {
    task.configs
        .iter()
        .map(|c| {
            let est = CompletionHistogram::gaussian(
                coeff * c.histogram.mean(),
                sigma,
                DEFAULT_GRID_STEP,
            )?;
            let mut out = Configuration::new(c.id.clone(), c.rate, est)?;
            out.tags = c.tags.clone();
            Ok(out)
        })
        .collect()
}

fn config_index(task: &TaskSpec, id: &str) -> Result<usize> {
    task.configs
        .iter()
        .position(|c| c.id == id)
        .ok_or_else(|| MarketError::UnknownId(format!("{} in task {}", id, task.id)))
}

fn price_task(
    scenario: &Scenario,
    model: &AgentModel,
    task: &TaskSpec,
    consts: &PricingConstants,
) -> Result<PricedTask> {
    let targets = task.targets();
    let utility = PiecewiseUtility::linear(scenario.time_slope, scenario.price_slope)?;
    match model {
        AgentModel::NaiveFixed { config } => {
            let idx = config_index(task, config)?;
            let c = &task.configs[idx];
            let stats = interval_stats(&c.histogram, c.rate, &targets)?;
            let outcome = price_linear(
                &stats,
                &targets,
                scenario.time_slope,
                scenario.price_slope,
                &scenario.demand,
                consts,
            )?;
            Ok(PricedTask { config_id: c.id.clone(), config_idx: idx, outcome, similarity: 1.0 })
        }
        AgentModel::Expert => {
            let (chosen, outcome) = select_configuration(
                &task.configs,
                &targets,
                &utility,
                &scenario.demand,
                consts,
            )?;
            let idx = config_index(task, &chosen.id)?;
            Ok(PricedTask { config_id: chosen.id.clone(), config_idx: idx, outcome, similarity: 1.0 })
        }
        AgentModel::Heuristic => {
            let wanted = task.intensity.as_deref().unwrap_or("");
            let idx = task
                .configs
                .iter()
                .position(|c| c.tags.get("profile").map(String::as_str) == Some(wanted))
                .unwrap_or(0);
            let c = &task.configs[idx];
            let stats = interval_stats(&c.histogram, c.rate, &targets)?;
            let outcome = price_linear(
                &stats,
                &targets,
                scenario.time_slope,
                scenario.price_slope,
                &scenario.demand,
                consts,
            )?;
            Ok(PricedTask { config_id: c.id.clone(), config_idx: idx, outcome, similarity: 1.0 })
        }
        AgentModel::Estimator { coeff, sigma } => {
            let menu = estimated_menu(task, *coeff, *sigma)?;
            let (chosen, outcome) =
                select_configuration(&menu, &targets, &utility, &scenario.demand, consts)?;
            let idx = config_index(task, &chosen.id)?;
            let similarity =
                cosine_similarity(&chosen.histogram, &task.configs[idx].histogram)?;
            Ok(PricedTask { config_id: chosen.id.clone(), config_idx: idx, outcome, similarity })
        }
        AgentModel::RiskAware { lambda, coeff, sigma, hedge } => {
            let menu = estimated_menu(task, *coeff, *sigma)?;
            let (chosen, _) =
                select_configuration(&menu, &targets, &utility, &scenario.demand, consts)?;
            let stats = interval_stats(&chosen.histogram, chosen.rate, &targets)?;
            let bounds = RiskBounds::overestimation(&stats, *hedge)?;
            let params = RiskParams {
                lambda: *lambda,
                prob_samples: 4,
                prob_radius: 0.1,
                seed: scenario.seed,
                ..RiskParams::default()
            };
            let outcome = price_risk_aware(
                &stats,
                &targets,
                &bounds,
                &params,
                scenario.time_slope,
                scenario.price_slope,
                &scenario.demand,
                consts,
            )?;
            let idx = config_index(task, &chosen.id)?;
            let similarity =
                cosine_similarity(&chosen.histogram, &task.configs[idx].histogram)?;
            Ok(PricedTask { config_id: chosen.id.clone(), config_idx: idx, outcome, similarity })
        }
    }
}

/// The best overall profit achievable on the task with true statistics.
fn optimal_profit(scenario: &Scenario, task: &TaskSpec, consts: &PricingConstants) -> Result<f64> {
    let utility = PiecewiseUtility::linear(scenario.time_slope, scenario.price_slope)?;
    let (_, outcome) =
        select_configuration(&task.configs, &task.targets(), &utility, &scenario.demand, consts)?;
    Ok(outcome.overall_profit)
}

/// Overall profit the agent's schedule earns in expectation against the
/// true statistics, floored at zero (a loss-making agent exits the task).
fn actual_profit_against_truth(
    scenario: &Scenario,
    task: &TaskSpec,
    config_idx: usize,
    prices: &PriceSchedule,
) -> Result<f64> {
    let targets = task.targets();
    let c = &task.configs[config_idx];
    let truth = interval_stats(&c.histogram, c.rate, &targets)?;
    let utility = PiecewiseUtility::linear(scenario.time_slope, scenario.price_slope)?;
    let profit = expected_profit(prices, &truth)?;
    let demand = expected_demand(prices, &truth, &utility, &scenario.demand)?;
    Ok((profit * demand).max(0.0))
}

/// Runs the full market simulation for a scenario.
pub fn run_market(scenario: &Scenario) -> Result<Metrics> {
    if scenario.tasks.is_empty() {
        return Err(MarketError::Empty("scenario tasks"));
    }
    if scenario.agents.is_empty() {
        return Err(MarketError::Empty("scenario agents"));
    }
    let consts = PricingConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let optimal: Vec<f64> = scenario
        .tasks
        .iter()
        .map(|task| optimal_profit(scenario, task, &consts))
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(scenario.agents.len() * scenario.tasks.len());
    for agent in &scenario.agents {
        for (ti, task) in scenario.tasks.iter().enumerate() {
            let priced = price_task(scenario, &agent.model, task, &consts)?;
            debug_assert!(priced.outcome.expected_profit > 0.0);

            let accepted = priced.outcome.expected_demand.round().max(0.0) as u64;
            let trials = accepted * scenario.trials_per_contract;
            let true_config = &task.configs[priced.config_idx];
            let mut realized = 0.0;
            for _ in 0..trials {
                let t = true_config.histogram.sample(&mut rng);
                let payment = priced.outcome.prices.eval(t);
                realized += payment - true_config.rate * t;
            }

            let rel_loss = if optimal[ti] > 0.0 {
                let actual = actual_profit_against_truth(
                    scenario,
                    task,
                    priced.config_idx,
                    &priced.outcome.prices,
                )?;
                Some((optimal[ti] - actual) / optimal[ti])
            } else {
                None
            };

            rows.push(MetricsRow {
                agent: agent.name.clone(),
                task: task.id.clone(),
                config: priced.config_id,
                expected_profit: priced.outcome.expected_profit,
                expected_demand: priced.outcome.expected_demand,
                overall_profit: priced.outcome.overall_profit,
                offered_utility: priced.outcome.consumer_utility,
                realized_profit: realized,
                trials,
                relative_loss: rel_loss,
                similarity: priced.similarity,
            });
        }
    }

    let mut agents = Vec::with_capacity(scenario.agents.len());
    let expert_mean = scenario
        .agents
        .iter()
        .find(|a| matches!(a.model, AgentModel::Expert))
        .map(|expert| {
            let (sum, n) = rows
                .iter()
                .filter(|r| r.agent == expert.name)
                .fold((0.0, 0usize), |(s, n), r| (s + r.offered_utility, n + 1));
            sum / n as f64
        });
    for agent in &scenario.agents {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.agent == agent.name).collect();
        let total_overall: f64 = mine.iter().map(|r| r.overall_profit).sum();
        let total_realized: f64 = mine.iter().map(|r| r.realized_profit).sum();
        let mean_utility: f64 =
            mine.iter().map(|r| r.offered_utility).sum::<f64>() / mine.len() as f64;
        let relative_utility = expert_mean.and_then(|e| {
            if e == 0.0 {
                None
            } else {
                Some((mean_utility - e) / e.abs())
            }
        });
        agents.push(AgentSummary {
            agent: agent.name.clone(),
            total_overall_profit: total_overall,
            total_realized_profit: total_realized,
            mean_offered_utility: mean_utility,
            relative_utility,
        });
    }
    Ok(Metrics { rows, agents })
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Estimation error coefficient of estimator and risk-aware agents.
    EstimatorCoeff,
    /// Risk weight of risk-aware agents.
    RiskLambda,
    /// Utility gap between the best and second-best bidder in the
    /// second-utility auction.
    VcgDelta,
    /// Workload repetition count for the self-benchmarking comparison.
    BenchmarkRepetitions,
}

impl SweepParameter {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "estimator-coeff" => Ok(SweepParameter::EstimatorCoeff),
            "risk-lambda" => Ok(SweepParameter::RiskLambda),
            "vcg-delta" => Ok(SweepParameter::VcgDelta),
            "benchmark-repetitions" => Ok(SweepParameter::BenchmarkRepetitions),
            other => Err(MarketError::UnknownId(format!("sweep parameter {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub metrics: Metrics,
}

/// Runs the scenario once per value of the swept parameter. Each run is
/// independently seeded from the scenario seed, so the table is
/// deterministic.
pub fn sweep(scenario: &Scenario, parameter: SweepParameter, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(MarketError::Empty("sweep values"));
    }
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let metrics = match parameter {
            SweepParameter::EstimatorCoeff => {
                let mut s = scenario.clone();
                for agent in &mut s.agents {
                    match &mut agent.model {
                        AgentModel::Estimator { coeff, .. } => *coeff = value,
                        AgentModel::RiskAware { coeff, .. } => *coeff = value,
                        _ => {}
                    }
                }
                run_market(&s)?
            }
            SweepParameter::RiskLambda => {
                if !(value >= 0.0) {
                    return Err(MarketError::Invalid(format!(
                        "risk lambda {value} must be nonnegative"
                    )));
                }
                let mut s = scenario.clone();
                for agent in &mut s.agents {
                    if let AgentModel::RiskAware { lambda, .. } = &mut agent.model {
                        *lambda = value;
                    }
                }
                run_market(&s)?
            }
            SweepParameter::VcgDelta => vcg_delta_metrics(scenario, value)?,
            SweepParameter::BenchmarkRepetitions => benchmark_metrics(scenario, value)?,
        };
        out.push(SweepRow { value, metrics });
    }
    Ok(out)
}

/// Auction alternative at a fixed utility gap: the winner bids truthfully
/// at cost, the runner-up sits `delta` utility below, the consumer pays
/// the shifted schedule, and demand realizes at the delivered utility.
fn vcg_delta_metrics(scenario: &Scenario, delta: f64) -> Result<Metrics> {
    if !(delta >= 0.0) {
        return Err(MarketError::Invalid(format!("delta {delta} must be nonnegative")));
    }
    let consts = PricingConstants::default();
    let utility = PiecewiseUtility::linear(scenario.time_slope, scenario.price_slope)?;
    let mut rows = Vec::with_capacity(scenario.tasks.len());
    for task in &scenario.tasks {
        let targets = task.targets();
        let (best, _) =
            select_configuration(&task.configs, &targets, &utility, &scenario.demand, &consts)?;
        let stats = interval_stats(&best.histogram, best.rate, &targets)?;
        // Truthful bid: prices equal expected costs, so the bid utility is
        // the raw configuration utility.
        let bid_utility = crate::pricing::raw_config_utility(
            &stats,
            scenario.time_slope,
            scenario.price_slope,
        );
        let delivered = bid_utility - delta;
        let accepted = scenario.demand.eval(delivered).round().max(0.0) as u64;
        let per_contract = delta / scenario.price_slope;
        let profit = per_contract * accepted as f64;
        rows.push(MetricsRow {
            agent: "vcg-winner".into(),
            task: task.id.clone(),
            config: best.id.clone(),
            expected_profit: per_contract,
            expected_demand: accepted as f64,
            overall_profit: profit,
            offered_utility: delivered,
            realized_profit: profit,
            trials: accepted,
            relative_loss: None,
            similarity: 1.0,
        });
    }
    let total: f64 = rows.iter().map(|r| r.overall_profit).sum();
    let mean_u: f64 =
        rows.iter().map(|r| r.offered_utility).sum::<f64>() / rows.len() as f64;
    let agents = vec![AgentSummary {
        agent: "vcg-winner".into(),
        total_overall_profit: total,
        total_realized_profit: total,
        mean_offered_utility: mean_u,
        relative_utility: None,
    }];
    Ok(Metrics { rows, agents })
}

/// Self-benchmarking alternative after `reps` repetitions of the workload:
/// the consumer tries each configuration once at direct (cost) prices in
/// menu order, then sticks with the best; the market path buys the
/// expert's contract every repetition. Rows carry cumulative utilities.
fn benchmark_metrics(scenario: &Scenario, reps: f64) -> Result<Metrics> {
    if !(reps >= 1.0) || reps.fract() != 0.0 {
        return Err(MarketError::Invalid(format!(
            "repetition count {reps} must be a positive integer"
        )));
    }
    let reps = reps as u64;
    let consts = PricingConstants::default();
    let utility = PiecewiseUtility::linear(scenario.time_slope, scenario.price_slope)?;
    let mut rows = Vec::new();
    for task in &scenario.tasks {
        let targets = task.targets();
        let (_, market_outcome) =
            select_configuration(&task.configs, &targets, &utility, &scenario.demand, &consts)?;
        let market_per_rep = market_outcome.consumer_utility;

        // Direct-cost utility per configuration, in menu order.
        let direct: Vec<f64> = task
            .configs
            .iter()
            .map(|c| {
                let stats = interval_stats(&c.histogram, c.rate, &targets)?;
                Ok(crate::pricing::raw_config_utility(
                    &stats,
                    scenario.time_slope,
                    scenario.price_slope,
                ))
            })
            .collect::<Result<_>>()?;
        let best_direct = direct.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let tried = (reps as usize).min(direct.len());
        let cum_bench: f64 = direct[..tried].iter().sum::<f64>()
            + best_direct * (reps.saturating_sub(direct.len() as u64)) as f64;
        let cum_market = market_per_rep * reps as f64;

        for (name, value) in [("market", cum_market), ("benchmark", cum_bench)] {
            rows.push(MetricsRow {
                agent: name.into(),
                task: task.id.clone(),
                config: String::new(),
                expected_profit: 0.0,
                expected_demand: 0.0,
                overall_profit: 0.0,
                offered_utility: value,
                realized_profit: 0.0,
                trials: reps,
                relative_loss: None,
                similarity: 1.0,
            });
        }
    }
    let mut agents = Vec::new();
    for name in ["market", "benchmark"] {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.agent == name).collect();
        agents.push(AgentSummary {
            agent: name.into(),
            total_overall_profit: 0.0,
            total_realized_profit: 0.0,
            mean_offered_utility: mine.iter().map(|r| r.offered_utility).sum::<f64>()
                / mine.len() as f64,
            relative_utility: None,
        });
    }
    Ok(Metrics { rows, agents })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario(seed: u64) -> Scenario {
        Scenario {
            seed,
            tasks: generate_synthetic_workload(
                seed,
                &WorkloadParams {
                    n_tasks: 6,
                    n_configs: 4,
                    mean_range: (2.0, 40.0),
                    var_range: (0.0, 2.0),
                    rate_range: (0.2, 0.8),
                },
            )
            .unwrap(),
            time_slope: 1.0,
            price_slope: 1.0,
            demand: DemandCurve::new(100.0, 1.0).unwrap(),
            agents: vec![
                AgentSpec { name: "expert".into(), model: AgentModel::Expert },
                AgentSpec {
                    name: "naive0".into(),
                    model: AgentModel::NaiveFixed { config: "cfg0".into() },
                },
                AgentSpec { name: "heuristic".into(), model: AgentModel::Heuristic },
                AgentSpec {
                    name: "estimator".into(),
                    model: AgentModel::Estimator { coeff: 1.2, sigma: 0.5 },
                },
            ],
            trials_per_contract: 1,
        }
    }

    #[test]
    fn workload_generation_is_deterministic_and_in_range() {
        let params = WorkloadParams::default();
        let a = generate_synthetic_workload(7, &params).unwrap();
        let b = generate_synthetic_workload(7, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        for task in &a {
            assert_eq!(task.configs.len(), 5);
            for c in &task.configs {
                let mean = c.histogram.mean();
                assert!(mean > 0.5 && mean < 101.0, "mean {mean}");
            }
        }
        let c = generate_synthetic_workload(8, &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_variance_means_point_masses() {
        let params = WorkloadParams {
            n_tasks: 2,
            n_configs: 2,
            var_range: (0.0, 0.0),
            ..WorkloadParams::default()
        };
        let tasks = generate_synthetic_workload(3, &params).unwrap();
        for task in &tasks {
            for c in &task.configs {
                assert_eq!(c.histogram.bins().len(), 1);
            }
        }
    }

    #[test]
    fn dag_generation_edge_cases() {
        let params = DagParams::default();
        let single = generate_synthetic_dag(1, 1, 0.5, &params).unwrap();
        assert_eq!(single.len(), 1);
        let loose = generate_synthetic_dag(2, 10, 0.0, &params).unwrap();
        assert!(loose.edges().is_empty());
        let big = generate_synthetic_dag(9, 154, 0.02, &params).unwrap();
        assert_eq!(big.len(), 154);
        assert!(big.topological_sort().is_ok());
        let again = generate_synthetic_dag(9, 154, 0.02, &params).unwrap();
        assert_eq!(big, again);
    }

    #[test]
    fn market_runs_are_deterministic() {
        let scenario = small_scenario(42);
        let a = run_market(&scenario).unwrap();
        let b = run_market(&scenario).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_priced_contract_is_profitable_in_expectation() {
        let metrics = run_market(&small_scenario(43)).unwrap();
        for row in &metrics.rows {
            assert!(row.expected_profit > 0.0, "{} on {}", row.agent, row.task);
            assert!(row.overall_profit >= 0.0);
        }
    }

    #[test]
    fn expert_dominates_naive_agents_with_perfect_estimates() {
        let mut scenario = small_scenario(44);
        scenario.agents = vec![
            AgentSpec { name: "expert".into(), model: AgentModel::Expert },
            AgentSpec { name: "n0".into(), model: AgentModel::NaiveFixed { config: "cfg0".into() } },
            AgentSpec { name: "n1".into(), model: AgentModel::NaiveFixed { config: "cfg1".into() } },
            AgentSpec { name: "n2".into(), model: AgentModel::NaiveFixed { config: "cfg2".into() } },
        ];
        let metrics = run_market(&scenario).unwrap();
        let expert = &metrics.agents[0];
        for other in &metrics.agents[1..] {
            assert!(expert.total_overall_profit >= other.total_overall_profit - 1e-9);
            assert!(expert.mean_offered_utility >= other.mean_offered_utility - 1e-9);
        }
        assert_eq!(expert.relative_utility, Some(0.0));
    }

    #[test]
    fn heuristic_agent_follows_the_intensity_tag() {
        // cfg0 is more profitable, but the task is tagged io and only
        // cfg1 carries the io profile.
        let fast = Configuration::new("cfg0", 0.2, CompletionHistogram::point_mass(5.0))
            .unwrap()
            .with_tag("profile", "cpu");
        let slow = Configuration::new("cfg1", 0.5, CompletionHistogram::point_mass(9.0))
            .unwrap()
            .with_tag("profile", "io");
        let scenario = Scenario {
            seed: 50,
            tasks: vec![TaskSpec {
                id: "t".into(),
                configs: vec![fast, slow],
                intensity: Some("io".into()),
                deadline: Some(10.0),
            }],
            time_slope: 1.0,
            price_slope: 1.0,
            demand: DemandCurve::new(100.0, 1.0).unwrap(),
            agents: vec![
                AgentSpec { name: "rule".into(), model: AgentModel::Heuristic },
                AgentSpec { name: "expert".into(), model: AgentModel::Expert },
            ],
            trials_per_contract: 1,
        };
        let metrics = run_market(&scenario).unwrap();
        assert_eq!(metrics.rows[0].config, "cfg1");
        assert_eq!(metrics.rows[1].config, "cfg0");
        assert!(metrics.rows[1].overall_profit > metrics.rows[0].overall_profit);
    }

    #[test]
    fn zero_demand_scenario_settles_nothing() {
        let mut scenario = small_scenario(45);
        // Utilities are far below -intercept/slope: demand clamps to zero.
        scenario.demand = DemandCurve::new(0.5, 100.0).unwrap();
        let metrics = run_market(&scenario).unwrap();
        for row in &metrics.rows {
            assert_eq!(row.trials, 0);
            assert_eq!(row.realized_profit, 0.0);
            assert_eq!(row.overall_profit, 0.0);
        }
    }

    #[test]
    fn perfect_estimator_has_no_relative_loss() {
        // Zero-variance truth and a zero-sigma estimator at coeff 1: the
        // estimate reproduces the true distribution exactly.
        let mut scenario = small_scenario(46);
        scenario.tasks = generate_synthetic_workload(
            46,
            &WorkloadParams {
                n_tasks: 6,
                n_configs: 4,
                mean_range: (2.0, 40.0),
                var_range: (0.0, 0.0),
                rate_range: (0.2, 0.8),
            },
        )
        .unwrap();
        scenario.agents = vec![AgentSpec {
            name: "estimator".into(),
            model: AgentModel::Estimator { coeff: 1.0, sigma: 0.0 },
        }];
        let metrics = run_market(&scenario).unwrap();
        for row in &metrics.rows {
            let rl = row.relative_loss.unwrap();
            assert!(rl.abs() < 1e-9, "relative loss {rl} on {}", row.task);
            assert_eq!(row.similarity, 1.0);
        }
    }

    #[test]
    fn relative_loss_arithmetic() {
        assert_eq!(relative_loss(100.0, 100.0).unwrap(), 0.0);
        assert_eq!(relative_loss(100.0, 75.0).unwrap(), 0.25);
        assert!(relative_loss(0.0, 1.0).is_err());
    }

    #[test]
    fn estimator_coeff_sweep_changes_estimates_not_tasks() {
        let mut scenario = small_scenario(47);
        scenario.agents = vec![AgentSpec {
            name: "estimator".into(),
            model: AgentModel::Estimator { coeff: 1.0, sigma: 0.2 },
        }];
        let rows = sweep(&scenario, SweepParameter::EstimatorCoeff, &[1.0, 1.5]).unwrap();
        assert_eq!(rows.len(), 2);
        let rl0: f64 =
            rows[0].metrics.rows.iter().map(|r| r.relative_loss.unwrap()).sum();
        let rl1: f64 =
            rows[1].metrics.rows.iter().map(|r| r.relative_loss.unwrap()).sum();
        assert!(rl1 > rl0, "worse estimates should lose more profit");
    }

    #[test]
    fn vcg_delta_profit_rises_then_falls() {
        let scenario = small_scenario(48);
        let deltas: Vec<f64> = (0..12).map(|k| k as f64 * 8.0).collect();
        let rows = sweep(&scenario, SweepParameter::VcgDelta, &deltas).unwrap();
        let profits: Vec<f64> =
            rows.iter().map(|r| r.metrics.agents[0].total_overall_profit).collect();
        let peak = profits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!(peak > 0 && peak < profits.len() - 1, "peak at {peak}: {profits:?}");
        assert_eq!(profits[0], 0.0);
    }

    #[test]
    fn benchmark_crossover_matches_hand_computation() {
        // Two configurations, menu order tries the terrible one first.
        let slow = Configuration::new("direct0", 0.1, CompletionHistogram::point_mass(200.0))
            .unwrap();
        let fast =
            Configuration::new("direct1", 0.5, CompletionHistogram::point_mass(10.0)).unwrap();
        let scenario = Scenario {
            seed: 1,
            tasks: vec![TaskSpec {
                id: "bench".into(),
                configs: vec![slow, fast],
                intensity: None,
                deadline: Some(50.0),
            }],
            time_slope: 1.0,
            price_slope: 1.0,
            demand: DemandCurve::new(100.0, 1.0).unwrap(),
            agents: vec![AgentSpec { name: "expert".into(), model: AgentModel::Expert }],
            trials_per_contract: 1,
        };
        // Market: expert picks the fast config; slack = 100 - 10 - 5 = 85,
        // markup 42.5, utility -(10 + 47.5) = -57.5 per repetition.
        // Benchmark: rep 1 tries (200 min, 20 c) at cost: -220; rep 2 tries
        // (10, 5): -15; afterwards -15 per rep. Crossover at the smallest r
        // with -235 - 15(r-2) >= -57.5 r, i.e. r >= 205/42.5 -> r = 5.
        let reps: Vec<f64> = (1..=8).map(f64::from).collect();
        let rows = sweep(&scenario, SweepParameter::BenchmarkRepetitions, &reps).unwrap();
        let crossover = rows
            .iter()
            .find(|row| {
                let bench = row
                    .metrics
                    .rows
                    .iter()
                    .find(|r| r.agent == "benchmark")
                    .unwrap()
                    .offered_utility;
                let market = row
                    .metrics
                    .rows
                    .iter()
                    .find(|r| r.agent == "market")
                    .unwrap()
                    .offered_utility;
                bench >= market
            })
            .map(|row| row.value);
        assert_eq!(crossover, Some(5.0));
    }

    #[test]
    fn unknown_fixed_config_is_an_error() {
        let mut scenario = small_scenario(49);
        scenario.agents = vec![AgentSpec {
            name: "naive".into(),
            model: AgentModel::NaiveFixed { config: "missing".into() },
        }];
        assert!(matches!(run_market(&scenario), Err(MarketError::UnknownId(_))));
    }
}
