//! Command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable or invalid input documents,
//! 3 infeasible pricing (no demand at any profitable price), 4 exhaustive
//! search above its cap. Results go to stdout (JSON or CSV), diagnostics
//! to stderr.

use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use taskmarket::bertrand::{
    iterate_to_equilibrium, nash_equilibrium, AgentDemand, DuopolyParams, UpdateSchedule,
    DEFAULT_MAX_STEPS, DEFAULT_TOL,
};
use taskmarket::contract::{interval_stats, Contract};
use taskmarket::error::MarketError;
use taskmarket::files::{
    dag_profit, fmt_sig, load_dag, load_scenario, load_workload, write_metrics_csv,
    write_summary_csv,
};
use taskmarket::pricing::{select_configuration, PricingConstants, PricingOutcome};
use taskmarket::risk::{price_risk_aware, RiskBounds, RiskParams};
use taskmarket::simulator::{run_market, sweep, Metrics, SweepParameter};
use taskmarket::taskgraph::{
    price_exhaustive, price_fine_grained_dp, price_greedy, Assignment, DEFAULT_SEARCH_CAP,
};
use taskmarket::utility::PiecewiseUtility;

const EXIT_FILE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CAP: u8 = 4;

#[derive(Parser)]
#[command(name = "taskmarket", version, about = "Contract pricing and market simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one task from a workload document.
    Price(PriceArgs),
    /// Assign configurations to a task DAG.
    Plan(PlanArgs),
    /// Run a market scenario and emit metrics CSV.
    Simulate(SimulateArgs),
    /// Sweep the second-utility auction over utility gaps.
    Vcg(VcgArgs),
    /// Duopoly equilibrium and best-response iteration.
    Bertrand(BertrandArgs),
}

#[derive(Args)]
struct PriceArgs {
    /// Workload document (JSON).
    workload: PathBuf,
    /// Task id to price.
    #[arg(long)]
    task: String,
    /// Risk weight; 0 prices risk-agnostically.
    #[arg(long, default_value_t = 0.0)]
    risk_lambda: f64,
    /// Markup floor, cents.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Strategy {
    Dp,
    Greedy,
    Search,
}

#[derive(Args)]
struct PlanArgs {
    /// DAG document (JSON).
    dag: PathBuf,
    #[arg(long, value_enum, default_value_t = Strategy::Dp)]
    strategy: Strategy,
    /// Time grid step in minutes for the dynamic program.
    #[arg(long, default_value_t = 1.0)]
    granularity: f64,
    /// Assignment cap for exhaustive search.
    #[arg(long, default_value_t = DEFAULT_SEARCH_CAP)]
    cap: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario document (JSON).
    scenario: PathBuf,
    /// Metrics CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the per-agent summary CSV here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Sweep a parameter over comma-separated values, e.g.
    /// `--sweep risk-lambda 0,1,10`.
    #[arg(long, num_args = 2, value_names = ["PARAM", "VALUES"])]
    sweep: Option<Vec<String>>,
}

#[derive(Args)]
struct VcgArgs {
    /// Scenario document (JSON).
    scenario: PathBuf,
    /// Comma-separated utility gaps to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
    /// Metrics CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BertrandArgs {
    /// Demand intercept of agent one.
    #[arg(long)]
    intercept: f64,
    /// Own-price demand slope of agent one.
    #[arg(long)]
    own_slope: f64,
    /// Rival-price demand slope of agent one.
    #[arg(long)]
    cross_slope: f64,
    /// Agent two's parameters; agent one's when omitted.
    #[arg(long)]
    intercept2: Option<f64>,
    #[arg(long)]
    own_slope2: Option<f64>,
    #[arg(long)]
    cross_slope2: Option<f64>,
    /// Initial prices, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..=2, default_values_t = [0.0, 0.0])]
    init: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ScheduleKind::Sync)]
    schedule: ScheduleKind,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_STEPS)]
    max_steps: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ScheduleKind {
    Sync,
    Alternating,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Price(args) => cmd_price(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Vcg(args) => cmd_vcg(args),
        Command::Bertrand(args) => cmd_bertrand(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    code
}

fn cmd_price(args: PriceArgs) -> Result<(), u8> {
    let workload = load_workload(&args.workload).map_err(|e| fail(EXIT_FILE, e))?;
    let task = workload
        .tasks
        .iter()
        .find(|t| t.id == args.task)
        .ok_or_else(|| fail(EXIT_FILE, format!("task {} not in workload", args.task)))?;
    let consts = PricingConstants::new(args.epsilon).map_err(|e| fail(EXIT_FILE, e))?;
    let utility =
        PiecewiseUtility::linear(workload.utility.time_slope, workload.utility.price_slope)
            .map_err(|e| fail(EXIT_FILE, e))?;
    let targets = task.targets();
    let (config, outcome) =
        select_configuration(&task.configs, &targets, &utility, &workload.demand, &consts)
            .map_err(|e| fail(EXIT_FILE, e))?;
    let stats = interval_stats(&config.histogram, config.rate, &targets)
        .map_err(|e| fail(EXIT_FILE, e))?;
    let outcome: PricingOutcome = if args.risk_lambda > 0.0 {
        let bounds = RiskBounds::symmetric_fraction(&stats, 0.1);
        let params = RiskParams { lambda: args.risk_lambda, ..RiskParams::default() };
        price_risk_aware(
            &stats,
            &targets,
            &bounds,
            &params,
            workload.utility.time_slope,
            workload.utility.price_slope,
            &workload.demand,
            &consts,
        )
        .map_err(|e| fail(EXIT_FILE, e))?
    } else {
        outcome
    };
    if outcome.expected_demand <= 0.0 {
        return Err(fail(
            EXIT_INFEASIBLE,
            format!("task {}: no demand at any profitable price", task.id),
        ));
    }
    let contract = Contract::from_stats(task.id.clone(), &targets, &stats, outcome.prices.clone())
        .map_err(|e| fail(EXIT_FILE, e))?;
    let document = serde_json::json!({
        "configuration": config.id,
        "contract": contract,
        "outcome": outcome,
    });
    println!("{}", serde_json::to_string_pretty(&document).expect("serializable document"));
    Ok(())
}

fn cmd_plan(args: PlanArgs) -> Result<(), u8> {
    let (file, graph) = load_dag(&args.dag).map_err(|e| fail(EXIT_FILE, e))?;
    let profit = dag_profit(file.utility, file.demand);
    let assignment: Assignment = match args.strategy {
        Strategy::Dp => price_fine_grained_dp(&graph, &profit, args.granularity)
            .map_err(|e| fail(EXIT_FILE, e))?,
        Strategy::Greedy => price_greedy(&graph, &profit),
        Strategy::Search => price_exhaustive(&graph, &profit, args.cap).map_err(|e| match e {
            MarketError::CapExceeded { .. } => fail(EXIT_CAP, e),
            other => fail(EXIT_FILE, other),
        })?,
    };
    let nodes: Vec<serde_json::Value> = (0..graph.len())
        .map(|v| {
            let opt = graph.options(v)[assignment.choices[v]];
            serde_json::json!({
                "id": graph.names()[v],
                "option": assignment.choices[v],
                "time": opt.time,
                "cost": opt.cost,
            })
        })
        .collect();
    let strategy = match args.strategy {
        Strategy::Dp => "dp",
        Strategy::Greedy => "greedy",
        Strategy::Search => "search",
    };
    let document = serde_json::json!({
        "strategy": strategy,
        "nodes": nodes,
        "total_time": assignment.total_time,
        "total_cost": assignment.total_cost,
        "profit": assignment.profit,
    });
    println!("{}", serde_json::to_string_pretty(&document).expect("serializable document"));
    Ok(())
}

fn write_csv_blocks(
    out: Option<&PathBuf>,
    summary: Option<&PathBuf>,
    blocks: &[(Option<f64>, &Metrics)],
) -> Result<(), u8> {
    match out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| fail(EXIT_FILE, format!("{}: {e}", path.display())))?;
            write_metrics_csv(file, blocks).map_err(|e| fail(EXIT_FILE, e))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_metrics_csv(stdout.lock(), blocks).map_err(|e| fail(EXIT_FILE, e))?;
        }
    }
    if let Some(path) = summary {
        let file =
            File::create(path).map_err(|e| fail(EXIT_FILE, format!("{}: {e}", path.display())))?;
        write_summary_csv(file, blocks).map_err(|e| fail(EXIT_FILE, e))?;
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), u8> {
    let scenario = load_scenario(&args.scenario).map_err(|e| fail(EXIT_FILE, e))?;
    match &args.sweep {
        None => {
            let metrics = run_market(&scenario).map_err(|e| fail(EXIT_FILE, e))?;
            write_csv_blocks(args.out.as_ref(), args.summary.as_ref(), &[(None, &metrics)])
        }
        Some(parts) => {
            let parameter = SweepParameter::parse(&parts[0]).map_err(|e| fail(EXIT_FILE, e))?;
            let values: Vec<f64> = parts[1]
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| fail(EXIT_FILE, format!("bad sweep value: {e}")))?;
            let rows = sweep(&scenario, parameter, &values).map_err(|e| fail(EXIT_FILE, e))?;
            let blocks: Vec<(Option<f64>, &Metrics)> =
                rows.iter().map(|r| (Some(r.value), &r.metrics)).collect();
            write_csv_blocks(args.out.as_ref(), args.summary.as_ref(), &blocks)
        }
    }
}

fn cmd_vcg(args: VcgArgs) -> Result<(), u8> {
    let scenario = load_scenario(&args.scenario).map_err(|e| fail(EXIT_FILE, e))?;
    let rows =
        sweep(&scenario, SweepParameter::VcgDelta, &args.deltas).map_err(|e| fail(EXIT_FILE, e))?;
    let blocks: Vec<(Option<f64>, &Metrics)> =
        rows.iter().map(|r| (Some(r.value), &r.metrics)).collect();
    write_csv_blocks(args.out.as_ref(), None, &blocks)
}

fn cmd_bertrand(args: BertrandArgs) -> Result<(), u8> {
    let one = AgentDemand {
        intercept: args.intercept,
        own_slope: args.own_slope,
        cross_slope: args.cross_slope,
    };
    let two = AgentDemand {
        intercept: args.intercept2.unwrap_or(args.intercept),
        own_slope: args.own_slope2.unwrap_or(args.own_slope),
        cross_slope: args.cross_slope2.unwrap_or(args.cross_slope),
    };
    let params = DuopolyParams::new([one, two]).map_err(|e| fail(EXIT_FILE, e))?;
    let ne = nash_equilibrium(&params).map_err(|e| fail(EXIT_FILE, e))?;
    let schedule = match args.schedule {
        ScheduleKind::Sync => UpdateSchedule::synchronized(),
        ScheduleKind::Alternating => UpdateSchedule::alternating(),
    };
    let init = (
        args.init.first().copied().unwrap_or(0.0),
        args.init.get(1).copied().unwrap_or(0.0),
    );
    let ((m1, m2), steps) =
        iterate_to_equilibrium(&params, &schedule, init, args.tol, args.max_steps)
            .map_err(|e| fail(EXIT_FILE, e))?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["ne_price_one", "ne_price_two", "iterated_one", "iterated_two", "steps"])
        .and_then(|_| {
            w.write_record([
                fmt_sig(ne.0),
                fmt_sig(ne.1),
                fmt_sig(m1),
                fmt_sig(m2),
                steps.to_string(),
            ])
        })
        .and_then(|_| w.flush().map_err(Into::into))
        .map_err(|e| fail(EXIT_FILE, e))?;
    Ok(())
}
