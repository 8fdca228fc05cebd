//! Shared fixtures for the integration suites.

// Each integration test binary compiles this module; not every binary
// uses every fixture.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use taskmarket::contract::IntervalStats;
use taskmarket::pricing::demand_slack;
use taskmarket::simulator::{
    generate_synthetic_workload, AgentModel, AgentSpec, Scenario, WorkloadParams,
};
use taskmarket::taskgraph::{NodeOption, TaskGraph, TaskNode};
use taskmarket::utility::{DemandCurve, UtilityPiece};

/// A random linear pricing instance inside the regime where no interval's
/// demand clamps anywhere on the searched markup span, so the clamped grid
/// search and the unclamped closed form optimize the same function.
pub fn random_linear_instance(
    rng: &mut ChaCha8Rng,
) -> (IntervalStats, Vec<f64>, f64, f64, DemandCurve) {
    loop {
        let n = rng.random_range(1..5usize);
        let mut interior: Vec<f64> = (0..n - 1).map(|_| rng.random_range(1.0..40.0)).collect();
        interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
        interior.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        let mut targets = vec![0.0];
        targets.extend_from_slice(&interior);
        targets.push(f64::INFINITY);
        let n = targets.len() - 1;

        let mut probs: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let times: Vec<f64> = (0..n)
            .map(|i| {
                let lo = targets[i];
                let hi = if targets[i + 1].is_finite() { targets[i + 1] } else { lo + 10.0 };
                rng.random_range(lo..hi)
            })
            .collect();
        let rate = rng.random_range(0.05..0.5);
        let costs: Vec<f64> = times.iter().map(|t| rate * t).collect();
        let stats = IntervalStats::new(probs, times, costs).unwrap();

        let a_u = rng.random_range(0.2..2.0);
        let b_u = rng.random_range(0.2..2.0);
        let demand =
            DemandCurve::new(rng.random_range(60.0..160.0), rng.random_range(1.0..4.0)).unwrap();

        let piece = UtilityPiece::new(0.0, a_u, b_u);
        let slack = demand_slack(&stats, &piece, &demand);
        if slack <= 1.0 {
            continue;
        }
        let (alpha_m, beta_m) = demand.against(a_u, b_u);
        let span_markup = slack / beta_m;
        let ok = (0..stats.len()).all(|i| {
            demand.intercept
                - alpha_m * stats.expected_times[i]
                - beta_m * (stats.expected_costs[i] + span_markup)
                >= 0.0
        });
        if ok {
            return (stats, targets, a_u, b_u, demand);
        }
    }
}

/// Random in-tree: every node except the root has exactly one consumer
/// with a smaller index, so predecessor subgraphs never overlap and the
/// dynamic program is exactly optimal.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize, max_options: usize) -> TaskGraph {
    let n = rng.random_range(1..=max_nodes);
    let nodes: Vec<TaskNode> = (0..n)
        .map(|i| {
            let k = rng.random_range(1..=max_options);
            let options = (0..k)
                .map(|_| NodeOption {
                    time: rng.random_range(1..=12) as f64,
                    cost: rng.random_range(1..=12) as f64,
                })
                .collect();
            TaskNode::new(format!("n{i:02}"), options)
        })
        .collect();
    let edges: Vec<(String, String)> = (1..n)
        .map(|i| {
            let parent = rng.random_range(0..i);
            (format!("n{i:02}"), format!("n{parent:02}"))
        })
        .collect();
    TaskGraph::new(nodes, &edges).unwrap()
}

/// Exhaustive 0-1 knapsack optimum by subset enumeration.
pub fn brute_force_knapsack(items: &[(f64, f64)], capacity: f64) -> f64 {
    let n = items.len();
    let mut best = 0.0f64;
    for mask in 0..(1u32 << n) {
        let mut w = 0.0;
        let mut v = 0.0;
        for (i, &(wi, vi)) in items.iter().enumerate() {
            if mask & (1 << i) != 0 {
                w += wi;
                v += vi;
            }
        }
        if w <= capacity {
            best = best.max(v);
        }
    }
    best
}

/// A market scenario whose every task and configuration prices in the
/// positive-demand branch, so the configuration-dominance ordering holds
/// by construction: one expert plus `n_naive` fixed-configuration agents.
pub fn perfect_estimate_scenario(seed: u64, n_tasks: usize, n_naive: usize) -> Scenario {
    let tasks = generate_synthetic_workload(
        seed,
        &WorkloadParams {
            n_tasks,
            n_configs: 5,
            mean_range: (5.0, 30.0),
            var_range: (0.1, 2.0),
            rate_range: (0.2, 1.0),
        },
    )
    .unwrap();
    let mut agents = vec![AgentSpec { name: "expert".into(), model: AgentModel::Expert }];
    for i in 0..n_naive {
        agents.push(AgentSpec {
            name: format!("naive{i}"),
            model: AgentModel::NaiveFixed { config: format!("cfg{i}") },
        });
    }
    Scenario {
        seed,
        tasks,
        time_slope: 1.0,
        price_slope: 1.0,
        demand: DemandCurve::new(100.0, 1.0).unwrap(),
        agents,
        trials_per_contract: 1,
    }
}
