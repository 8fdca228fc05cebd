//! Second-utility auction over contracts.
//!
//! Instead of posting prices, agents reveal cost-priced contracts and the
//! consumer takes the one with the highest expected utility, paying so
//! that the delivered utility equals the runner-up's. For a linear utility
//! `-a*t - b*p` the payment schedule is the winner's reported prices
//! shifted up by `delta / b`, where `delta` is the utility gap to the
//! runner-up. Under that rule, truthfully reporting cost is a weakly
//! dominant strategy.

use crate::contract::{Contract, IntervalStats, PriceSchedule};
use crate::error::{MarketError, Result};

/// One agent's sealed bid: a contract whose prices are its reported
/// per-interval costs. `true_stats` carries the private true costs; the
/// auction never reads them, only payoff accounting does.
#[derive(Debug, Clone, PartialEq)]
pub struct Bid {
    pub agent: String,
    pub contract: Contract,
    pub true_stats: IntervalStats,
}

impl Bid {
    pub fn new(
        agent: impl Into<String>,
        contract: Contract,
        true_stats: IntervalStats,
    ) -> Result<Self> {
        if contract.probs.len() != true_stats.len() {
            return Err(MarketError::Dimension {
                expected: contract.probs.len(),
                found: true_stats.len(),
            });
        }
        for i in 0..contract.probs.len() {
            if contract.prices.eval_interval(i, contract.expected_times[i]) < 0.0 {
                return Err(MarketError::Invalid(format!(
                    "bid of {} reports a negative price in interval {i}",
                    contract.task
                )));
            }
        }
        Ok(Bid { agent: agent.into(), contract, true_stats })
    }

    /// Expected utility of the reported contract under the linear utility.
    pub fn reported_utility(&self, time_slope: f64, price_slope: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.contract.probs.len() {
            let t = self.contract.expected_times[i];
            let price = self.contract.prices.eval_interval(i, t);
            total += self.contract.probs[i] * (-time_slope * t - price_slope * price);
        }
        total
    }

    /// Expected utility the contract would have at true-cost prices.
    pub fn cost_utility(&self, time_slope: f64, price_slope: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..self.contract.probs.len() {
            let t = self.contract.expected_times[i];
            total += self.contract.probs[i]
                * (-time_slope * t - price_slope * self.true_stats.expected_costs[i]);
        }
        total
    }
}

/// Result of one auction.
#[derive(Debug, Clone, PartialEq)]
pub struct VcgOutcome {
    pub winner: String,
    /// Utility gap between the winner's bid and the runner-up.
    pub delta: f64,
    /// The winner's reported prices shifted by `delta / price_slope`.
    pub payment: PriceSchedule,
    pub winner_utility: f64,
    pub runner_up_utility: f64,
    participants: Vec<String>,
    price_slope: f64,
}

impl VcgOutcome {
    pub fn participants(&self) -> &[String] {
        &self.participants
    }
}

/// Runs the auction: the bid with the greatest expected utility wins (ties
/// to the lowest agent id), and pays per the runner-up's utility.
pub fn run_vcg(bids: &[Bid], time_slope: f64, price_slope: f64) -> Result<VcgOutcome> {
    if bids.len() < 2 {
        return Err(MarketError::Empty("auction needs at least two bids"));
    }
    if !(price_slope > 0.0) {
        return Err(MarketError::Invalid(format!(
            "utility price slope {price_slope} must be positive"
        )));
    }
    let targets = &bids[0].contract.targets;
    for bid in bids {
        if bid.contract.targets != *targets {
            return Err(MarketError::Invalid(format!(
                "bid of {} uses different target times",
                bid.agent
            )));
        }
    }
    let mut ids: Vec<&str> = bids.iter().map(|b| b.agent.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != bids.len() {
        return Err(MarketError::Invalid("duplicate agent ids in the auction".into()));
    }

    let utilities: Vec<f64> =
        bids.iter().map(|b| b.reported_utility(time_slope, price_slope)).collect();
    let mut winner_idx = 0;
    for i in 1..bids.len() {
        let better = utilities[i] > utilities[winner_idx]
            || (utilities[i] == utilities[winner_idx] && bids[i].agent < bids[winner_idx].agent);
        if better {
            winner_idx = i;
        }
    }
    let runner_up = (0..bids.len())
        .filter(|&i| i != winner_idx)
        .map(|i| utilities[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let delta = utilities[winner_idx] - runner_up;
    let payment = bids[winner_idx].contract.prices.shifted(delta / price_slope);
    Ok(VcgOutcome {
        winner: bids[winner_idx].agent.clone(),
        delta,
        payment,
        winner_utility: utilities[winner_idx],
        runner_up_utility: runner_up,
        participants: bids.iter().map(|b| b.agent.clone()).collect(),
        price_slope,
    })
}

/// Expected payoff of a participant: the winner collects the payment minus
/// its true cost in expectation, losers get zero.
pub fn vcg_payoff(outcome: &VcgOutcome, bid: &Bid) -> Result<f64> {
    if !outcome.participants.contains(&bid.agent) {
        return Err(MarketError::UnknownId(bid.agent.clone()));
    }
    if bid.agent != outcome.winner {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..bid.contract.probs.len() {
        let t = bid.contract.expected_times[i];
        total += bid.contract.probs[i]
            * (outcome.payment.eval_interval(i, t) - bid.true_stats.expected_costs[i]);
    }
    Ok(total)
}

/// Expected utility the consumer actually receives from the winner after
/// paying the shifted schedule. Equals the runner-up's utility by
/// construction.
pub fn delivered_utility(outcome: &VcgOutcome, bids: &[Bid], time_slope: f64) -> Result<f64> {
    let bid = bids
        .iter()
        .find(|b| b.agent == outcome.winner)
        .ok_or_else(|| MarketError::UnknownId(outcome.winner.clone()))?;
    let mut total = 0.0;
    for i in 0..bid.contract.probs.len() {
        let t = bid.contract.expected_times[i];
        total += bid.contract.probs[i]
            * (-time_slope * t - outcome.price_slope * outcome.payment.eval_interval(i, t));
    }
    Ok(total)
}

/// Builds a contract whose prices are the agent's claimed per-interval
/// costs.
pub fn cost_priced_contract(
    task: impl Into<String>,
    targets: &[f64],
    probs: Vec<f64>,
    expected_times: Vec<f64>,
    reported_costs: &[f64],
) -> Result<Contract> {
    let prices = PriceSchedule::constant(targets.to_vec(), reported_costs)?;
    Contract::new(task, Default::default(), targets.to_vec(), probs, expected_times, prices)
}
