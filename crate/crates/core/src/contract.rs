//! Contracts and the statistics they are built from.
//!
//! For a configuration with completion-time distribution `f` and cost rate
//! `r`, the target times of a utility function split `[0, inf)` into
//! intervals. Per interval `i` the agent reports the probability `p_i` of
//! finishing there, the truncated-mean completion time `t_i`, and the
//! expected cost `c_i = r * t_i`. A contract bundles those with a price
//! function per interval; the consumer scores it by expected utility.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::histogram::CompletionHistogram;
use crate::utility::PiecewiseUtility;

const MASS_TOLERANCE: f64 = 1e-9;

/// A purchasable resource setting: unit cost rate plus the completion-time
/// distribution it induces for the task at hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub id: String,
    /// Cost to the agent, in cents per minute of execution.
    pub rate: f64,
    pub histogram: CompletionHistogram,
    /// Free-form labels, e.g. which workload profile this setting suits.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, String>,
}

impl Configuration {
    pub fn new(id: impl Into<String>, rate: f64, histogram: CompletionHistogram) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(MarketError::Invalid(format!("configuration rate {rate} must be positive")));
        }
        Ok(Configuration { id: id.into(), rate, histogram, tags: BTreeMap::new() })
    }

    pub fn with_tag(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.tags.insert(key.into(), value.into());
        self
    }
}

/// Per-interval probability, expected completion time, and expected cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub probs: Vec<f64>,
    pub expected_times: Vec<f64>,
    pub expected_costs: Vec<f64>,
}

impl IntervalStats {
    pub fn new(probs: Vec<f64>, expected_times: Vec<f64>, expected_costs: Vec<f64>) -> Result<Self> {
        if probs.len() != expected_times.len() || probs.len() != expected_costs.len() {
            return Err(MarketError::Dimension { expected: probs.len(), found: expected_times.len().max(expected_costs.len()) });
        }
        if probs.is_empty() {
            return Err(MarketError::Empty("interval stats"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MarketError::Invalid(format!("probabilities sum to {total}, expected 1")));
        }
        if probs.iter().any(|&p| !(0.0..=1.0 + MASS_TOLERANCE).contains(&p)) {
            return Err(MarketError::Invalid("probabilities must lie in [0, 1]".into()));
        }
        Ok(IntervalStats { probs, expected_times, expected_costs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Probability-weighted expected completion time.
    pub fn mean_time(&self) -> f64 {
        dot(&self.probs, &self.expected_times)
    }

    /// Probability-weighted expected cost.
    pub fn mean_cost(&self) -> f64 {
        dot(&self.probs, &self.expected_costs)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Splits a histogram along the target times and reports, per interval,
/// the contained mass, the truncated mean, and the expected cost under a
/// linear cost `rate * t`.
///
/// An interval holding no mass gets its left endpoint as expected time
/// (finite by construction, since the first target is 0). Those entries are
/// inert: they are always weighted by a zero probability.
pub fn interval_stats(
    hist: &CompletionHistogram,
    rate: f64,
    targets: &[f64],
) -> Result<IntervalStats> {
    validate_targets(targets)?;
    if !(rate > 0.0) {
        return Err(MarketError::Invalid(format!("rate {rate} must be positive")));
    }
    let n = targets.len() - 1;
    let mut mass = vec![0.0; n];
    let mut moment = vec![0.0; n];
    for bin in hist.bins() {
        if bin.is_point() {
            let i = interval_of(targets, bin.start);
            mass[i] += bin.mass;
            moment[i] += bin.mass * bin.start;
        } else {
            // Split the bin exactly across the intervals it overlaps.
            let density = bin.mass / (bin.end - bin.start);
            for i in 0..n {
                let lo = bin.start.max(targets[i]);
                let hi = bin.end.min(targets[i + 1]);
                if hi > lo {
                    mass[i] += density * (hi - lo);
                    moment[i] += density * 0.5 * (hi * hi - lo * lo);
                }
            }
        }
    }
    let mut probs = Vec::with_capacity(n);
    let mut times = Vec::with_capacity(n);
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        let t = if mass[i] > 0.0 { moment[i] / mass[i] } else { targets[i] };
        probs.push(mass[i]);
        times.push(t);
        costs.push(rate * t);
    }
    IntervalStats::new(probs, times, costs)
}

pub(crate) fn validate_targets(targets: &[f64]) -> Result<()> {
    if targets.len() < 2 {
        return Err(MarketError::Invalid("need at least two targets".into()));
    }
    if targets[0] != 0.0 {
        return Err(MarketError::Invalid("first target must be 0".into()));
    }
    if *targets.last().unwrap() != f64::INFINITY {
        return Err(MarketError::Invalid("last target must be infinite".into()));
    }
    for w in targets.windows(2) {
        if !(w[0] < w[1]) {
            return Err(MarketError::Invalid("targets must be strictly increasing".into()));
        }
    }
    Ok(())
}

fn interval_of(targets: &[f64], t: f64) -> usize {
    match targets[1..].iter().position(|&tau| t < tau) {
        Some(i) => i,
        None => targets.len() - 2,
    }
}

/// Per-interval linear price functions `d_i - e_i * t`, anchored to the
/// same target times as the contract they belong to. Prices produced by
/// the optimizer are the constant special case `e_i = 0`.
///
/// JSON carries only the interior targets; the leading zero and trailing
/// infinity are implied (JSON has no infinity literal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriceScheduleRepr", into = "PriceScheduleRepr")]
pub struct PriceSchedule {
    targets: Vec<f64>,
    /// `(intercept, time_slope)` per interval: price(t) = d - e * t.
    segments: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct PriceScheduleRepr {
    interior_targets: Vec<f64>,
    segments: Vec<(f64, f64)>,
}

impl TryFrom<PriceScheduleRepr> for PriceSchedule {
    type Error = MarketError;

    fn try_from(repr: PriceScheduleRepr) -> Result<Self> {
        PriceSchedule::from_segments(full_targets(&repr.interior_targets), repr.segments)
    }
}

impl From<PriceSchedule> for PriceScheduleRepr {
    fn from(p: PriceSchedule) -> Self {
        PriceScheduleRepr {
            interior_targets: interior_targets(&p.targets),
            segments: p.segments,
        }
    }
}

pub(crate) fn full_targets(interior: &[f64]) -> Vec<f64> {
    let mut targets = Vec::with_capacity(interior.len() + 2);
    targets.push(0.0);
    targets.extend_from_slice(interior);
    targets.push(f64::INFINITY);
    targets
}

pub(crate) fn interior_targets(targets: &[f64]) -> Vec<f64> {
    targets[1..targets.len() - 1].to_vec()
}

impl PriceSchedule {
    pub fn from_segments(targets: Vec<f64>, segments: Vec<(f64, f64)>) -> Result<Self> {
        validate_targets(&targets)?;
        if segments.len() != targets.len() - 1 {
            return Err(MarketError::Dimension { expected: targets.len() - 1, found: segments.len() });
        }
        Ok(PriceSchedule { targets, segments })
    }

    /// Constant price per interval.
    pub fn constant(targets: Vec<f64>, prices: &[f64]) -> Result<Self> {
        let segments = prices.iter().map(|&p| (p, 0.0)).collect();
        Self::from_segments(targets, segments)
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn segments(&self) -> &[(f64, f64)] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Price for a completion at time `t`, by interval lookup.
    pub fn eval(&self, t: f64) -> f64 {
        let (d, e) = self.segments[interval_of(&self.targets, t)];
        d - e * t
    }

    /// Price of interval `i` evaluated at time `t`.
    pub fn eval_interval(&self, i: usize, t: f64) -> f64 {
        let (d, e) = self.segments[i];
        d - e * t
    }

    /// A copy with every intercept shifted by `delta`.
    pub fn shifted(&self, delta: f64) -> PriceSchedule {
        PriceSchedule {
            targets: self.targets.clone(),
            segments: self.segments.iter().map(|&(d, e)| (d + delta, e)).collect(),
        }
    }
}

/// The agreement an agent returns to a consumer: task identity, the data
/// statistics the pricing relied on, and per target interval the claimed
/// probability, expected completion time, and price function.
///
/// As with schedules, JSON carries only the interior targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ContractRepr", into = "ContractRepr")]
pub struct Contract {
    pub task: String,
    /// Opaque statistics about the input data; carried, never interpreted.
    pub stats: BTreeMap<String, String>,
    pub targets: Vec<f64>,
    pub probs: Vec<f64>,
    pub expected_times: Vec<f64>,
    pub prices: PriceSchedule,
}

#[derive(Serialize, Deserialize)]
struct ContractRepr {
    task: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    stats: BTreeMap<String, String>,
    interior_targets: Vec<f64>,
    probs: Vec<f64>,
    expected_times: Vec<f64>,
    prices: PriceSchedule,
}

impl TryFrom<ContractRepr> for Contract {
    type Error = MarketError;

    fn try_from(repr: ContractRepr) -> Result<Self> {
        Contract::new(
            repr.task,
            repr.stats,
            full_targets(&repr.interior_targets),
            repr.probs,
            repr.expected_times,
            repr.prices,
        )
    }
}

impl From<Contract> for ContractRepr {
    fn from(c: Contract) -> Self {
        ContractRepr {
            task: c.task,
            stats: c.stats,
            interior_targets: interior_targets(&c.targets),
            probs: c.probs,
            expected_times: c.expected_times,
            prices: c.prices,
        }
    }
}

impl Contract {
    pub fn new(
        task: impl Into<String>,
        stats: BTreeMap<String, String>,
        targets: Vec<f64>,
        probs: Vec<f64>,
        expected_times: Vec<f64>,
        prices: PriceSchedule,
    ) -> Result<Self> {
        validate_targets(&targets)?;
        let n = targets.len() - 1;
        if probs.len() != n {
            return Err(MarketError::Dimension { expected: n, found: probs.len() });
        }
        if expected_times.len() != n {
            return Err(MarketError::Dimension { expected: n, found: expected_times.len() });
        }
        if prices.len() != n {
            return Err(MarketError::Dimension { expected: n, found: prices.len() });
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MarketError::Invalid(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Contract { task: task.into(), stats, targets, probs, expected_times, prices })
    }

    /// Builds a contract directly from interval statistics and a schedule.
    pub fn from_stats(
        task: impl Into<String>,
        targets: &[f64],
        stats: &IntervalStats,
        prices: PriceSchedule,
    ) -> Result<Self> {
        Contract::new(
            task,
            BTreeMap::new(),
            targets.to_vec(),
            stats.probs.clone(),
            stats.expected_times.clone(),
            prices,
        )
    }
}

/// Expected utility of a contract: sum over intervals of
/// `p_i * u_i(t_i, price_i(t_i))`. The contract must be built against the
/// same target times as the utility function.
pub fn expected_contract_utility(contract: &Contract, utility: &PiecewiseUtility) -> Result<f64> {
    if contract.targets.len() != utility.targets().len()
        || contract.targets.iter().zip(utility.targets()).any(|(a, b)| a != b)
    {
        return Err(MarketError::Dimension {
            expected: utility.targets().len(),
            found: contract.targets.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..contract.probs.len() {
        let t = contract.expected_times[i];
        let price = contract.prices.eval_interval(i, t);
        total += contract.probs[i] * utility.pieces()[i].eval(t, price);
    }
    Ok(total)
}

/// Index of the contract with the greatest expected utility; ties go to
/// the lowest index.
pub fn select_best_contract(contracts: &[Contract], utility: &PiecewiseUtility) -> Result<usize> {
    if contracts.is_empty() {
        return Err(MarketError::Empty("contract list"));
    }
    let mut best = 0;
    let mut best_value = expected_contract_utility(&contracts[0], utility)?;
    for (i, contract) in contracts.iter().enumerate().skip(1) {
        let value = expected_contract_utility(contract, utility)?;
        if value > best_value {
            best = i;
            best_value = value;
        }
    }
    Ok(best)
}
