//! Risk-aware pricing.
//!
//! An agent's estimate of the completion-time distribution can be wrong.
//! The loss of a schedule `pi` against true statistics `s* = (p*, t*, c*)`
//! is the profit the optimal schedule for `s*` would have made minus what
//! `pi` makes against `s*`; risk is the maximum loss over a box of
//! deviations around the nominal statistics. Risk-aware pricing maximizes
//! `overall_profit - lambda * risk` over the uniform-markup family.
//!
//! All profit algebra in this module is the unclamped linear form the
//! closed-form optimum is exact for, so the inner "optimal response"
//! really is optimal and losses are never spuriously negative. Reported
//! outcomes still use the standard clamped-demand bookkeeping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contract::{IntervalStats, PriceSchedule};
use crate::error::{MarketError, Result};
use crate::pricing::{expected_profit, price_linear, PricingConstants, PricingOutcome};
use crate::utility::DemandCurve;

/// Componentwise bounds on how far true expected times and costs may sit
/// from the nominal estimate: `lo_i <= true_i - nominal_i <= hi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskBounds {
    pub time_low: Vec<f64>,
    pub time_high: Vec<f64>,
    pub cost_low: Vec<f64>,
    pub cost_high: Vec<f64>,
}

impl RiskBounds {
    pub fn new(
        time_low: Vec<f64>,
        time_high: Vec<f64>,
        cost_low: Vec<f64>,
        cost_high: Vec<f64>,
    ) -> Result<Self> {
        let n = time_low.len();
        if time_high.len() != n || cost_low.len() != n || cost_high.len() != n {
            return Err(MarketError::Dimension { expected: n, found: time_high.len() });
        }
        for i in 0..n {
            if time_low[i] > time_high[i] || cost_low[i] > cost_high[i] {
                return Err(MarketError::Invalid(format!("bounds inverted at interval {i}")));
            }
        }
        Ok(RiskBounds { time_low, time_high, cost_low, cost_high })
    }

    /// No deviation allowed.
    pub fn zero(n: usize) -> Self {
        RiskBounds {
            time_low: vec![0.0; n],
            time_high: vec![0.0; n],
            cost_low: vec![0.0; n],
            cost_high: vec![0.0; n],
        }
    }

    /// Symmetric box of the given fraction of the nominal values. The
    /// default when an agent has no error history is 10 percent.
    pub fn symmetric_fraction(stats: &IntervalStats, fraction: f64) -> Self {
        let t: Vec<f64> = stats.expected_times.iter().map(|x| fraction * x).collect();
        let c: Vec<f64> = stats.expected_costs.iter().map(|x| fraction * x).collect();
        RiskBounds {
            time_low: t.iter().map(|x| -x).collect(),
            time_high: t,
            cost_low: c.iter().map(|x| -x).collect(),
            cost_high: c,
        }
    }

    /// One-sided box for an agent suspecting overestimation by `factor`:
    /// the truth may sit as low as `nominal / factor`, never higher.
    pub fn overestimation(stats: &IntervalStats, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return Err(MarketError::Invalid(format!(
                "overestimation factor {factor} must be at least 1"
            )));
        }
        let down = 1.0 - 1.0 / factor;
        Self::new(
            stats.expected_times.iter().map(|x| -down * x).collect(),
            vec![0.0; stats.len()],
            stats.expected_costs.iter().map(|x| -down * x).collect(),
            vec![0.0; stats.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.time_low.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_low.is_empty()
    }

    /// A zero box declares the estimate exact; the adversary then has no
    /// freedom at all, probabilities included.
    pub fn is_zero(&self) -> bool {
        let zeros = |v: &[f64]| v.iter().all(|&x| x == 0.0);
        zeros(&self.time_low)
            && zeros(&self.time_high)
            && zeros(&self.cost_low)
            && zeros(&self.cost_high)
    }
}

/// Search resolution for the risk programs.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskParams {
    /// Weight of the risk term in the objective. Zero recovers the
    /// risk-agnostic closed form exactly.
    pub lambda: f64,
    /// Grid points per time axis.
    pub time_grid: usize,
    /// Grid points per cost axis.
    pub cost_grid: usize,
    /// Probability perturbations sampled besides the nominal vector.
    pub prob_samples: usize,
    /// Total-variation radius of probability perturbations.
    pub prob_radius: f64,
    /// Markup candidates for the outer optimization.
    pub markup_grid: usize,
    /// Seed for the deterministic probability perturbations.
    pub seed: u64,
    /// Cap on enumerated box points before sampling kicks in.
    pub box_cap: usize,
}

impl Default for RiskParams {
    fn default() -> Self {
        RiskParams {
            lambda: 0.0,
            time_grid: 3,
            cost_grid: 3,
            prob_samples: 8,
            prob_radius: 0.2,
            markup_grid: 96,
            seed: 0x5eed,
            box_cap: 20_000,
        }
    }
}

impl RiskParams {
    pub fn with_lambda(lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(MarketError::Invalid(format!("lambda {lambda} must be nonnegative")));
        }
        Ok(RiskParams { lambda, ..RiskParams::default() })
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) {
            return Err(MarketError::Invalid(format!(
                "lambda {} must be nonnegative",
                self.lambda
            )));
        }
        if self.time_grid < 2 || self.cost_grid < 2 || self.prob_samples < 2 {
            return Err(MarketError::Invalid("search resolutions must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.prob_radius) {
            return Err(MarketError::Invalid(format!(
                "probability radius {} must lie in [0, 1]",
                self.prob_radius
            )));
        }
        Ok(())
    }
}

/// Unclamped overall profit at a uniform markup over true costs.
fn unclamped_profit(markup: f64, slack: f64, beta_m: f64) -> f64 {
    markup * (slack - beta_m * markup)
}

struct LinearMarket {
    alpha_m: f64,
    beta_m: f64,
    gamma: f64,
    epsilon: f64,
}

impl LinearMarket {
    fn slack(&self, wt: f64, wc: f64) -> f64 {
        self.gamma - self.alpha_m * wt - self.beta_m * wc
    }

    /// Profit of the best feasible schedule against the given statistics.
    fn optimal_profit(&self, wt: f64, wc: f64) -> f64 {
        let slack = self.slack(wt, wc);
        if slack > 0.0 {
            slack * slack / (4.0 * self.beta_m)
        } else {
            unclamped_profit(self.epsilon, slack, self.beta_m)
        }
    }
}

/// Evenly spaced offsets between the bounds, with zero always included so
/// the nominal point is a candidate and nested boxes share grid points.
fn axis_offsets(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(points + 1);
    if points == 1 || hi == lo {
        out.push(lo);
    } else {
        let step = (hi - lo) / (points - 1) as f64;
        for k in 0..points {
            out.push(lo + k as f64 * step);
        }
    }
    if !out.contains(&0.0) {
        out.push(0.0);
    }
    out.sort_by(|a, b| a.total_cmp(b));
    out.dedup();
    out
}

/// Deterministic probability perturbations within a total-variation radius:
/// each sample moves mass from one interval to another.
fn prob_candidates(probs: &[f64], samples: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut out = vec![probs.to_vec()];
    let n = probs.len();
    if n < 2 || radius <= 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let mut p = probs.to_vec();
        let from = rng.random_range(0..n);
        let mut to = rng.random_range(0..n - 1);
        if to >= from {
            to += 1;
        }
        let amount = rng.random_range(0.0..radius).min(p[from]);
        p[from] -= amount;
        p[to] += amount;
        out.push(p);
    }
    out
}

fn box_candidates(
    stats: &IntervalStats,
    bounds: &RiskBounds,
    params: &RiskParams,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = stats.len();
    let t_axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            axis_offsets(bounds.time_low[i], bounds.time_high[i], params.time_grid)
                .into_iter()
                .map(|d| (stats.expected_times[i] + d).max(0.0))
                .collect()
        })
        .collect();
    let c_axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            axis_offsets(bounds.cost_low[i], bounds.cost_high[i], params.cost_grid)
                .into_iter()
                .map(|d| (stats.expected_costs[i] + d).max(0.0))
                .collect()
        })
        .collect();

    let total: f64 = t_axes
        .iter()
        .chain(c_axes.iter())
        .map(|axis| axis.len() as f64)
        .product();

    let mut out = Vec::new();
    if total <= params.box_cap as f64 {
        // Full cartesian enumeration via odometer.
        let axes: Vec<&Vec<f64>> = t_axes.iter().chain(c_axes.iter()).collect();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let t: Vec<f64> = (0..n).map(|i| axes[i][idx[i]]).collect();
            let c: Vec<f64> = (0..n).map(|i| axes[n + i][idx[n + i]]).collect();
            out.push((t, c));
            let mut k = 0;
            loop {
                if k == axes.len() {
                    return out;
                }
                idx[k] += 1;
                if idx[k] < axes[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }
    // Too many combinations: nominal, the uniform corners, and a seeded
    // sample of grid points.
    let pick = |axes: &[Vec<f64>], f: fn(&Vec<f64>) -> f64| -> Vec<f64> {
        axes.iter().map(f).collect()
    };
    let first = |axis: &Vec<f64>| axis[0];
    let last = |axis: &Vec<f64>| *axis.last().unwrap();
    out.push((stats.expected_times.clone(), stats.expected_costs.clone()));
    out.push((pick(&t_axes, first), pick(&c_axes, first)));
    out.push((pick(&t_axes, first), pick(&c_axes, last)));
    out.push((pick(&t_axes, last), pick(&c_axes, first)));
    out.push((pick(&t_axes, last), pick(&c_axes, last)));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9_7f4a_7c15);
    while out.len() < params.box_cap {
        let t: Vec<f64> =
            t_axes.iter().map(|axis| axis[rng.random_range(0..axis.len())]).collect();
        let c: Vec<f64> =
            c_axes.iter().map(|axis| axis[rng.random_range(0..axis.len())]).collect();
        out.push((t, c));
    }
    out
}

/// Approximate maximum loss of the given schedule over the deviation box.
///
/// For every candidate true statistic the optimal response is closed-form,
/// so only the box and the probability simplex are searched. The result is
/// a lower bound on the exact maximum and is never negative.
#[allow(clippy::too_many_arguments)]
pub fn worst_case_loss(
    prices: &PriceSchedule,
    stats: &IntervalStats,
    bounds: &RiskBounds,
    params: &RiskParams,
    time_slope: f64,
    price_slope: f64,
    demand: &DemandCurve,
    consts: &PricingConstants,
) -> Result<f64> {
    params.validate()?;
    if bounds.len() != stats.len() {
        return Err(MarketError::Dimension { expected: stats.len(), found: bounds.len() });
    }
    if expected_profit(prices, stats)? <= 0.0 {
        return Err(MarketError::Invalid(
            "schedule is not profitable on nominal statistics".into(),
        ));
    }
    let (alpha_m, beta_m) = demand.against(time_slope, price_slope);
    if !(beta_m > 0.0) {
        return Err(MarketError::Invalid("demand must be price sensitive".into()));
    }
    let market =
        LinearMarket { alpha_m, beta_m, gamma: demand.intercept, epsilon: consts.epsilon };

    let points = box_candidates(stats, bounds, params);
    let probs = if bounds.is_zero() {
        vec![stats.probs.clone()]
    } else {
        prob_candidates(&stats.probs, params.prob_samples, params.prob_radius, params.seed)
    };

    let mut worst: f64 = 0.0;
    for (t_star, c_star) in &points {
        for p_star in &probs {
            let mut wt = 0.0;
            let mut wc = 0.0;
            let mut wpi = 0.0;
            for i in 0..stats.len() {
                wt += p_star[i] * t_star[i];
                wc += p_star[i] * c_star[i];
                wpi += p_star[i] * prices.eval_interval(i, t_star[i]);
            }
            let best = market.optimal_profit(wt, wc);
            let ours = unclamped_profit(wpi - wc, market.slack(wt, wc), market.beta_m);
            worst = worst.max(best - ours);
        }
    }
    Ok(worst)
}

/// Maximizes `overall_profit - lambda * worst_case_loss` over the
/// uniform-markup family, subject to positive expected profit on the
/// nominal statistics. With `lambda == 0` this is exactly the risk-agnostic
/// closed form.
#[allow(clippy::too_many_arguments)]
pub fn price_risk_aware(
    stats: &IntervalStats,
    targets: &[f64],
    bounds: &RiskBounds,
    params: &RiskParams,
    time_slope: f64,
    price_slope: f64,
    demand: &DemandCurve,
    consts: &PricingConstants,
) -> Result<PricingOutcome> {
    params.validate()?;
    if params.lambda == 0.0 {
        return price_linear(stats, targets, time_slope, price_slope, demand, consts);
    }
    if bounds.len() != stats.len() {
        return Err(MarketError::Dimension { expected: stats.len(), found: bounds.len() });
    }
    let (alpha_m, beta_m) = demand.against(time_slope, price_slope);
    if !(beta_m > 0.0) {
        return Err(MarketError::Invalid("demand must be price sensitive".into()));
    }
    let market =
        LinearMarket { alpha_m, beta_m, gamma: demand.intercept, epsilon: consts.epsilon };
    let nominal_slack = market.slack(stats.mean_time(), stats.mean_cost());

    // Candidate markups: a grid over a span bracketing both the nominal
    // optimum and the optima at the box corners, plus those optima exactly.
    let corner = |dt: &[f64], dc: &[f64]| {
        let wt: f64 = stats
            .probs
            .iter()
            .zip(stats.expected_times.iter().zip(dt))
            .map(|(p, (t, d))| p * (t + d).max(0.0))
            .sum();
        let wc: f64 = stats
            .probs
            .iter()
            .zip(stats.expected_costs.iter().zip(dc))
            .map(|(p, (c, d))| p * (c + d).max(0.0))
            .sum();
        (market.slack(wt, wc) / (2.0 * beta_m)).max(consts.epsilon)
    };
    let mut anchors = vec![(nominal_slack / (2.0 * beta_m)).max(consts.epsilon)];
    anchors.push(corner(&bounds.time_low, &bounds.cost_low));
    anchors.push(corner(&bounds.time_low, &bounds.cost_high));
    anchors.push(corner(&bounds.time_high, &bounds.cost_low));
    anchors.push(corner(&bounds.time_high, &bounds.cost_high));
    let span = anchors.iter().copied().fold(f64::NAN, f64::max) * 2.0;

    let evaluate = |markup: f64| -> Result<f64> {
        let priced: Vec<f64> = stats.expected_costs.iter().map(|c| c + markup).collect();
        let schedule = PriceSchedule::constant(targets.to_vec(), &priced)?;
        let loss = worst_case_loss(
            &schedule, stats, bounds, params, time_slope, price_slope, demand, consts,
        )?;
        Ok(unclamped_profit(markup, nominal_slack, beta_m) - params.lambda * loss)
    };

    // The objective is concave in the markup (concave profit minus lambda
    // times a max of convex per-scenario losses), so a coarse grid with
    // zoom rounds around the incumbent converges to the optimum.
    let mut best: Option<(f64, f64)> = None;
    let consider = |markup: f64, best: &mut Option<(f64, f64)>| -> Result<()> {
        if markup <= 0.0 {
            return Ok(());
        }
        let objective = evaluate(markup)?;
        match best {
            Some((_, cur)) if objective <= *cur => {}
            _ => *best = Some((markup, objective)),
        }
        Ok(())
    };
    for &anchor in &anchors {
        consider(anchor, &mut best)?;
    }
    let mut lo = 0.0;
    let mut hi = span;
    for _ in 0..4 {
        let step = (hi - lo) / params.markup_grid as f64;
        for k in 0..=params.markup_grid {
            consider(lo + step * k as f64, &mut best)?;
        }
        let center = best.expect("grid is nonempty").0;
        lo = (center - step).max(0.0);
        hi = center + step;
    }
    let (markup, _) = best.expect("markup candidates are nonempty");

    let priced: Vec<f64> = stats.expected_costs.iter().map(|c| c + markup).collect();
    let prices = PriceSchedule::constant(targets.to_vec(), &priced)?;
    let utility = crate::utility::PiecewiseUtility::linear(time_slope, price_slope)?;
    let ep = expected_profit(&prices, stats)?;
    let ed = crate::pricing::expected_demand(&prices, stats, &utility, demand)?;
    let cu = crate::pricing::schedule_utility(&prices, stats, &utility)?;
    Ok(PricingOutcome {
        prices,
        expected_profit: ep,
        expected_demand: ed,
        overall_profit: ep * ed,
        consumer_utility: cu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn nominal() -> (IntervalStats, Vec<f64>, DemandCurve) {
        let stats =
            IntervalStats::new(vec![0.3, 0.7], vec![8.0, 14.0], vec![4.0, 7.0]).unwrap();
        let targets = vec![0.0, 12.0, f64::INFINITY];
        let demand = DemandCurve::new(120.0, 1.0).unwrap();
        (stats, targets, demand)
    }

    #[test]
    fn zero_bounds_and_optimal_prices_mean_zero_loss() {
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let out = price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap();
        let loss = worst_case_loss(
            &out.prices,
            &stats,
            &RiskBounds::zero(2),
            &RiskParams::default(),
            1.0,
            1.0,
            &demand,
            &consts,
        )
        .unwrap();
        assert!(loss.abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn zero_bounds_suboptimal_markup_loses_quadratically() {
        // Moving the markup delta away from the optimum costs exactly
        // beta_m * delta^2 of overall profit in the linear algebra.
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let (_, beta_m) = demand.against(1.0, 1.0);
        let opt = price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap();
        let delta = 3.5;
        let shifted = opt.prices.shifted(delta);
        let loss = worst_case_loss(
            &shifted,
            &stats,
            &RiskBounds::zero(2),
            &RiskParams::default(),
            1.0,
            1.0,
            &demand,
            &consts,
        )
        .unwrap();
        assert!((loss - beta_m * delta * delta).abs() < 1e-9, "loss {loss}");
    }

    #[test]
    fn box_containing_worse_truth_gives_positive_loss() {
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let out = price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap();
        let bounds = RiskBounds::symmetric_fraction(&stats, 0.2);
        let loss = worst_case_loss(
            &out.prices,
            &stats,
            &bounds,
            &RiskParams::default(),
            1.0,
            1.0,
            &demand,
            &consts,
        )
        .unwrap();
        assert!(loss > 0.0);

        // Independent check at one hand-picked point: truth at the high
        // corner with nominal probabilities.
        let (alpha_m, beta_m) = demand.against(1.0, 1.0);
        let wt: f64 =
            stats.probs.iter().zip(&stats.expected_times).map(|(p, t)| p * t * 1.2).sum();
        let wc: f64 =
            stats.probs.iter().zip(&stats.expected_costs).map(|(p, c)| p * c * 1.2).sum();
        let slack = demand.intercept - alpha_m * wt - beta_m * wc;
        let best = slack * slack / (4.0 * beta_m);
        let our_markup = out.expected_profit;
        let ours = our_markup * (slack - beta_m * our_markup);
        assert!(loss >= best - ours - 1e-9);
    }

    #[test]
    fn search_agrees_with_an_independent_grid_oracle() {
        // Independent reimplementation of the loss program over the same
        // grid structure: per-axis offsets {lo, mid, 0, hi-mid, hi}, fixed
        // nominal probabilities. Both routes must find the same maximum.
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let out = price_linear(&stats, &targets, 2.0, 0.5, &demand, &consts).unwrap();
        let bounds = RiskBounds::new(
            vec![-1.5, -2.0],
            vec![1.0, 3.0],
            vec![-0.5, -1.0],
            vec![0.8, 1.2],
        )
        .unwrap();
        let params = RiskParams { prob_radius: 0.0, ..RiskParams::default() };
        let ours = worst_case_loss(
            &out.prices, &stats, &bounds, &params, 2.0, 0.5, &demand, &consts,
        )
        .unwrap();

        let (alpha_m, beta_m) = demand.against(2.0, 0.5);
        let axis = |lo: f64, hi: f64| {
            let mut v = vec![lo, (lo + hi) / 2.0, 0.0, hi];
            v.sort_by(|a, b| a.total_cmp(b));
            v.dedup();
            v
        };
        let mut oracle: f64 = 0.0;
        for &dt0 in &axis(bounds.time_low[0], bounds.time_high[0]) {
            for &dt1 in &axis(bounds.time_low[1], bounds.time_high[1]) {
                for &dc0 in &axis(bounds.cost_low[0], bounds.cost_high[0]) {
                    for &dc1 in &axis(bounds.cost_low[1], bounds.cost_high[1]) {
                        let t = [stats.expected_times[0] + dt0, stats.expected_times[1] + dt1];
                        let c = [stats.expected_costs[0] + dc0, stats.expected_costs[1] + dc1];
                        let p = &stats.probs;
                        let wt = p[0] * t[0] + p[1] * t[1];
                        let wc = p[0] * c[0] + p[1] * c[1];
                        let wpi = p[0] * out.prices.eval_interval(0, t[0])
                            + p[1] * out.prices.eval_interval(1, t[1]);
                        let slack = demand.intercept - alpha_m * wt - beta_m * wc;
                        let best = if slack > 0.0 {
                            slack * slack / (4.0 * beta_m)
                        } else {
                            consts.epsilon * (slack - beta_m * consts.epsilon)
                        };
                        let mine = (wpi - wc) * (slack - beta_m * (wpi - wc));
                        oracle = oracle.max(best - mine);
                    }
                }
            }
        }
        assert!((ours - oracle).abs() < 1e-9, "search {ours} vs oracle {oracle}");
    }

    #[test]
    fn lambda_zero_reduces_to_price_linear_exactly() {
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let plain = price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap();
        let risky = price_risk_aware(
            &stats,
            &targets,
            &RiskBounds::symmetric_fraction(&stats, 0.1),
            &RiskParams::with_lambda(0.0).unwrap(),
            1.0,
            1.0,
            &demand,
            &consts,
        )
        .unwrap();
        assert_eq!(plain.prices, risky.prices);
        assert_eq!(plain.overall_profit, risky.overall_profit);
    }

    #[test]
    fn huge_lambda_moves_markup_toward_the_corner_optimum() {
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let (_, beta_m) = demand.against(1.0, 1.0);
        let bounds = RiskBounds::overestimation(&stats, 1.3).unwrap();

        let nominal_markup =
            price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap().expected_profit;
        // Optimum if the truth sits at the low corner of the box.
        let wt: f64 = stats
            .probs
            .iter()
            .zip(stats.expected_times.iter().zip(&bounds.time_low))
            .map(|(p, (t, d))| p * (t + d))
            .sum();
        let wc: f64 = stats
            .probs
            .iter()
            .zip(stats.expected_costs.iter().zip(&bounds.cost_low))
            .map(|(p, (c, d))| p * (c + d))
            .sum();
        let corner_markup =
            (demand.intercept - demand.slope * wt - demand.slope * wc) / (2.0 * beta_m);
        assert!(corner_markup > nominal_markup);

        let mut params = RiskParams::with_lambda(1e6).unwrap();
        params.prob_samples = 2;
        params.prob_radius = 0.0;
        let risky =
            price_risk_aware(&stats, &targets, &bounds, &params, 1.0, 1.0, &demand, &consts)
                .unwrap();
        let risky_markup = risky.expected_profit;
        assert!(
            (risky_markup - corner_markup).abs() < (nominal_markup - corner_markup).abs(),
            "markup {risky_markup} did not move toward {corner_markup} from {nominal_markup}"
        );
        assert!(risky_markup > nominal_markup);
        assert!(risky.expected_profit > 0.0);
    }

    #[test]
    fn enlarging_the_box_never_shrinks_the_loss() {
        // Nested fraction grids: the 3-point grid on the inner box is a
        // subset of the 5-point grid on the doubled box.
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        let out = price_linear(&stats, &targets, 1.0, 1.0, &demand, &consts).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let f = rng.random_range(0.02..0.15);
            let inner = RiskBounds::symmetric_fraction(&stats, f);
            let outer = RiskBounds::symmetric_fraction(&stats, 2.0 * f);
            let p_inner = RiskParams { time_grid: 3, cost_grid: 3, ..RiskParams::default() };
            let p_outer = RiskParams { time_grid: 5, cost_grid: 5, ..RiskParams::default() };
            let l_inner = worst_case_loss(
                &out.prices, &stats, &inner, &p_inner, 1.0, 1.0, &demand, &consts,
            )
            .unwrap();
            let l_outer = worst_case_loss(
                &out.prices, &stats, &outer, &p_outer, 1.0, 1.0, &demand, &consts,
            )
            .unwrap();
            assert!(l_outer >= l_inner - 1e-12, "outer {l_outer} < inner {l_inner}");
        }
    }

    #[test]
    fn rejects_inverted_bounds_and_unprofitable_schedules() {
        let (stats, targets, demand) = nominal();
        let consts = PricingConstants::default();
        assert!(RiskBounds::new(vec![1.0], vec![-1.0], vec![0.0], vec![0.0]).is_err());
        let at_cost = PriceSchedule::constant(targets.clone(), &stats.expected_costs).unwrap();
        let err = worst_case_loss(
            &at_cost,
            &stats,
            &RiskBounds::zero(2),
            &RiskParams::default(),
            1.0,
            1.0,
            &demand,
            &consts,
        );
        assert!(err.is_err());
    }
}
