//! Agent-side contract pricing.
//!
//! The agent maximizes overall profit, the product of expected unit profit
//! and expected demand, subject to positive expected profit. For a linear
//! utility `-a*t - b*p` and linear demand this is a concave quadratic in
//! the probability-weighted price, with a closed-form optimum:
//!
//! ```text
//! pi' p = (gamma - alpha_m * t' p + beta_m * c' p) / (2 beta_m)   if slack >= 0
//!         c' p + epsilon                                          otherwise
//! ```
//!
//! where `slack = gamma - alpha_m * t' p - beta_m * c' p`, `alpha_m` and
//! `beta_m` are the demand slopes against time and price, and epsilon is a
//! small markup floor. In the first branch the optimal overall profit is
//! `slack^2 / (4 beta_m)`.
//!
//! The closed form pins only the scalar `pi' p`; the schedule realizes it
//! as a uniform markup over costs, `pi_i = c_i + markup`, which satisfies
//! the optimum and keeps per-interval prices cost-anchored.
//!
//! [`price_oracle_grid`] searches the same markup family exhaustively on a
//! grid. It exists to validate the closed form, and it is also the pricing
//! path for utilities with several pieces, where no closed form applies.

use serde::{Deserialize, Serialize};

use crate::contract::{dot, Configuration, IntervalStats, PriceSchedule};
use crate::error::{MarketError, Result};
use crate::utility::{DemandCurve, PiecewiseUtility, UtilityPiece};

/// Markup floor enforcing the strict profitability constraint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingConstants {
    pub epsilon: f64,
}

impl Default for PricingConstants {
    fn default() -> Self {
        PricingConstants { epsilon: 1e-6 }
    }
}

impl PricingConstants {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(MarketError::Invalid(format!("epsilon {epsilon} must be positive")));
        }
        Ok(PricingConstants { epsilon })
    }
}

/// A priced contract from the agent's perspective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingOutcome {
    pub prices: PriceSchedule,
    /// Expected unit profit, in cents. Always positive.
    pub expected_profit: f64,
    /// Expected accepted contracts, demand-clamped at zero.
    pub expected_demand: f64,
    /// `expected_profit * expected_demand`.
    pub overall_profit: f64,
    /// Expected utility the consumer sees under this schedule.
    pub consumer_utility: f64,
}

/// Expected unit profit: sum of `(price_i(t_i) - c_i) * p_i`.
pub fn expected_profit(prices: &PriceSchedule, stats: &IntervalStats) -> Result<f64> {
    if prices.len() != stats.len() {
        return Err(MarketError::Dimension { expected: stats.len(), found: prices.len() });
    }
    let mut total = 0.0;
    for i in 0..stats.len() {
        let t = stats.expected_times[i];
        total += (prices.eval_interval(i, t) - stats.expected_costs[i]) * stats.probs[i];
    }
    Ok(total)
}

/// Expected demand: probability-weighted clamped demand at each interval's
/// expected time and price.
pub fn expected_demand(
    prices: &PriceSchedule,
    stats: &IntervalStats,
    utility: &PiecewiseUtility,
    demand: &DemandCurve,
) -> Result<f64> {
    if prices.len() != stats.len() {
        return Err(MarketError::Dimension { expected: stats.len(), found: prices.len() });
    }
    let mut total = 0.0;
    for i in 0..stats.len() {
        let t = stats.expected_times[i];
        let price = prices.eval_interval(i, t);
        total += demand.eval(utility.eval(t, price)) * stats.probs[i];
    }
    Ok(total)
}

/// Expected utility the consumer sees: `sum p_i u(t_i, price_i(t_i))`.
pub fn schedule_utility(
    prices: &PriceSchedule,
    stats: &IntervalStats,
    utility: &PiecewiseUtility,
) -> Result<f64> {
    if prices.len() != stats.len() {
        return Err(MarketError::Dimension { expected: stats.len(), found: prices.len() });
    }
    let mut total = 0.0;
    for i in 0..stats.len() {
        let t = stats.expected_times[i];
        total += utility.eval(t, prices.eval_interval(i, t)) * stats.probs[i];
    }
    Ok(total)
}

/// Demand at cost prices for a linear utility piece: the slack that decides
/// which branch of the closed form applies.
pub fn demand_slack(stats: &IntervalStats, piece: &UtilityPiece, demand: &DemandCurve) -> f64 {
    let gamma_eff = demand.intercept + demand.slope * piece.intercept;
    let (alpha_m, beta_m) = demand.against(piece.time_slope, piece.price_slope);
    gamma_eff - alpha_m * stats.mean_time() - beta_m * stats.mean_cost()
}

fn validate_linear_slopes(time_slope: f64, price_slope: f64) -> Result<()> {
    if !(price_slope > 0.0) || !price_slope.is_finite() {
        return Err(MarketError::Invalid(format!(
            "utility price slope {price_slope} must be positive"
        )));
    }
    if time_slope < 0.0 || !time_slope.is_finite() {
        return Err(MarketError::Invalid(format!(
            "utility time slope {time_slope} must be nonnegative"
        )));
    }
    Ok(())
}

fn outcome_for_markup(
    stats: &IntervalStats,
    targets: &[f64],
    utility: &PiecewiseUtility,
    demand: &DemandCurve,
    markup: f64,
) -> Result<PricingOutcome> {
    let priced: Vec<f64> = stats.expected_costs.iter().map(|c| c + markup).collect();
    let prices = PriceSchedule::constant(targets.to_vec(), &priced)?;
    let expected_profit = expected_profit(&prices, stats)?;
    let expected_demand = expected_demand(&prices, stats, utility, demand)?;
    let consumer_utility = schedule_utility(&prices, stats, utility)?;
    Ok(PricingOutcome {
        prices,
        expected_profit,
        expected_demand,
        overall_profit: expected_profit * expected_demand,
        consumer_utility,
    })
}

pub(crate) fn price_linear_piece(
    stats: &IntervalStats,
    targets: &[f64],
    piece: &UtilityPiece,
    demand: &DemandCurve,
    consts: &PricingConstants,
) -> Result<PricingOutcome> {
    validate_linear_slopes(piece.time_slope, piece.price_slope)?;
    if targets.len() != stats.len() + 1 {
        return Err(MarketError::Dimension { expected: stats.len() + 1, found: targets.len() });
    }
    let (_, beta_m) = demand.against(piece.time_slope, piece.price_slope);
    let slack = demand_slack(stats, piece, demand);
    let markup = if slack > 0.0 { slack / (2.0 * beta_m) } else { consts.epsilon };
    let utility = PiecewiseUtility::new(vec![0.0, f64::INFINITY], vec![*piece])
        .expect("single-piece utility is valid");
    outcome_for_markup(stats, targets, &utility, demand, markup)
}

/// Closed-form optimal pricing for the linear utility
/// `-time_slope * t - price_slope * price`.
pub fn price_linear(
    stats: &IntervalStats,
    targets: &[f64],
    time_slope: f64,
    price_slope: f64,
    demand: &DemandCurve,
    consts: &PricingConstants,
) -> Result<PricingOutcome> {
    price_linear_piece(
        stats,
        targets,
        &UtilityPiece::new(0.0, time_slope, price_slope),
        demand,
        consts,
    )
}

/// Exhaustive search over the uniform-markup family on a grid of the given
/// step. The span is sized to bracket the analytic optimum of every piece.
///
/// Works for any piecewise utility; for single-piece utilities it is the
/// independent oracle for [`price_linear`].
pub fn price_oracle_grid(
    stats: &IntervalStats,
    targets: &[f64],
    utility: &PiecewiseUtility,
    demand: &DemandCurve,
    consts: &PricingConstants,
    grid_step: f64,
) -> Result<PricingOutcome> {
    if !(grid_step > 0.0) {
        return Err(MarketError::Invalid(format!("grid step {grid_step} must be positive")));
    }
    if targets.len() != stats.len() + 1 {
        return Err(MarketError::Dimension { expected: stats.len() + 1, found: targets.len() });
    }
    let mut span: f64 = 0.0;
    let mut any_price_sensitive = false;
    for piece in utility.pieces() {
        if piece.price_slope > 0.0 {
            any_price_sensitive = true;
            let (_, beta_m) = demand.against(piece.time_slope, piece.price_slope);
            let slack = demand_slack(stats, piece, demand);
            if slack > 0.0 {
                span = span.max(slack / beta_m);
            }
        }
    }
    if !any_price_sensitive {
        return Err(MarketError::Invalid(
            "demand is insensitive to price; the optimal markup is unbounded".into(),
        ));
    }
    span = span.max(20.0 * grid_step).max(2.0 * consts.epsilon);

    let steps = (span / grid_step).ceil() as u64;
    const MAX_STEPS: u64 = 200_000_000;
    if steps > MAX_STEPS {
        return Err(MarketError::Invalid(format!(
            "grid of {steps} markup candidates exceeds {MAX_STEPS}; use a coarser step"
        )));
    }
    let mut best_markup = grid_step;
    let mut best_profit = f64::NEG_INFINITY;
    for k in 1..=steps {
        let markup = k as f64 * grid_step;
        let mut dem = 0.0;
        for i in 0..stats.len() {
            let t = stats.expected_times[i];
            let price = stats.expected_costs[i] + markup;
            dem += demand.eval(utility.eval(t, price)) * stats.probs[i];
        }
        let profit = markup * dem;
        if profit > best_profit {
            best_profit = profit;
            best_markup = markup;
        }
    }
    outcome_for_markup(stats, targets, utility, demand, best_markup)
}

/// Prices every configuration and keeps the one with the greatest overall
/// profit. Ties go to the lower rate, then the lexicographically smaller id.
pub fn select_configuration<'a>(
    configs: &'a [Configuration],
    targets: &[f64],
    utility: &PiecewiseUtility,
    demand: &DemandCurve,
    consts: &PricingConstants,
) -> Result<(&'a Configuration, PricingOutcome)> {
    if configs.is_empty() {
        return Err(MarketError::Empty("configuration list"));
    }
    if utility.pieces().len() != 1 {
        return Err(MarketError::Invalid(
            "configuration selection requires a single-piece utility".into(),
        ));
    }
    let piece = utility.pieces()[0];
    let mut best: Option<(&Configuration, PricingOutcome)> = None;
    for config in configs {
        let stats = crate::contract::interval_stats(&config.histogram, config.rate, targets)?;
        let outcome = price_linear_piece(&stats, targets, &piece, demand, consts)?;
        let replace = match &best {
            None => true,
            Some((cur, cur_outcome)) => {
                if outcome.overall_profit > cur_outcome.overall_profit {
                    true
                } else if outcome.overall_profit == cur_outcome.overall_profit {
                    (config.rate, config.id.as_str()) < (cur.rate, cur.id.as_str())
                } else {
                    false
                }
            }
        };
        if replace {
            best = Some((config, outcome));
        }
    }
    Ok(best.expect("nonempty configuration list"))
}

/// Probability-weighted raw utility of a configuration's stats, the
/// quantity that orders configurations: `-a * t'p - b * c'p`.
pub fn raw_config_utility(stats: &IntervalStats, time_slope: f64, price_slope: f64) -> f64 {
    -time_slope * dot(&stats.probs, &stats.expected_times)
        - price_slope * dot(&stats.probs, &stats.expected_costs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::interval_stats;
    use crate::histogram::CompletionHistogram;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_interval_targets() -> Vec<f64> {
        vec![0.0, 10.0, 20.0, f64::INFINITY]
    }

    fn reference_stats() -> IntervalStats {
        // Times (9, 15, 21) at rate 0.1 c/min, probabilities (0.2, 0.5, 0.3).
        IntervalStats::new(
            vec![0.2, 0.5, 0.3],
            vec![9.0, 15.0, 21.0],
            vec![0.9, 1.5, 2.1],
        )
        .unwrap()
    }

    #[test]
    fn expected_profit_hand_arithmetic() {
        let stats = reference_stats();
        let prices = PriceSchedule::constant(three_interval_targets(), &[2.0, 1.5, 1.0]).unwrap();
        let got = expected_profit(&prices, &stats).unwrap();
        assert!((got - (-0.11)).abs() < 1e-12);
    }

    #[test]
    fn expected_profit_zero_at_cost_and_unit_markup() {
        let stats = reference_stats();
        let at_cost = PriceSchedule::constant(three_interval_targets(), &[0.9, 1.5, 2.1]).unwrap();
        assert!(expected_profit(&at_cost, &stats).unwrap().abs() < 1e-12);

        let single = IntervalStats::new(vec![1.0], vec![4.0], vec![2.0]).unwrap();
        let prices = PriceSchedule::constant(vec![0.0, f64::INFINITY], &[3.0]).unwrap();
        assert!((expected_profit(&prices, &single).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expected_demand_plugs_into_the_curve() {
        let u = PiecewiseUtility::linear(1.0, 1.0).unwrap();
        let m = DemandCurve::new(100.0, 50.0).unwrap();
        let stats = IntervalStats::new(vec![1.0], vec![0.5], vec![0.1]).unwrap();
        let prices = PriceSchedule::constant(vec![0.0, f64::INFINITY], &[0.8]).unwrap();
        let got = expected_demand(&prices, &stats, &u, &m).unwrap();
        assert!((got - 35.0).abs() < 1e-12);
    }

    #[test]
    fn expected_demand_flat_utility_and_clamp() {
        let m = DemandCurve::new(100.0, 50.0).unwrap();
        let stats = reference_stats();
        let targets = three_interval_targets();
        let flat = PiecewiseUtility::new(
            targets.clone(),
            vec![UtilityPiece::new(0.0, 0.0, 0.0); 3],
        )
        .unwrap();
        let prices = PriceSchedule::constant(targets.clone(), &[5.0, 5.0, 5.0]).unwrap();
        assert!((expected_demand(&prices, &stats, &flat, &m).unwrap() - 100.0).abs() < 1e-12);

        // Utility far below -intercept/slope everywhere clamps to zero.
        let sunk = PiecewiseUtility::new(
            targets.clone(),
            vec![UtilityPiece::new(-1000.0, 0.0, 0.0); 3],
        )
        .unwrap();
        assert_eq!(expected_demand(&prices, &stats, &sunk, &m).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_single_interval() {
        // t = 0.5 min, c = 0.1 c, U = -t - p, M = 100 + 50 U.
        let stats = IntervalStats::new(vec![1.0], vec![0.5], vec![0.1]).unwrap();
        let m = DemandCurve::new(100.0, 50.0).unwrap();
        let out = price_linear(
            &stats,
            &[0.0, f64::INFINITY],
            1.0,
            1.0,
            &m,
            &PricingConstants::default(),
        )
        .unwrap();
        assert!((out.prices.eval(0.5) - 0.8).abs() < 1e-12);
        assert!((out.overall_profit - 24.5).abs() < 1e-12);
        assert!(out.expected_profit > 0.0);
    }

    #[test]
    fn closed_form_matches_one_bucket_formula() {
        let m = DemandCurve::new(40.0, 2.0).unwrap();
        let consts = PricingConstants::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let t = rng.random_range(0.5..30.0);
            let rate = rng.random_range(0.05..2.0);
            let c = rate * t;
            let stats = IntervalStats::new(vec![1.0], vec![t], vec![c]).unwrap();
            let (a_u, b_u) = (1.0, 1.0);
            let out =
                price_linear(&stats, &[0.0, f64::INFINITY], a_u, b_u, &m, &consts).unwrap();
            let (alpha_m, beta_m) = m.against(a_u, b_u);
            let formula = ((m.intercept - alpha_m * t + beta_m * c) / (2.0 * beta_m))
                .max(c + consts.epsilon);
            assert!((out.prices.eval(t) - formula).abs() < 1e-9);
        }
    }

    #[test]
    fn infeasible_demand_falls_back_to_epsilon_markup() {
        // Slack is negative: costs dwarf the demand intercept.
        let stats = IntervalStats::new(vec![1.0], vec![200.0], vec![150.0]).unwrap();
        let m = DemandCurve::new(50.0, 1.0).unwrap();
        let consts = PricingConstants::default();
        let out =
            price_linear(&stats, &[0.0, f64::INFINITY], 1.0, 1.0, &m, &consts).unwrap();
        assert!((out.expected_profit - consts.epsilon).abs() < 1e-10);
        assert!((out.prices.eval(200.0) - (150.0 + consts.epsilon)).abs() < 1e-12);
        assert_eq!(out.expected_demand, 0.0);
        assert_eq!(out.overall_profit, 0.0);
    }

    #[test]
    fn oracle_agrees_on_the_single_interval_instance() {
        let stats = IntervalStats::new(vec![1.0], vec![0.5], vec![0.1]).unwrap();
        let m = DemandCurve::new(100.0, 50.0).unwrap();
        let u = PiecewiseUtility::linear(1.0, 1.0).unwrap();
        let step = 1e-4;
        let grid = price_oracle_grid(
            &stats,
            &[0.0, f64::INFINITY],
            &u,
            &m,
            &PricingConstants::default(),
            step,
        )
        .unwrap();
        // Quadratic around the optimum: error bounded by beta_m * (step/2)^2.
        let beta_m = 50.0;
        assert!((grid.overall_profit - 24.5).abs() <= beta_m * step * step / 4.0 + 1e-12);
    }

    #[test]
    fn oracle_zero_slack_lands_on_floor_branch() {
        let stats = IntervalStats::new(vec![1.0], vec![25.0], vec![25.0]).unwrap();
        let m = DemandCurve::new(50.0, 1.0).unwrap(); // slack = 50 - 25 - 25 = 0
        let consts = PricingConstants::default();
        let closed =
            price_linear(&stats, &[0.0, f64::INFINITY], 1.0, 1.0, &m, &consts).unwrap();
        assert!((closed.expected_profit - consts.epsilon).abs() < 1e-10);
        let u = PiecewiseUtility::linear(1.0, 1.0).unwrap();
        let grid =
            price_oracle_grid(&stats, &[0.0, f64::INFINITY], &u, &m, &consts, 1e-3).unwrap();
        // Both branches yield zero overall profit at the boundary.
        assert!(closed.overall_profit.abs() < 1e-9);
        assert!(grid.overall_profit.abs() < 1e-3);
    }

    /// Seeded random instances inside the regime where no interval's demand
    /// clamps anywhere on the searched span, so the clamped search and the
    /// unclamped closed form optimize the same function.
    pub(crate) fn random_linear_instance(
        rng: &mut ChaCha8Rng,
    ) -> (IntervalStats, Vec<f64>, f64, f64, DemandCurve) {
        loop {
            let n = rng.random_range(1..5usize);
            let mut interior: Vec<f64> = (0..n - 1)
                .map(|_| rng.random_range(1.0..40.0))
                .collect();
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
            let demand = DemandCurve::new(rng.random_range(60.0..160.0), rng.random_range(1.0..4.0))
                .unwrap();

            let piece = UtilityPiece::new(0.0, a_u, b_u);
            let slack = demand_slack(&stats, &piece, &demand);
            if slack <= 1.0 {
                continue;
            }
            // No clamping anywhere on [0, 2 * markup*]: every interval's
            // demand at the span end must stay nonnegative.
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

    #[test]
    fn oracle_matches_closed_form_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let consts = PricingConstants::default();
        let step = 1e-3;
        for _ in 0..100 {
            let (stats, targets, a_u, b_u, demand) = random_linear_instance(&mut rng);
            let closed = price_linear(&stats, &targets, a_u, b_u, &demand, &consts).unwrap();
            let u = PiecewiseUtility::linear(a_u, b_u).unwrap();
            let grid =
                price_oracle_grid(&stats, &targets, &u, &demand, &consts, step).unwrap();
            let (_, beta_m) = demand.against(a_u, b_u);
            let bound = 2.0 * beta_m * step * step / 4.0 + 1e-9;
            assert!(
                (closed.overall_profit - grid.overall_profit).abs() <= bound,
                "closed {} vs grid {} (bound {bound})",
                closed.overall_profit,
                grid.overall_profit
            );
            assert!(closed.overall_profit + 1e-12 >= grid.overall_profit);
        }
    }

    #[test]
    fn priced_utility_identity_in_the_feasible_branch() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let consts = PricingConstants::default();
        for _ in 0..50 {
            let (stats, targets, a_u, b_u, demand) = random_linear_instance(&mut rng);
            let out = price_linear(&stats, &targets, a_u, b_u, &demand, &consts).unwrap();
            let raw = raw_config_utility(&stats, a_u, b_u);
            let expected = -demand.intercept / (2.0 * demand.slope) + 0.5 * raw;
            assert!((out.consumer_utility - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn better_raw_utility_wins_on_both_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let consts = PricingConstants::default();
        for _ in 0..50 {
            let (s1, targets, a_u, b_u, demand) = random_linear_instance(&mut rng);
            let (s2, ..) = random_linear_instance(&mut rng);
            // Rebuild s2 against s1's targets for comparability: reuse only
            // its weighted sums, which is all the closed form consumes.
            let o1 = price_linear(&s1, &targets, a_u, b_u, &demand, &consts).unwrap();
            let t2 = vec![0.0, f64::INFINITY];
            let collapsed =
                IntervalStats::new(vec![1.0], vec![s2.mean_time()], vec![s2.mean_cost()]).unwrap();
            let o2 = price_linear(&collapsed, &t2, a_u, b_u, &demand, &consts).unwrap();
            let piece = UtilityPiece::new(0.0, a_u, b_u);
            if demand_slack(&s1, &piece, &demand) <= 0.0
                || demand_slack(&collapsed, &piece, &demand) <= 0.0
            {
                continue;
            }
            let r1 = raw_config_utility(&s1, a_u, b_u);
            let r2 = raw_config_utility(&collapsed, a_u, b_u);
            if r1 > r2 {
                assert!(o1.consumer_utility > o2.consumer_utility);
                assert!(o1.overall_profit > o2.overall_profit);
            } else if r2 > r1 {
                assert!(o2.consumer_utility > o1.consumer_utility);
                assert!(o2.overall_profit > o1.overall_profit);
            }
        }
    }

    #[test]
    fn select_configuration_prefers_dominating_config() {
        let targets = vec![0.0, f64::INFINITY];
        let m = DemandCurve::new(100.0, 1.0).unwrap();
        let u = PiecewiseUtility::linear(1.0, 1.0).unwrap();
        let consts = PricingConstants::default();
        let fast = Configuration::new("fast", 0.5, CompletionHistogram::point_mass(5.0)).unwrap();
        let slow = Configuration::new("slow", 0.6, CompletionHistogram::point_mass(9.0)).unwrap();
        let menu = [slow, fast];
        let (chosen, _) = select_configuration(&menu, &targets, &u, &m, &consts).unwrap();
        assert_eq!(chosen.id, "fast");

        // Identical configurations: the first id in order wins.
        let twin_a = Configuration::new("a", 0.5, CompletionHistogram::point_mass(5.0)).unwrap();
        let twin_b = Configuration::new("b", 0.5, CompletionHistogram::point_mass(5.0)).unwrap();
        let twins = [twin_b, twin_a];
        let (chosen, _) = select_configuration(&twins, &targets, &u, &m, &consts).unwrap();
        assert_eq!(chosen.id, "a");
    }

    #[test]
    fn select_configuration_matches_oracle_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let targets = vec![0.0, 12.0, f64::INFINITY];
        let m = DemandCurve::new(120.0, 1.0).unwrap();
        let u = PiecewiseUtility::linear(1.0, 1.0).unwrap();
        let consts = PricingConstants::default();
        for _ in 0..20 {
            let configs: Vec<Configuration> = (0..5)
                .map(|j| {
                    let mean = rng.random_range(2.0..25.0);
                    let std = rng.random_range(0.0..1.5);
                    Configuration::new(
                        format!("cfg{j}"),
                        rng.random_range(0.1..1.0),
                        CompletionHistogram::gaussian(mean, std, 0.1).unwrap(),
                    )
                    .unwrap()
                })
                .collect();
            let (chosen, outcome) =
                select_configuration(&configs, &targets, &u, &m, &consts).unwrap();
            // Brute force with the grid oracle over every configuration.
            let step = 1e-3;
            let mut best_oracle = f64::NEG_INFINITY;
            let mut oracle_of_chosen = f64::NEG_INFINITY;
            for config in &configs {
                let stats =
                    interval_stats(&config.histogram, config.rate, &targets).unwrap();
                let grid =
                    price_oracle_grid(&stats, &targets, &u, &m, &consts, step).unwrap();
                if config.id == chosen.id {
                    oracle_of_chosen = grid.overall_profit;
                }
                best_oracle = best_oracle.max(grid.overall_profit);
            }
            let (_, beta_m) = m.against(1.0, 1.0);
            let bound = 2.0 * beta_m * step * step / 4.0 + 1e-9;
            assert!(oracle_of_chosen >= best_oracle - bound);
            assert!(outcome.expected_profit > 0.0);
        }
    }

    #[test]
    fn multi_piece_pricing_goes_through_the_grid() {
        // A two-piece utility: cheap patience before 10 minutes, impatience
        // after. The grid oracle prices it without a closed form.
        let u = PiecewiseUtility::with_interior_targets(
            &[10.0],
            vec![UtilityPiece::new(0.0, 0.2, 1.0), UtilityPiece::new(0.0, 1.5, 1.0)],
        )
        .unwrap();
        let stats = IntervalStats::new(
            vec![0.6, 0.4],
            vec![6.0, 14.0],
            vec![3.0, 7.0],
        )
        .unwrap();
        let m = DemandCurve::new(80.0, 2.0).unwrap();
        let out = price_oracle_grid(
            &stats,
            &[0.0, 10.0, f64::INFINITY],
            &u,
            &m,
            &PricingConstants::default(),
            1e-3,
        )
        .unwrap();
        assert!(out.expected_profit > 0.0);
        assert!(out.overall_profit > 0.0);
    }

    #[test]
    fn price_insensitive_utility_is_rejected_by_the_oracle() {
        let u = PiecewiseUtility::linear(1.0, 0.0);
        // linear() itself rejects nothing here: slope 0 is allowed by the
        // type, but the oracle cannot bound its search.
        let u = u.unwrap();
        let stats = IntervalStats::new(vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let m = DemandCurve::new(10.0, 1.0).unwrap();
        let err = price_oracle_grid(
            &stats,
            &[0.0, f64::INFINITY],
            &u,
            &m,
            &PricingConstants::default(),
            1e-3,
        );
        assert!(err.is_err());
    }
}
