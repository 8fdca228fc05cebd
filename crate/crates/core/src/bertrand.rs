//! Differentiated duopoly price competition.
//!
//! Two agents face demands `M_i = gamma_i - alpha_i * mu_i + beta_i * mu_j`
//! in their own price `mu_i` and the rival's `mu_j`. Each maximizes
//! `M_i * mu_i`, giving the best response
//! `mu_i = (gamma_i + beta_i * mu_j) / (2 alpha_i)`. The simultaneous fixed
//! point is the Nash equilibrium; repeated best responses converge to it
//! from any start whenever `a_1 * a_2 < 1`, with
//! `a_i = beta_i / (2 alpha_i)`, under any update order in which both
//! agents keep updating. Prices here are profit margins over marginal
//! cost; callers add their own cost offset.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// Demand faced by one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentDemand {
    /// Demand at zero prices.
    pub intercept: f64,
    /// Demand lost per unit of own price.
    pub own_slope: f64,
    /// Demand gained per unit of the rival's price.
    pub cross_slope: f64,
}

/// The two demand curves of the duopoly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuopolyParams {
    pub agents: [AgentDemand; 2],
}

impl DuopolyParams {
    pub fn new(agents: [AgentDemand; 2]) -> Result<Self> {
        for (i, a) in agents.iter().enumerate() {
            if !(a.intercept > 0.0) || !(a.own_slope > 0.0) || !(a.cross_slope > 0.0) {
                return Err(MarketError::Invalid(format!(
                    "agent {i} demand parameters must all be positive"
                )));
            }
        }
        Ok(DuopolyParams { agents })
    }

    /// Both agents share the same demand curve.
    pub fn symmetric(intercept: f64, own_slope: f64, cross_slope: f64) -> Result<Self> {
        let a = AgentDemand { intercept, own_slope, cross_slope };
        Self::new([a, a])
    }

    /// Contraction factor of one composed best-response round:
    /// `a_1 * a_2` with `a_i = cross_i / (2 own_i)`.
    pub fn contraction(&self) -> f64 {
        let a1 = self.agents[0].cross_slope / (2.0 * self.agents[0].own_slope);
        let a2 = self.agents[1].cross_slope / (2.0 * self.agents[1].own_slope);
        a1 * a2
    }

    pub fn is_contraction(&self) -> bool {
        self.contraction() < 1.0
    }
}

/// Index of one of the two agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agent {
    One,
    Two,
}

/// The profit-maximizing price given the rival's current price.
pub fn best_response(params: &DuopolyParams, agent: Agent, rival_price: f64) -> f64 {
    let a = match agent {
        Agent::One => &params.agents[0],
        Agent::Two => &params.agents[1],
    };
    (a.intercept + a.cross_slope * rival_price) / (2.0 * a.own_slope)
}

/// Closed-form Nash equilibrium of the duopoly. With identical parameters
/// both prices equal `gamma / (2 alpha - beta)`.
pub fn nash_equilibrium(params: &DuopolyParams) -> Result<(f64, f64)> {
    let [a1, a2] = &params.agents;
    let denom = 4.0 * a1.own_slope * a2.own_slope - a1.cross_slope * a2.cross_slope;
    if denom.abs() < 1e-12 {
        return Err(MarketError::Invalid(
            "degenerate demand slopes: best responses have no unique fixed point".into(),
        ));
    }
    let mu1 = (2.0 * a2.own_slope * a1.intercept + a1.cross_slope * a2.intercept) / denom;
    let mu2 = (2.0 * a1.own_slope * a2.intercept + a2.cross_slope * a1.intercept) / denom;
    Ok((mu1, mu2))
}

/// One asynchronous update step: either one agent re-prices, or both do
/// simultaneously.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStep {
    AgentOne,
    AgentTwo,
    Both,
}

/// A finite prefix followed by a repeating cycle of update steps. The
/// cycle must keep both agents updating, otherwise prices can stall short
/// of the equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub prefix: Vec<UpdateStep>,
    pub cycle: Vec<UpdateStep>,
}

impl UpdateSchedule {
    pub fn new(prefix: Vec<UpdateStep>, cycle: Vec<UpdateStep>) -> Result<Self> {
        if cycle.is_empty() {
            return Err(MarketError::Empty("update schedule cycle"));
        }
        let one = cycle.iter().any(|s| matches!(s, UpdateStep::AgentOne | UpdateStep::Both));
        let two = cycle.iter().any(|s| matches!(s, UpdateStep::AgentTwo | UpdateStep::Both));
        if !one || !two {
            return Err(MarketError::Invalid(
                "both agents must update infinitely often in the cycle".into(),
            ));
        }
        Ok(UpdateSchedule { prefix, cycle })
    }

    /// Every step updates both agents at once.
    pub fn synchronized() -> Self {
        UpdateSchedule { prefix: Vec::new(), cycle: vec![UpdateStep::Both] }
    }

    /// Agents alternate single updates.
    pub fn alternating() -> Self {
        UpdateSchedule { prefix: Vec::new(), cycle: vec![UpdateStep::AgentOne, UpdateStep::AgentTwo] }
    }

    pub fn step(&self, index: u64) -> UpdateStep {
        let p = self.prefix.len() as u64;
        if index < p {
            self.prefix[index as usize]
        } else {
            self.cycle[((index - p) % self.cycle.len() as u64) as usize]
        }
    }
}

fn apply(params: &DuopolyParams, step: UpdateStep, prices: (f64, f64)) -> (f64, f64) {
    match step {
        UpdateStep::AgentOne => (best_response(params, Agent::One, prices.1), prices.1),
        UpdateStep::AgentTwo => (prices.0, best_response(params, Agent::Two, prices.0)),
        UpdateStep::Both => (
            best_response(params, Agent::One, prices.1),
            best_response(params, Agent::Two, prices.0),
        ),
    }
}

/// Iterates best responses per the schedule until both prices are within
/// `tol` of the closed-form equilibrium; returns the prices and the number
/// of steps taken. Requires the contraction condition.
pub fn iterate_to_equilibrium(
    params: &DuopolyParams,
    schedule: &UpdateSchedule,
    init: (f64, f64),
    tol: f64,
    max_steps: u64,
) -> Result<((f64, f64), u64)> {
    if !params.is_contraction() {
        return Err(MarketError::Invalid(format!(
            "contraction condition violated: a1*a2 = {}",
            params.contraction()
        )));
    }
    if !(tol > 0.0) {
        return Err(MarketError::Invalid(format!("tolerance {tol} must be positive")));
    }
    let target = nash_equilibrium(params)?;
    if target.0 < 0.0 || target.1 < 0.0 {
        eprintln!(
            "warning: equilibrium prices ({}, {}) are negative; the model puts no \
             nonnegativity constraint on prices",
            target.0, target.1
        );
    }
    let converged =
        |p: (f64, f64)| (p.0 - target.0).abs() <= tol && (p.1 - target.1).abs() <= tol;
    let mut prices = init;
    let mut steps = 0u64;
    while !converged(prices) {
        if steps >= max_steps {
            return Err(MarketError::NoConvergence { steps });
        }
        prices = apply(params, schedule.step(steps), prices);
        steps += 1;
    }
    Ok((prices, steps))
}

/// Default tolerance and step limit for equilibrium iteration.
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000;
