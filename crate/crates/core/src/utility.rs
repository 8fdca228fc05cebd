//! Consumer preferences and market demand.
//!
//! A consumer's utility over (completion time, price) is piecewise linear:
//! the time axis is split at target times `0 = tau_0 < ... < tau_n = inf`,
//! and on each interval `[tau_{i-1}, tau_i)` utility is
//! `intercept - time_slope * t - price_slope * price`. Both slopes are
//! nonnegative, so utility never improves with a later result or a higher
//! price. Demand maps offered utility to a number of accepted contracts,
//! linearly, clamped at zero.

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// One linear piece of a utility function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityPiece {
    /// Constant offset of the piece.
    pub intercept: f64,
    /// Utility lost per minute of completion time. Nonnegative.
    pub time_slope: f64,
    /// Utility lost per cent of price. Nonnegative.
    pub price_slope: f64,
}

impl UtilityPiece {
    pub fn new(intercept: f64, time_slope: f64, price_slope: f64) -> Self {
        UtilityPiece { intercept, time_slope, price_slope }
    }

    pub fn eval(&self, t: f64, price: f64) -> f64 {
        self.intercept - self.time_slope * t - self.price_slope * price
    }
}

/// Piecewise-linear utility over (time, price).
///
/// `targets` always includes the leading 0 and the trailing infinity, so a
/// function with `n` pieces has `n + 1` targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseUtility {
    targets: Vec<f64>,
    pieces: Vec<UtilityPiece>,
}

impl PiecewiseUtility {
    pub fn new(targets: Vec<f64>, pieces: Vec<UtilityPiece>) -> Result<Self> {
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
                return Err(MarketError::Invalid(format!(
                    "targets must be strictly increasing: {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if pieces.len() != targets.len() - 1 {
            return Err(MarketError::Dimension {
                expected: targets.len() - 1,
                found: pieces.len(),
            });
        }
        for piece in &pieces {
            if !piece.intercept.is_finite()
                || !piece.time_slope.is_finite()
                || !piece.price_slope.is_finite()
            {
                return Err(MarketError::Invalid("utility piece is not finite".into()));
            }
            if piece.time_slope < 0.0 || piece.price_slope < 0.0 {
                return Err(MarketError::Invalid(
                    "utility pieces must be non-increasing in time and price".into(),
                ));
            }
        }
        Ok(PiecewiseUtility { targets, pieces })
    }

    /// Convenience constructor for interior targets: `[5, 10]` becomes
    /// `[0, 5, 10, inf]`.
    pub fn with_interior_targets(interior: &[f64], pieces: Vec<UtilityPiece>) -> Result<Self> {
        let mut targets = Vec::with_capacity(interior.len() + 2);
        targets.push(0.0);
        targets.extend_from_slice(interior);
        targets.push(f64::INFINITY);
        Self::new(targets, pieces)
    }

    /// The single-piece linear utility `-time_slope*t - price_slope*price`.
    pub fn linear(time_slope: f64, price_slope: f64) -> Result<Self> {
        Self::new(
            vec![0.0, f64::INFINITY],
            vec![UtilityPiece::new(0.0, time_slope, price_slope)],
        )
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn pieces(&self) -> &[UtilityPiece] {
        &self.pieces
    }

    pub fn n_intervals(&self) -> usize {
        self.pieces.len()
    }

    /// Index of the interval `[tau_{i-1}, tau_i)` containing `t`.
    pub fn interval_index(&self, t: f64) -> usize {
        debug_assert!(t >= 0.0);
        match self.targets[1..].iter().position(|&tau| t < tau) {
            Some(i) => i,
            None => self.pieces.len() - 1,
        }
    }

    /// Utility of completing at time `t` for price `price`.
    pub fn eval(&self, t: f64, price: f64) -> f64 {
        self.pieces[self.interval_index(t)].eval(t, price)
    }

    /// For a single-piece utility with zero intercept, the
    /// `(time_slope, price_slope)` pair; otherwise `None`.
    pub fn as_linear(&self) -> Option<(f64, f64)> {
        if self.pieces.len() == 1 && self.pieces[0].intercept == 0.0 {
            Some((self.pieces[0].time_slope, self.pieces[0].price_slope))
        } else {
            None
        }
    }
}

/// Linear demand: `max(0, intercept + slope * utility)` contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandCurve {
    /// Demand at zero utility, in contracts.
    pub intercept: f64,
    /// Additional contracts per unit of utility.
    pub slope: f64,
}

impl DemandCurve {
    pub fn new(intercept: f64, slope: f64) -> Result<Self> {
        if !(intercept > 0.0) || !(slope > 0.0) {
            return Err(MarketError::Invalid(format!(
                "demand curve needs positive intercept and slope, got {intercept}, {slope}"
            )));
        }
        Ok(DemandCurve { intercept, slope })
    }

    /// Accepted contracts at the given utility, clamped at zero.
    pub fn eval(&self, utility: f64) -> f64 {
        (self.intercept + self.slope * utility).max(0.0)
    }

    /// Demand slopes against time and price for a linear utility:
    /// demand = intercept - (slope * time_slope) t - (slope * price_slope) p.
    pub fn against(&self, time_slope: f64, price_slope: f64) -> (f64, f64) {
        (self.slope * time_slope, self.slope * price_slope)
    }
}
