//! Shared fixtures for unit tests.

use crate::contract::PriceSchedule;
use crate::utility::{PiecewiseUtility, UtilityPiece};

/// Two-deadline utility: targets (0, 10, 20, inf) with pieces
/// `-p`, `-t - p + 10`, and `-50`.
pub(crate) fn two_deadline_utility() -> PiecewiseUtility {
    PiecewiseUtility::with_interior_targets(
        &[10.0, 20.0],
        vec![
            UtilityPiece::new(0.0, 0.0, 1.0),
            UtilityPiece::new(10.0, 1.0, 1.0),
            UtilityPiece::new(-50.0, 0.0, 0.0),
        ],
    )
    .unwrap()
}

/// The matching reference price schedule: 2, then `3 - 0.1 t`, then 1.
pub(crate) fn two_deadline_prices() -> PriceSchedule {
    PriceSchedule::from_segments(
        vec![0.0, 10.0, 20.0, f64::INFINITY],
        vec![(2.0, 0.0), (3.0, 0.1), (1.0, 0.0)],
    )
    .unwrap()
}
