//! Discrete completion-time distributions.
//!
//! Completion time is modeled as a list of mass bins over `[0, inf)`. A bin
//! with `start == end` is a point mass; otherwise its mass is spread
//! uniformly over `[start, end)`. Parametric estimates (Gaussians) are
//! materialized onto a fixed grid before they are compared or priced, so
//! every consumer of a distribution sees the same discrete form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};

/// Default grid step, in minutes, for materializing parametric estimates
/// and for rebinning histograms onto a common grid.
pub const DEFAULT_GRID_STEP: f64 = 0.1;

const MASS_TOLERANCE: f64 = 1e-9;

/// One mass bin. `start == end` encodes a point mass at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub start: f64,
    pub end: f64,
    pub mass: f64,
}

impl Bin {
    pub fn point(t: f64, mass: f64) -> Self {
        Bin { start: t, end: t, mass }
    }

    pub fn is_point(&self) -> bool {
        self.start == self.end
    }

    /// Mean completion time conditional on landing in this bin.
    pub fn midpoint(&self) -> f64 {
        if self.is_point() {
            self.start
        } else {
            0.5 * (self.start + self.end)
        }
    }
}

/// Probability distribution of completion time for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Bin>", into = "Vec<Bin>")]
pub struct CompletionHistogram {
    bins: Vec<Bin>,
}

impl TryFrom<Vec<Bin>> for CompletionHistogram {
    type Error = MarketError;

    fn try_from(bins: Vec<Bin>) -> Result<Self> {
        CompletionHistogram::from_bins(bins)
    }
}

impl From<CompletionHistogram> for Vec<Bin> {
    fn from(h: CompletionHistogram) -> Vec<Bin> {
        h.bins
    }
}

impl CompletionHistogram {
    /// Builds a histogram from bins. Masses must be nonnegative and sum to
    /// one within 1e-9; bins must be sorted by start time and nonnegative.
    pub fn from_bins(bins: Vec<Bin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(MarketError::Empty("histogram bins"));
        }
        let mut total = 0.0;
        let mut prev_start = f64::NEG_INFINITY;
        for bin in &bins {
            if !bin.start.is_finite() || !bin.end.is_finite() || !bin.mass.is_finite() {
                return Err(MarketError::Invalid("histogram bin is not finite".into()));
            }
            if bin.start < 0.0 {
                return Err(MarketError::Invalid(format!(
                    "histogram bin starts at negative time {}",
                    bin.start
                )));
            }
            if bin.end < bin.start {
                return Err(MarketError::Invalid(format!(
                    "histogram bin ends before it starts: [{}, {})",
                    bin.start, bin.end
                )));
            }
            if bin.mass < 0.0 {
                return Err(MarketError::Invalid(format!("negative bin mass {}", bin.mass)));
            }
            if bin.start < prev_start {
                return Err(MarketError::Invalid("histogram bins are not sorted".into()));
            }
            prev_start = bin.start;
            total += bin.mass;
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(MarketError::Invalid(format!(
                "histogram mass sums to {total}, expected 1"
            )));
        }
        Ok(CompletionHistogram { bins })
    }

    /// Point masses at the given `(time, mass)` pairs.
    pub fn from_points(points: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::from_bins(pts.into_iter().map(|(t, m)| Bin::point(t, m)).collect())
    }

    /// All mass at a single completion time.
    pub fn point_mass(t: f64) -> Self {
        CompletionHistogram { bins: vec![Bin::point(t, 1.0)] }
    }

    /// Uniform density over `[start, end)`.
    pub fn uniform(start: f64, end: f64) -> Result<Self> {
        Self::from_bins(vec![Bin { start, end, mass: 1.0 }])
    }

    /// Materializes a Gaussian estimate onto a grid of the given step,
    /// truncated at zero and renormalized. `std == 0` yields a point mass.
    pub fn gaussian(mean: f64, std: f64, grid_step: f64) -> Result<Self> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(MarketError::Invalid(format!("gaussian mean {mean} out of range")));
        }
        if !std.is_finite() || std < 0.0 {
            return Err(MarketError::Invalid(format!("gaussian std {std} out of range")));
        }
        if std == 0.0 {
            return Ok(Self::point_mass(mean));
        }
        if !(grid_step > 0.0) {
            return Err(MarketError::Invalid(format!("grid step {grid_step} must be positive")));
        }
        let lo = (mean - 8.0 * std).max(0.0);
        let hi = mean + 8.0 * std;
        let first = (lo / grid_step).floor() as u64;
        let last = (hi / grid_step).ceil() as u64;
        let mut bins = Vec::with_capacity((last - first + 1) as usize);
        let cdf = |x: f64| normal_cdf((x - mean) / std);
        let mut total = 0.0;
        for k in first..=last {
            let a = k as f64 * grid_step;
            let b = a + grid_step;
            // The left tail below the first cell is folded into it.
            let mass = if k == first { cdf(b) } else { cdf(b) - cdf(a) };
            if mass > 0.0 {
                bins.push(Bin { start: a, end: b, mass });
                total += mass;
            }
        }
        if bins.is_empty() || total <= 0.0 {
            return Ok(Self::point_mass(mean));
        }
        for bin in &mut bins {
            bin.mass /= total;
        }
        CompletionHistogram::from_bins(bins)
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn mean(&self) -> f64 {
        self.bins.iter().map(|b| b.mass * b.midpoint()).sum()
    }

    /// Inverse-CDF sampling: pick a bin by mass, then uniform within it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random_range(0.0..1.0);
        let mut acc = 0.0;
        for bin in &self.bins {
            acc += bin.mass;
            if u < acc {
                if bin.is_point() {
                    return bin.start;
                }
                return rng.random_range(bin.start..bin.end);
            }
        }
        // Rounding left `u` above the accumulated mass; take the last bin.
        let last = self.bins.last().expect("histogram has bins");
        last.midpoint()
    }

    /// Mass vector on a common grid of the given step. Interval bins spread
    /// their mass across the grid cells they overlap, proportionally.
    pub fn rebin(&self, grid_step: f64) -> Vec<f64> {
        let max_t = self
            .bins
            .iter()
            .map(|b| if b.is_point() { b.start } else { b.end })
            .fold(0.0_f64, f64::max);
        let cells = (max_t / grid_step).floor() as usize + 1;
        let mut out = vec![0.0; cells];
        for bin in &self.bins {
            if bin.is_point() {
                let idx = (bin.start / grid_step).floor() as usize;
                out[idx.min(cells - 1)] += bin.mass;
            } else {
                // Index-driven so boundary rounding cannot stall the walk.
                let width = bin.end - bin.start;
                let first = (bin.start / grid_step).floor() as usize;
                let last = ((bin.end / grid_step).ceil() as usize).max(first + 1);
                for idx in first..last {
                    let cell_lo = idx as f64 * grid_step;
                    let cell_hi = cell_lo + grid_step;
                    let lo = bin.start.max(cell_lo);
                    let hi = bin.end.min(cell_hi);
                    if hi > lo {
                        out[idx.min(cells - 1)] += bin.mass * (hi - lo) / width;
                    }
                }
            }
        }
        out
    }
}

/// Cosine similarity of two histograms rebinned onto the default grid.
/// Returns 1 for proportional mass vectors and 0 for disjoint support.
pub fn cosine_similarity(a: &CompletionHistogram, b: &CompletionHistogram) -> Result<f64> {
    cosine_similarity_with_step(a, b, DEFAULT_GRID_STEP)
}

pub fn cosine_similarity_with_step(
    a: &CompletionHistogram,
    b: &CompletionHistogram,
    grid_step: f64,
) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(MarketError::Invalid(format!("grid step {grid_step} must be positive")));
    }
    let va = a.rebin(grid_step);
    let vb = b.rebin(grid_step);
    cosine_of_vectors(&va, &vb)
}

pub(crate) fn cosine_of_vectors(a: &[f64], b: &[f64]) -> Result<f64> {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len().max(b.len()) {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(MarketError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(0.0, 1.0))
}

/// Standard normal CDF via the Abramowitz-Stegun erf approximation
/// (absolute error below 1.5e-7, plenty for materialized estimates).
fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592 + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_mass() {
        assert!(CompletionHistogram::from_points(&[(1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(CompletionHistogram::from_points(&[(1.0, 1.5), (2.0, -0.5)]).is_err());
        assert!(CompletionHistogram::from_points(&[(-1.0, 1.0)]).is_err());
    }

    #[test]
    fn point_mass_mean() {
        let h = CompletionHistogram::point_mass(9.0);
        assert_eq!(h.mean(), 9.0);
    }

    #[test]
    fn uniform_mean() {
        let h = CompletionHistogram::uniform(0.0, 2.0).unwrap();
        assert!((h.mean() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_materializes_to_unit_mass() {
        let h = CompletionHistogram::gaussian(10.0, 2.0, 0.1).unwrap();
        let total: f64 = h.bins().iter().map(|b| b.mass).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!((h.mean() - 10.0).abs() < 0.05);
    }

    #[test]
    fn gaussian_zero_std_is_point_mass() {
        let h = CompletionHistogram::gaussian(3.0, 0.0, 0.1).unwrap();
        assert_eq!(h.bins().len(), 1);
        assert_eq!(h.mean(), 3.0);
    }

    #[test]
    fn gaussian_near_zero_truncates() {
        let h = CompletionHistogram::gaussian(0.5, 1.0, 0.1).unwrap();
        let total: f64 = h.bins().iter().map(|b| b.mass).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(h.bins().iter().all(|b| b.start >= 0.0));
    }

    #[test]
    fn cosine_identical_is_one() {
        let h = CompletionHistogram::from_points(&[(1.0, 0.4), (2.0, 0.6)]).unwrap();
        let sim = cosine_similarity(&h, &h).unwrap();
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_disjoint_is_zero() {
        let a = CompletionHistogram::point_mass(1.0);
        let b = CompletionHistogram::point_mass(5.0);
        assert_eq!(cosine_similarity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn cosine_hand_computed() {
        // dot = 0.5, |a| = sqrt(0.5), |b| = 1 -> 0.5/sqrt(0.5) = 0.7071...
        let a = CompletionHistogram::from_points(&[(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let b = CompletionHistogram::point_mass(1.0);
        let sim = cosine_similarity(&a, &b).unwrap();
        assert!((sim - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
    }

    #[test]
    fn cosine_zero_vector_errors() {
        assert_eq!(cosine_of_vectors(&[0.0, 0.0], &[1.0]), Err(MarketError::ZeroVector));
    }

    #[test]
    fn sampling_is_deterministic_and_in_support() {
        let h = CompletionHistogram::from_bins(vec![
            Bin { start: 1.0, end: 2.0, mass: 0.5 },
            Bin::point(5.0, 0.5),
        ])
        .unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = h.sample(&mut r1);
            let b = h.sample(&mut r2);
            assert_eq!(a, b);
            assert!((1.0..2.0).contains(&a) || a == 5.0);
        }
    }
}
