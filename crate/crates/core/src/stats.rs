//! Confidence intervals and goodness-of-fit helpers for the Monte-Carlo
//! experiments.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};

/// A binomial proportion estimate with an exact (Clopper–Pearson) interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub confidence: f64,
}

impl Proportion {
    pub fn new(successes: u64, trials: u64, confidence: f64) -> Self {
        let (ci_low, ci_high) = clopper_pearson(successes, trials, confidence);
        Proportion {
            successes,
            trials,
            estimate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
            ci_low,
            ci_high,
            confidence,
        }
    }

    /// Larger of the two one-sided distances from the estimate to the interval ends.
    pub fn half_width(&self) -> f64 {
        (self.estimate - self.ci_low).max(self.ci_high - self.estimate)
    }
}

/// Exact two-sided binomial interval at the given confidence (e.g. 0.99).
pub fn clopper_pearson(successes: u64, trials: u64, confidence: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let alpha = 1.0 - confidence;
    let k = successes as f64;
    let n = trials as f64;
    let lo = if successes == 0 {
        0.0
    } else {
        Beta::new(k, n - k + 1.0)
            .map(|b| b.inverse_cdf(alpha / 2.0))
            .unwrap_or(0.0)
    };
    let hi = if successes == trials {
        1.0
    } else {
        Beta::new(k + 1.0, n - k)
            .map(|b| b.inverse_cdf(1.0 - alpha / 2.0))
            .unwrap_or(1.0)
    };
    (lo, hi)
}

/// Pearson χ² statistic and p-value of observed counts against expected counts.
pub fn chi_square(observed: &[u64], expected: &[f64]) -> (f64, f64) {
    assert_eq!(observed.len(), expected.len());
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum();
    let dof = (observed.len() as f64 - 1.0).max(1.0);
    let p = ChiSquared::new(dof).map(|c| 1.0 - c.cdf(stat)).unwrap_or(0.0);
    (stat, p)
}

/// χ² uniformity test over `cells` equiprobable cells.
pub fn chi_square_uniform(observed: &[u64]) -> (f64, f64) {
    let total: u64 = observed.iter().sum();
    let e = total as f64 / observed.len() as f64;
    chi_square(observed, &vec![e; observed.len()])
}

/// Half-width for the total-variation distance between an empirical
/// distribution over `cells` outcomes built from `samples` draws and its
/// source, at confidence `1 - alpha`.
///
/// Uses `P(|p̂ - p|_1 >= e) <= (2^cells - 2) exp(-samples e^2 / 2)`.
pub fn tv_half_width(cells: usize, samples: u64, alpha: f64) -> f64 {
    if cells <= 1 || samples == 0 {
        return if samples == 0 { 1.0 } else { 0.0 };
    }
    // ln(2^K - 2) <= K ln 2
    let log_terms = cells as f64 * std::f64::consts::LN_2 + (1.0 / alpha).ln();
    let l1 = (2.0 * log_terms / samples as f64).sqrt();
    (l1 / 2.0).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_edges() {
        assert_eq!(clopper_pearson(0, 10, 0.99).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.99).1, 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.95);
        // Reference values for the exact 95% interval of 50/100.
        assert!((lo - 0.3983).abs() < 1e-3, "{lo}");
        assert!((hi - 0.6017).abs() < 1e-3, "{hi}");
    }

    #[test]
    fn chi_square_perfect_fit() {
        let (s, p) = chi_square_uniform(&[10, 10, 10, 10]);
        assert_eq!(s, 0.0);
        assert!(p > 0.99);
    }

    #[test]
    fn tv_width_shrinks() {
        assert!(tv_half_width(10, 100_000, 0.01) < tv_half_width(10, 1000, 0.01));
        assert_eq!(tv_half_width(1, 10, 0.01), 0.0);
    }
}
