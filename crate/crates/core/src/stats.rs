//! Binomial proportion estimates for Monte Carlo detection rates.

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Success proportion with a Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: usize,
    pub trials: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Proportion {
    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }

    /// Whether the two intervals are disjoint.
    pub fn separated_from(&self, other: &Proportion) -> bool {
        self.lower > other.upper || other.lower > self.upper
    }
}

/// Wilson score interval at normal quantile `z`. Zero trials give `[0, 1]`.
pub fn wilson(successes: usize, trials: usize, z: f64) -> Proportion {
    if trials == 0 {
        return Proportion { successes, trials, estimate: 0.0, lower: 0.0, upper: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        lower: (centre - half).max(0.0),
        upper: (centre + half).min(1.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8/10 at 95%: [0.4902, 0.9433].
        let p = wilson(8, 10, Z95);
        assert!((p.lower - 0.4902).abs() < 1e-4);
        assert!((p.upper - 0.9433).abs() < 1e-4);
        let all = wilson(200, 200, Z95);
        assert_eq!(all.upper, 1.0);
        assert!((all.lower - 0.98116).abs() < 1e-4);
        assert_eq!(wilson(0, 0, Z95).upper, 1.0);
    }

    #[test]
    fn half_width_at_200_trials_is_below_seven_percent() {
        for k in 0..=200 {
            assert!(wilson(k, 200, Z95).half_width() <= 0.07);
        }
    }
}
