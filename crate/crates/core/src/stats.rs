//! Trend tests for fixed-seed columns.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendTest {
    /// Kendall's τ of the values against their position.
    pub tau: f64,
    /// One-sided p-value for a decreasing trend under the exact permutation null.
    pub p_decreasing: f64,
    pub strictly_decreasing: bool,
}

/// Number of permutations of `n` items with each inversion count.
fn mahonian(n: usize) -> Vec<f64> {
    let mut counts = vec![1.0];
    for k in 1..=n {
        let mut next = vec![0.0; counts.len() + k - 1];
        for (i, &c) in counts.iter().enumerate() {
            for j in 0..k {
                next[i + j] += c;
            }
        }
        counts = next;
    }
    counts
}

/// Kendall trend test; ties count as half an inversion.
pub fn kendall_trend(values: &[f64]) -> TrendTest {
    let n = values.len();
    let pairs = n * n.saturating_sub(1) / 2;
    let mut inversions = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            if values[j] < values[i] {
                inversions += 1.0;
            } else if values[j] == values[i] {
                inversions += 0.5;
            }
        }
    }
    let tau = if pairs == 0 {
        0.0
    } else {
        1.0 - 2.0 * inversions / pairs as f64
    };
    let counts = mahonian(n);
    let total: f64 = counts.iter().sum();
    let threshold = inversions.ceil() as usize;
    let tail: f64 = counts.iter().skip(threshold).sum();
    TrendTest {
        tau,
        p_decreasing: tail / total,
        strictly_decreasing: values.windows(2).all(|w| w[1] < w[0]),
    }
}

/// Decreasing at level 0.05, or strictly decreasing when there are too few points for the test.
pub fn is_decreasing(values: &[f64]) -> bool {
    let t = kendall_trend(values);
    if values.len() < 4 {
        t.strictly_decreasing
    } else {
        t.p_decreasing <= 0.05
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mahonian_numbers() {
        assert_eq!(mahonian(3), vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(mahonian(4).iter().sum::<f64>(), 24.0);
    }

    #[test]
    fn perfect_decrease() {
        let t = kendall_trend(&[5.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(t.tau, -1.0);
        assert!((t.p_decreasing - 1.0 / 120.0).abs() < 1e-15);
        assert!(t.strictly_decreasing);
        assert!(is_decreasing(&[5.0, 4.0, 3.0, 2.0, 1.0]));
    }

    #[test]
    fn increase_and_ties() {
        assert!(!is_decreasing(&[1.0, 2.0, 3.0, 4.0, 5.0]));
        let t = kendall_trend(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(t.tau, 0.0);
        assert!(!is_decreasing(&[1.0, 1.0, 1.0, 1.0]));
        assert!(is_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!is_decreasing(&[3.0, 3.0, 1.0]));
    }

    #[test]
    fn one_early_bump_still_decreases() {
        let col = [0.68, 0.76, 0.28, 0.15, 0.075, 0.038, 0.019];
        let t = kendall_trend(&col);
        assert!(t.p_decreasing < 0.01);
        assert!(!t.strictly_decreasing);
    }
}
