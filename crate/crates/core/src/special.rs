//! Gaussian helpers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `∫_0^τ Φ(b/√r) dr`, closed form.
pub fn integrated_norm_cdf(b: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if b < 0.0 {
        return tau - integrated_norm_cdf(-b, tau);
    }
    let st = tau.sqrt();
    let v = b / st;
    tau * norm_cdf(v) + b * st * norm_pdf(v) - b * b * norm_cdf(-v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((norm_cdf(-8.0) - 6.220_960_574_271_785e-16).abs() < 1e-28);
    }

    #[test]
    fn integrated_cdf_matches_midpoint_sum() {
        for &(b, tau) in &[(0.3, 1.0), (-0.2, 0.5), (0.0, 2.0), (1.5, 0.01)] {
            let n = 200_000;
            let h = tau / n as f64;
            let brute: f64 = (0..n).map(|i| norm_cdf(b / ((i as f64 + 0.5) * h).sqrt()) * h).sum();
            assert!((integrated_norm_cdf(b, tau) - brute).abs() < 1e-6, "b={b} tau={tau}");
        }
    }
}
