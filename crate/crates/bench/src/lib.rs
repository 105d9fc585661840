//! Shared fixtures for the criterion benches.

use revuz_core::{DensityFn, Interval, SmoothMeasure};

pub const SEED: u64 = 7;

pub fn unit_indicator() -> SmoothMeasure {
    SmoothMeasure::indicator(0.0, 1.0)
}

pub fn perturbed(n: u32) -> SmoothMeasure {
    SmoothMeasure::family(DensityFn::Perturbed { n }, Interval::new(0.0, 1.0))
}

pub fn spike(n: u32) -> SmoothMeasure {
    SmoothMeasure::family(DensityFn::Spike { n }, Interval::new(0.0, 1.0))
}

pub fn perturbed_limit() -> SmoothMeasure {
    SmoothMeasure::family(DensityFn::PerturbedLimit, Interval::new(0.0, 1.0))
}
