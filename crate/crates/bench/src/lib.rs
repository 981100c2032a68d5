//! Benchmark-only crate; see benches/.

pub const DRIFT: &str = include_str!("../../../models/drift.muz");
pub const KALMAN: &str = include_str!("../../../models/kalman.muz");

/// A deterministic observation stream for the benchmark models.
pub fn observations(steps: usize) -> Vec<f64> {
    (0..steps).map(|t| (t as f64 * 0.37).sin() + 0.1 * t as f64).collect()
}
