//! Fixtures shared by the criterion benches.

use pitchfork_core::{EmpiricalMeasure, ModelParams, NoiseConfig, NoiseMode, NoiseSource};

pub const SEED: u64 = 7;

pub fn noise(mode: NoiseMode) -> NoiseConfig {
    NoiseConfig::new(1.5, 0.5, mode, SEED).expect("valid noise")
}

pub fn params(beta: f64) -> ModelParams {
    ModelParams::new(beta, 0.5).expect("valid params")
}

/// Terminal states of `n` noise paths of length `steps`, as a sample to
/// feed the Wasserstein kernel.
pub fn sample_measure(n: usize, steps: usize, path_offset: u64) -> EmpiricalMeasure {
    let cfg = noise(NoiseMode::NonTruncated);
    let xs = (0..n as u64)
        .map(|i| {
            let src = NoiseSource::new(&cfg, i + path_offset, 1e-3).expect("valid source");
            src.increments(0, steps).iter().sum()
        })
        .collect();
    EmpiricalMeasure::new(xs).expect("finite samples")
}
