//! Shared fixtures for the criterion benches.

use std::f64::consts::PI;

use squint_core::harness::{preset, ScenarioConfig};
use squint_core::{new_css, CollectiveSpinState, Result};

/// Atom number of the QND preset.
pub const BENCH_ATOMS: u32 = 1170;

/// CSS along `+x`.
pub fn equatorial_css(n_atoms: u32) -> Result<CollectiveSpinState> {
    new_css(n_atoms, PI / 2.0, 0.0)
}

/// `y0 + A sin(φ - φ0)` sampled at `n` equally spaced phases.
pub fn fringe_samples(n: usize, y0: f64, amplitude: f64, phi0: f64) -> (Vec<f64>, Vec<f64>) {
    let phases: Vec<f64> = (0..n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let values = phases.iter().map(|&p| y0 + amplitude * (p - phi0).sin()).collect();
    (phases, values)
}

/// A preset cut down to `n_trials` signal trials.
pub fn small_scenario(name: &str, n_trials: u32) -> Result<ScenarioConfig> {
    let mut cfg = preset(name)?;
    cfg.n_trials = n_trials;
    Ok(cfg)
}
