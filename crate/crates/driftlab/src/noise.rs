//! Noise rates tied to a mutation parameter range.

use driftlab_core::NoiseConfig;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("noise preset out of range: {0}")]
pub struct BadRange(pub String);

/// Preset rates, with `ln_delta1` kept since `delta1` itself usually
/// underflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisePreset {
    pub delta1: f64,
    pub ln_delta1: f64,
    pub delta2: f64,
    /// Set when `delta1` is too small for a double and was replaced by 0.
    pub delta1_underflow: bool,
}

impl NoisePreset {
    /// Noise config using these rates and neutral adversaries.
    pub fn config(&self) -> NoiseConfig {
        NoiseConfig {
            delta1: self.delta1,
            delta2: self.delta2,
            ..NoiseConfig::noiseless()
        }
    }
}

/// `delta1 = epsilon exp(-c e^{4 c_max + e^{5 c_max}})` and
/// `delta2 = e^{2 (c - c_max)}`, evaluated in log space.
pub fn noise_preset(epsilon: f64, c: f64, c_max: f64) -> Result<NoisePreset, BadRange> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(BadRange(format!("epsilon = {epsilon} must lie in (0, 1]")));
    }
    if !(c > 0.0 && c < c_max && c_max.is_finite()) {
        return Err(BadRange(format!("need 0 < c < c_max, got c = {c}, c_max = {c_max}")));
    }
    // ln delta1 = ln epsilon - c exp(4 c_max + exp(5 c_max)); the inner
    // exponent is formed first so that overflow shows up as -inf.
    let exponent = 4.0 * c_max + (5.0 * c_max).exp();
    let ln_delta1 = epsilon.ln() - c * exponent.exp();
    let delta1 = ln_delta1.exp();
    let delta1_underflow = delta1 < f64::MIN_POSITIVE;
    Ok(NoisePreset {
        delta1: if delta1_underflow { 0.0 } else { delta1 },
        ln_delta1,
        delta2: (2.0 * (c - c_max)).exp(),
        delta1_underflow,
    })
}
