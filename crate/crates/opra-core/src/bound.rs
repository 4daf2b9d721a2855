//! Closed-form finite-sample sup-norm confidence half-widths.
//!
//! Each function returns an `ε` such that the corresponding CDF estimate
//! satisfies `‖F̂ − F‖∞ <= ε` with probability at least `1 − δ`:
//!
//! - [`eps_is_hoeffding`]: `√(8 w_max² ln(4/δ) / n)` for the clipped IS
//!   estimator.
//! - [`eps_is_bernstein`]: `4 w_max ln(4/δ)/n + 2 √(2 w₂ ln(4/δ)/n)`, which
//!   beats the Hoeffding form whenever `w₂ ≪ w_max²`.
//! - [`eps_dr`]: `√(72 w_max² ln(8 √n / δ) / n)` for the monotonized DR
//!   estimator.
//! - [`eps_estimated_policy`]: adds `w_max · ε_β / inf β̂` when importance
//!   weights use an estimated behavior policy that is `ε_β`-close to the
//!   truth.
//! - [`eps_dkw`]: the classical on-policy `√(ln(2/δ) / (2n))` baseline
//!   (Massart's constant), i.e. the `w_max = 1` reference point.
//!
//! Logarithms are natural throughout. Bounds are valid with the *true*
//! `w_max`/`w₂`; with empirical plug-ins they are heuristics and reports
//! must say so.

use thiserror::Error;

use crate::policy::WeightStats;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("delta must lie strictly between 0 and 1, got {0}")]
    BadDelta(f64),
    #[error("sample size must be at least 1")]
    ZeroSamples,
    #[error("epsilon_beta must be nonnegative and finite, got {0}")]
    BadEpsBeta(f64),
    #[error("inf of the estimated behavior policy must be positive, got {0}")]
    ZeroInfBeta(f64),
}

/// Which concentration result a band comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandMethod {
    IsHoeffding,
    IsBernstein,
    Dr,
    EstimatedPolicyAdjusted,
    Dkw,
}

impl BandMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::IsHoeffding => "is-hoeffding",
            Self::IsBernstein => "is-bernstein",
            Self::Dr => "dr",
            Self::EstimatedPolicyAdjusted => "estimated-policy-adjusted",
            Self::Dkw => "dkw",
        }
    }
}

impl core::fmt::Display for BandMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the closed forms need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub delta: f64,
    pub stats: WeightStats,
}

impl BoundInputs {
    pub fn new(n: usize, delta: f64, stats: WeightStats) -> Result<Self, BoundError> {
        if n == 0 {
            return Err(BoundError::ZeroSamples);
        }
        if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
            return Err(BoundError::BadDelta(delta));
        }
        Ok(Self { n, delta, stats })
    }
}

/// A sup-norm half-width together with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceBand {
    pub epsilon: f64,
    pub delta: f64,
    pub method: BandMethod,
}

impl ConfidenceBand {
    /// A band wider than 1 says nothing about a pair of `[0, 1]`-valued
    /// CDFs. Vacuous bands are reported, flagged, never suppressed.
    pub fn is_vacuous(&self) -> bool {
        self.epsilon >= 1.0
    }
}

/// Hoeffding-style half-width for the clipped IS estimator.
pub fn eps_is_hoeffding(inputs: &BoundInputs) -> f64 {
    let w = inputs.stats.w_max;
    libm::sqrt(8.0 * w * w * libm::log(4.0 / inputs.delta) / inputs.n as f64)
}

/// Bernstein-style half-width for the clipped IS estimator.
pub fn eps_is_bernstein(inputs: &BoundInputs) -> f64 {
    let n = inputs.n as f64;
    let log_term = libm::log(4.0 / inputs.delta);
    4.0 * inputs.stats.w_max * log_term / n + 2.0 * libm::sqrt(2.0 * inputs.stats.w_2 * log_term / n)
}

/// Half-width for the monotonized doubly robust estimator.
pub fn eps_dr(inputs: &BoundInputs) -> f64 {
    let n = inputs.n as f64;
    let w = inputs.stats.w_max;
    libm::sqrt(72.0 * w * w * libm::log(8.0 * libm::sqrt(n) / inputs.delta) / n)
}

/// Widen a band for importance weights built from an estimated behavior
/// policy: `ε + c ε_β` with `c = w_max / inf β̂`.
pub fn eps_estimated_policy(
    base_eps: f64,
    w_max: f64,
    eps_beta: f64,
    inf_beta_hat: f64,
) -> Result<f64, BoundError> {
    if !(eps_beta.is_finite() && eps_beta >= 0.0) {
        return Err(BoundError::BadEpsBeta(eps_beta));
    }
    if !(inf_beta_hat > 0.0) {
        return Err(BoundError::ZeroInfBeta(inf_beta_hat));
    }
    Ok(base_eps + w_max * eps_beta / inf_beta_hat)
}

/// The on-policy empirical-CDF baseline (DKW with Massart's constant).
pub fn eps_dkw(n: usize, delta: f64) -> Result<f64, BoundError> {
    if n == 0 {
        return Err(BoundError::ZeroSamples);
    }
    if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
        return Err(BoundError::BadDelta(delta));
    }
    Ok(libm::sqrt(libm::log(2.0 / delta) / (2.0 * n as f64)))
}
