//! Off-policy CDF estimators.
//!
//! Six estimators of the target policy's reward CDF from logged data:
//!
//! - `IS`: importance sampling, `F̂(t) = (1/n) Σ w_i 1{r_i <= t}`. Unbiased,
//!   but the raw output may exceed 1.
//! - `IS-clip`: `min{F̂_IS(t), 1}` — pointwise clipping, no monotonicity
//!   repair needed because the IS estimate is already nondecreasing.
//! - `WIS`: weights normalized by their sum; always a valid CDF, biased but
//!   consistent.
//! - `DM`: the direct method, averaging the model `Ḡ(t; x_i, π)`.
//! - `DR`: doubly robust, `(1/n) Σ [w_i (1{r_i <= t} - Ḡ(t; x_i, a_i)) +
//!   Ḡ(t; x_i, π)]`. Unbiased for any fixed model and variance-reduced when
//!   the model is close to the truth; the raw output can be negative or
//!   non-monotone.
//! - `M-DR`: [`monotone_clip`] applied to DR — a running maximum, clipping
//!   to `[0, 1]`, and a terminal value of 1 at the reward bound.
//!
//! Model-based estimators are evaluated on the union of observed rewards,
//! the model grid, and `{0, D}`: they change value at both data jumps and
//! grid jumps, so evaluating elsewhere loses nothing.

use alloc::vec::Vec;
use thiserror::Error;

use crate::data::LoggedDataset;
use crate::model::{ConditionalCdf, ModelError, ThresholdGrid};
use crate::policy::{row_weights, PolicyError, PolicySpec};
use crate::step::{RawStepFn, StepCdf, StepError, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Is,
    IsClip,
    Wis,
    Dm,
    Dr,
    MDr,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Is => "is",
            Self::IsClip => "is-clip",
            Self::Wis => "wis",
            Self::Dm => "dm",
            Self::Dr => "dr",
            Self::MDr => "m-dr",
        }
    }

    /// Whether the estimator needs a conditional reward model.
    pub fn needs_model(self) -> bool {
        matches!(self, Self::Dm | Self::Dr | Self::MDr)
    }
}

impl core::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("estimation needs at least one row")]
    EmptyDataset,
    #[error("cross-fitting needs at least two rows")]
    TooFewRowsForCrossfit,
    #[error("total importance weight is zero; cannot normalize")]
    ZeroTotalWeight,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// Weighted empirical CDF: sort rewards ascending, merge ties (tied rewards
/// have identical indicators, so their weights accumulate at one
/// breakpoint), divide the running sum by `denom`, and pad breakpoints 0 and
/// `D`. With `denom = None` the final accumulated sum is the denominator,
/// which makes the terminal value exactly 1 (the self-normalized case).
fn weighted_ecdf(
    data: &LoggedDataset,
    weights: &[f64],
    denom: Option<f64>,
) -> Result<RawStepFn, EstimatorError> {
    let d = data.reward_bound();
    let mut pairs: Vec<(f64, f64)> = data
        .rows()
        .iter()
        .map(|r| r.reward)
        .zip(weights.iter().copied())
        .collect();
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    let mut breakpoints = Vec::with_capacity(pairs.len() + 2);
    let mut cumulative = Vec::with_capacity(pairs.len() + 2);
    if pairs[0].0 > 0.0 {
        breakpoints.push(0.0);
        cumulative.push(0.0);
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let reward = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == reward {
            acc += pairs[i].1;
            i += 1;
        }
        breakpoints.push(reward);
        cumulative.push(acc);
    }
    if *breakpoints.last().unwrap() < d {
        breakpoints.push(d);
        cumulative.push(acc);
    }
    let denom = match denom {
        Some(v) => v,
        None if acc > 0.0 => acc,
        None => return Err(EstimatorError::ZeroTotalWeight),
    };
    let values = cumulative.iter().map(|c| c / denom).collect();
    Ok(RawStepFn::new(breakpoints, values, d)?)
}

/// The importance sampling estimator (raw: values may exceed 1).
pub fn estimate_is(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
) -> Result<RawStepFn, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyDataset);
    }
    let weights = row_weights(data, target, behavior)?;
    weighted_ecdf(data, &weights, Some(data.len() as f64))
}

/// The clipped importance sampling estimator: `min{F̂_IS(t), 1}` pointwise.
/// The terminal value is *not* forced to 1, so the result may be a
/// sub-distribution.
pub fn estimate_is_clip(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
) -> Result<StepCdf, EstimatorError> {
    let raw = estimate_is(data, target, behavior)?;
    let values = raw.values().iter().map(|v| v.min(1.0)).collect();
    Ok(StepCdf::new(
        raw.breakpoints().to_vec(),
        values,
        raw.support_bound(),
    )?)
}

/// The weighted (self-normalized) importance sampling estimator. Always a
/// valid CDF reaching exactly 1 at the largest observed reward.
pub fn estimate_wis(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
) -> Result<StepCdf, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyDataset);
    }
    let weights = row_weights(data, target, behavior)?;
    let raw = weighted_ecdf(data, &weights, None)?;
    let (bps, vals, d) = (raw.breakpoints().to_vec(), raw.values().to_vec(), raw.support_bound());
    Ok(StepCdf::new(bps, vals, d)?)
}

/// Breakpoints for model-based estimators: observed rewards ∪ grid ∪ {0, D}.
fn model_breakpoints(data: &LoggedDataset, grid: &ThresholdGrid) -> Vec<f64> {
    let mut bps: Vec<f64> = data.rows().iter().map(|r| r.reward).collect();
    bps.extend_from_slice(grid.thresholds());
    bps.push(0.0);
    bps.push(data.reward_bound());
    bps.sort_unstable_by(f64::total_cmp);
    bps.dedup();
    bps
}

/// The direct method: `F̂(t) = (1/n) Σ_i Ḡ(t; x_i, π)`.
pub fn estimate_dm(
    data: &LoggedDataset,
    target: &PolicySpec,
    model: &dyn ConditionalCdf,
    grid: &ThresholdGrid,
) -> Result<StepCdf, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyDataset);
    }
    let bps = model_breakpoints(data, grid);
    let mut sums = alloc::vec![0.0; bps.len()];
    for r in data.rows() {
        for (s, v) in sums.iter_mut().zip(model.marginalize_many(&bps, &r.context, target)?) {
            *s += v;
        }
    }
    let n = data.len() as f64;
    let values: Vec<f64> = sums.iter().map(|s| (s / n).clamp(0.0, 1.0)).collect();
    Ok(StepCdf::new(bps, values, data.reward_bound())?)
}

/// The doubly robust estimator (raw: may be negative or non-monotone).
///
/// Computed as `F̂_IS(t) + (1/n) Σ_i [Ḡ(t; x_i, π) - w_i Ḡ(t; x_i, a_i)]`,
/// which reduces to the importance sampling estimate exactly when the model
/// is identically zero.
pub fn estimate_dr(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
    model: &dyn ConditionalCdf,
    grid: &ThresholdGrid,
) -> Result<RawStepFn, EstimatorError> {
    if data.is_empty() {
        return Err(EstimatorError::EmptyDataset);
    }
    let weights = row_weights(data, target, behavior)?;
    let is_part = weighted_ecdf(data, &weights, Some(data.len() as f64))?;
    let bps = model_breakpoints(data, grid);
    let mut correction = alloc::vec![0.0; bps.len()];
    for (r, &w) in data.rows().iter().zip(weights.iter()) {
        let own = model.evaluate_many(&bps, &r.context, r.action);
        let marginal = model.marginalize_many(&bps, &r.context, target)?;
        for ((c, m), o) in correction.iter_mut().zip(marginal).zip(own) {
            *c += m - w * o;
        }
    }
    let n = data.len() as f64;
    let values: Vec<f64> = bps
        .iter()
        .zip(correction.iter())
        .map(|(&t, c)| is_part.value_at(t) + c / n)
        .collect();
    Ok(RawStepFn::new(bps, values, data.reward_bound())?)
}

/// Project a raw estimate onto valid CDFs: running maximum (the accumulation
/// that forbids decreases), clipping to `[0, 1]`, and terminal value 1 at
/// the reward bound.
pub fn monotone_clip(raw: &RawStepFn) -> StepCdf {
    let d = raw.support_bound();
    let mut bps = raw.breakpoints().to_vec();
    let mut running = f64::NEG_INFINITY;
    let mut values: Vec<f64> = raw
        .values()
        .iter()
        .map(|&v| {
            running = running.max(v);
            running.clamp(0.0, 1.0)
        })
        .collect();
    if *bps.last().unwrap() < d {
        bps.push(d);
        values.push(1.0);
    } else {
        *values.last_mut().unwrap() = 1.0;
    }
    StepCdf::new(bps, values, d).expect("running max + clip yields a valid CDF")
}

/// Index-parity halves used for cross-fitting.
fn parity_split(n: usize) -> (Vec<usize>, Vec<usize>) {
    let even = (0..n).step_by(2).collect();
    let odd = (1..n).step_by(2).collect();
    (even, odd)
}

fn average_values<F: StepFunction, G: StepFunction>(f: &F, g: &G) -> (Vec<f64>, Vec<f64>) {
    let mut bps: Vec<f64> = f
        .breakpoints()
        .iter()
        .chain(g.breakpoints())
        .copied()
        .collect();
    bps.sort_unstable_by(f64::total_cmp);
    bps.dedup();
    let values = bps
        .iter()
        .map(|&t| 0.5 * (f.value_at(t) + g.value_at(t)))
        .collect();
    (bps, values)
}

/// Two-fold cross-fitted direct method: fit the model on each index-parity
/// half, estimate on the opposite half, and average the two step functions
/// on the union of their breakpoints.
pub fn estimate_dm_crossfit<M, F>(
    data: &LoggedDataset,
    target: &PolicySpec,
    grid: &ThresholdGrid,
    fit: F,
) -> Result<StepCdf, EstimatorError>
where
    M: ConditionalCdf,
    F: Fn(&LoggedDataset) -> Result<M, ModelError>,
{
    let (first, second) = crossfit_parts(data, &fit)?;
    let f = estimate_dm(&first.0, target, &second.1, grid)?;
    let g = estimate_dm(&second.0, target, &first.1, grid)?;
    let (bps, values) = average_values(&f, &g);
    Ok(StepCdf::new(bps, values, data.reward_bound())?)
}

/// Two-fold cross-fitted doubly robust estimator (raw).
pub fn estimate_dr_crossfit<M, F>(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
    grid: &ThresholdGrid,
    fit: F,
) -> Result<RawStepFn, EstimatorError>
where
    M: ConditionalCdf,
    F: Fn(&LoggedDataset) -> Result<M, ModelError>,
{
    let (first, second) = crossfit_parts(data, &fit)?;
    let f = estimate_dr(&first.0, target, behavior, &second.1, grid)?;
    let g = estimate_dr(&second.0, target, behavior, &first.1, grid)?;
    let (bps, values) = average_values(&f, &g);
    Ok(RawStepFn::new(bps, values, data.reward_bound())?)
}

type Fold<M> = (LoggedDataset, M);

fn crossfit_parts<M, F>(data: &LoggedDataset, fit: &F) -> Result<(Fold<M>, Fold<M>), EstimatorError>
where
    M: ConditionalCdf,
    F: Fn(&LoggedDataset) -> Result<M, ModelError>,
{
    if data.len() < 2 {
        return Err(EstimatorError::TooFewRowsForCrossfit);
    }
    let (even_idx, odd_idx) = parity_split(data.len());
    let even = data.subset(&even_idx).expect("subset of valid dataset is valid");
    let odd = data.subset(&odd_idx).expect("subset of valid dataset is valid");
    let model_even = fit(&even)?;
    let model_odd = fit(&odd)?;
    Ok(((even, model_even), (odd, model_odd)))
}
