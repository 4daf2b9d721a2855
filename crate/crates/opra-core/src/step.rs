//! Right-continuous step functions on `[0, D]`.
//!
//! Every CDF estimate in this crate is carried by a step function with
//! finitely many breakpoints: the value at `t` is the value stored at the
//! largest breakpoint ≤ `t`, the value left of the first breakpoint is 0,
//! and the value beyond the last breakpoint is the last stored value.
//!
//! [`StepCdf`] additionally guarantees nondecreasing values in `[0, 1]`.
//! Raw estimator outputs use [`RawStepFn`]: importance sampling can exceed 1
//! and the doubly robust estimator can be negative or non-monotone, so raw
//! values carry no constraint.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("step function needs at least one breakpoint")]
    Empty,
    #[error("breakpoints and values must have equal length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("breakpoints must be finite, strictly increasing, within [0, {bound}]; offense at index {index}")]
    BadBreakpoint { index: usize, bound: f64 },
    #[error("value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("values must be nondecreasing and within [0, 1]; offense at index {0}")]
    NotACdf(usize),
    #[error("support bound must be positive and finite")]
    BadSupportBound,
}

/// Common evaluation interface for step functions.
pub trait StepFunction {
    fn breakpoints(&self) -> &[f64];
    fn values(&self) -> &[f64];
    fn support_bound(&self) -> f64;

    /// Right-continuous lookup with 0-extension to the left.
    fn value_at(&self, t: f64) -> f64 {
        let bps = self.breakpoints();
        // Index of the first breakpoint > t; NaN compares false, yielding 0.
        let idx = bps.partition_point(|b| *b <= t);
        if idx == 0 {
            0.0
        } else {
            self.values()[idx - 1]
        }
    }

    /// Value at and beyond the last breakpoint.
    fn terminal_value(&self) -> f64 {
        *self.values().last().expect("nonempty by construction")
    }
}

fn validate_breakpoints(bps: &[f64], bound: f64) -> Result<(), StepError> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(StepError::BadSupportBound);
    }
    if bps.is_empty() {
        return Err(StepError::Empty);
    }
    for (i, &b) in bps.iter().enumerate() {
        let increasing = i == 0 || bps[i - 1] < b;
        if !(b.is_finite() && (0.0..=bound).contains(&b) && increasing) {
            return Err(StepError::BadBreakpoint { index: i, bound });
        }
    }
    Ok(())
}

/// A step function with unconstrained (finite) values.
#[derive(Debug, Clone, PartialEq)]
pub struct RawStepFn {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    support_bound: f64,
}

impl RawStepFn {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, support_bound: f64) -> Result<Self, StepError> {
        if breakpoints.len() != values.len() {
            return Err(StepError::LengthMismatch(breakpoints.len(), values.len()));
        }
        validate_breakpoints(&breakpoints, support_bound)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(StepError::NonFiniteValue(i));
        }
        Ok(Self {
            breakpoints,
            values,
            support_bound,
        })
    }
}

impl StepFunction for RawStepFn {
    fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn support_bound(&self) -> f64 {
        self.support_bound
    }
}

/// A monotone step function with values in `[0, 1]`.
///
/// A *complete* CDF ends at exactly 1; sub-distributions (e.g. the clipped
/// importance-sampling estimate, whose terminal value may fall short of 1)
/// are deliberately representable.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    support_bound: f64,
}

impl StepCdf {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, support_bound: f64) -> Result<Self, StepError> {
        if breakpoints.len() != values.len() {
            return Err(StepError::LengthMismatch(breakpoints.len(), values.len()));
        }
        validate_breakpoints(&breakpoints, support_bound)?;
        for (i, &v) in values.iter().enumerate() {
            let monotone = i == 0 || values[i - 1] <= v;
            if !(v.is_finite() && (0.0..=1.0).contains(&v) && monotone) {
                return Err(StepError::NotACdf(i));
            }
        }
        Ok(Self {
            breakpoints,
            values,
            support_bound,
        })
    }

    /// Build the CDF of a discrete distribution given by `(location, mass)`
    /// pairs. Locations are sorted and merged; breakpoints 0 and
    /// `support_bound` are always present. Masses must be nonnegative and sum
    /// to at most 1 (within rounding); values are clamped into `[0, 1]`.
    pub fn from_atoms(atoms: &[(f64, f64)], support_bound: f64) -> Result<Self, StepError> {
        let mut sorted: Vec<(f64, f64)> = atoms.iter().copied().filter(|&(_, m)| m != 0.0).collect();
        sorted.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

        let mut breakpoints: Vec<f64> = Vec::with_capacity(sorted.len() + 2);
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len() + 2);
        let mut acc = 0.0;
        if sorted.first().is_none_or(|&(loc, _)| loc > 0.0) {
            breakpoints.push(0.0);
            values.push(0.0);
        }
        let mut i = 0;
        while i < sorted.len() {
            let loc = sorted[i].0;
            // Ties are merged: the indicator 1{r <= t} is identical for tied
            // locations, so their masses accumulate at one breakpoint.
            while i < sorted.len() && sorted[i].0 == loc {
                acc += sorted[i].1;
                i += 1;
            }
            breakpoints.push(loc);
            values.push(acc.clamp(0.0, 1.0));
        }
        if *breakpoints.last().expect("nonempty") < support_bound {
            breakpoints.push(support_bound);
            values.push(acc.clamp(0.0, 1.0));
        }
        Self::new(breakpoints, values, support_bound)
    }

    /// Jump decomposition: the `(location, mass)` pairs where the CDF
    /// increases. Inverse of [`StepCdf::from_atoms`] up to zero-mass entries.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut prev = 0.0;
        for (&b, &v) in self.breakpoints.iter().zip(self.values.iter()) {
            if v > prev {
                out.push((b, v - prev));
                prev = v;
            }
        }
        out
    }

    /// Whether the terminal value is exactly 1.
    pub fn is_complete(&self) -> bool {
        self.terminal_value() == 1.0
    }

    /// Smallest `t` with `F(t) >= q` (the generalized inverse). Returns the
    /// last breakpoint when the level is never reached.
    pub fn quantile(&self, q: f64) -> f64 {
        for (&b, &v) in self.breakpoints.iter().zip(self.values.iter()) {
            if v >= q {
                return b;
            }
        }
        *self.breakpoints.last().expect("nonempty")
    }

}

impl StepFunction for StepCdf {
    fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }
    fn values(&self) -> &[f64] {
        &self.values
    }
    fn support_bound(&self) -> f64 {
        self.support_bound
    }
}

/// Exact sup-norm distance between two step functions.
///
/// Both functions are right-continuous and constant between breakpoints, so
/// the sup of their difference is attained at a breakpoint of one of them;
/// walking the merged breakpoint sets is exact.
pub fn sup_distance<F: StepFunction + ?Sized, G: StepFunction + ?Sized>(f: &F, g: &G) -> f64 {
    let mut best = 0.0f64;
    let (fb, gb) = (f.breakpoints(), g.breakpoints());
    let (mut i, mut j) = (0usize, 0usize);
    while i < fb.len() || j < gb.len() {
        let t = match (fb.get(i), gb.get(j)) {
            (Some(&a), Some(&b)) if a <= b => {
                if a == b {
                    j += 1;
                }
                i += 1;
                a
            }
            (Some(_), Some(&b)) => {
                j += 1;
                b
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => unreachable!(),
        };
        best = best.max((f.value_at(t) - g.value_at(t)).abs());
    }
    best
}
