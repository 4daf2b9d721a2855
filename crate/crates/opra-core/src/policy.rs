//! Policy representations and importance weights.
//!
//! A policy is a conditional distribution over `K` actions given a context.
//! The importance weight `w(a, x) = π(a|x) / β(a|x)` corrects the
//! distribution shift between the behavior policy β that logged the data and
//! the target policy π being assessed. The weight statistics
//! `w_max = sup_{a,x} w(a, x)` and `w₂ = E_β[w(A, X)²]` drive every
//! finite-sample confidence band in [`crate::bound`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::data::LoggedDataset;

/// Behavior probabilities at or below this floor are treated as absolute
/// continuity violations. Weights are rejected, not clipped: silent clipping
/// would bias the estimators invisibly.
pub const PROPENSITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("context not in table: {0}")]
    ContextNotInTable(String),
    #[error("action {action} out of range for policy with {count} actions")]
    ActionRange { action: usize, count: usize },
    #[error("probability vector must have {expected} entries, got {got}")]
    BadVectorLength { expected: usize, got: usize },
    #[error("probability vector must be nonnegative and sum to 1 within 1e-9 (sum {sum})")]
    BadProbabilityVector { sum: f64 },
    #[error("mixture alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("absolute continuity violated: behavior probability {propensity:e} at or below floor {floor:e}")]
    AbsoluteContinuity { propensity: f64, floor: f64 },
    #[error("row {row}: absolute continuity violated (behavior probability {propensity:e})")]
    AbsoluteContinuityAtRow { row: usize, propensity: f64 },
    #[error("row {row}: behavior source unresolved (no logged propensity and no behavior policy)")]
    UnresolvedBehavior { row: usize },
    #[error("weight statistics need w_max > 0 and w_2 > 0, both finite")]
    BadWeightStats,
    #[error("exact weight statistics require w_2 <= w_max (got w_2 {w_2}, w_max {w_max})")]
    WeightStatsOrder { w_2: f64, w_max: f64 },
    #[error("empty support")]
    EmptySupport,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("softmax policy needs one weight row and one bias entry per action")]
    BadSoftmaxShape,
    #[error("policy parameter {0} is not finite")]
    NonFiniteParameter(f64),
}

/// Canonical discretization key for a context vector: each feature rendered
/// with shortest round-trip formatting, joined by `,`. Negative zero is
/// normalized so `-0.0` and `0.0` collide.
pub fn context_key(context: &[f64]) -> String {
    let mut out = String::new();
    for (i, &x) in context.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let x = if x == 0.0 { 0.0 } else { x };
        out.push_str(&format!("{x}"));
    }
    out
}

/// A conditional distribution over actions given a context.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// Explicit probability vector per discretized context key.
    Tabular {
        table: BTreeMap<String, Vec<f64>>,
        action_count: usize,
    },
    /// `softmax(W x + b)` with one weight row and bias entry per action.
    SoftmaxLinear { weights: Vec<Vec<f64>>, bias: Vec<f64> },
    /// `alpha * base(a|x) + (1 - alpha) / K`.
    Mixture { base: Box<PolicySpec>, alpha: f64 },
}

fn validate_prob_vector(probs: &[f64], action_count: usize) -> Result<(), PolicyError> {
    if probs.len() != action_count {
        return Err(PolicyError::BadVectorLength {
            expected: action_count,
            got: probs.len(),
        });
    }
    let mut sum = 0.0;
    for &p in probs {
        if !(p.is_finite() && p >= 0.0) {
            return Err(PolicyError::BadProbabilityVector { sum: p });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(PolicyError::BadProbabilityVector { sum });
    }
    Ok(())
}

impl PolicySpec {
    pub fn tabular(table: BTreeMap<String, Vec<f64>>, action_count: usize) -> Result<Self, PolicyError> {
        for probs in table.values() {
            validate_prob_vector(probs, action_count)?;
        }
        Ok(Self::Tabular { table, action_count })
    }

    /// Tabular policy over contexts given as raw feature vectors, keyed by
    /// [`context_key`].
    pub fn tabular_from_contexts(
        entries: &[(&[f64], Vec<f64>)],
        action_count: usize,
    ) -> Result<Self, PolicyError> {
        let mut table = BTreeMap::new();
        for (context, probs) in entries {
            table.insert(context_key(context), probs.clone());
        }
        Self::tabular(table, action_count)
    }

    pub fn softmax_linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self, PolicyError> {
        if weights.is_empty() || weights.len() != bias.len() {
            return Err(PolicyError::BadSoftmaxShape);
        }
        let dim = weights[0].len();
        for row in &weights {
            if row.len() != dim {
                return Err(PolicyError::BadSoftmaxShape);
            }
            for &w in row {
                if !w.is_finite() {
                    return Err(PolicyError::NonFiniteParameter(w));
                }
            }
        }
        for &b in &bias {
            if !b.is_finite() {
                return Err(PolicyError::NonFiniteParameter(b));
            }
        }
        Ok(Self::SoftmaxLinear { weights, bias })
    }

    pub fn mixture(base: PolicySpec, alpha: f64) -> Result<Self, PolicyError> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
            return Err(PolicyError::BadAlpha(alpha));
        }
        Ok(Self::Mixture {
            base: Box::new(base),
            alpha,
        })
    }

    pub fn action_count(&self) -> usize {
        match self {
            Self::Tabular { action_count, .. } => *action_count,
            Self::SoftmaxLinear { weights, .. } => weights.len(),
            Self::Mixture { base, .. } => base.action_count(),
        }
    }

    /// The full probability vector π(·|x).
    pub fn action_probabilities(&self, context: &[f64]) -> Result<Vec<f64>, PolicyError> {
        match self {
            Self::Tabular { table, .. } => {
                let key = context_key(context);
                table
                    .get(&key)
                    .cloned()
                    .ok_or(PolicyError::ContextNotInTable(key))
            }
            Self::SoftmaxLinear { weights, bias } => {
                let mut logits: Vec<f64> = weights
                    .iter()
                    .zip(bias.iter())
                    .map(|(row, b)| b + row.iter().zip(context.iter()).map(|(w, x)| w * x).sum::<f64>())
                    .collect();
                // Stable softmax: subtract the max logit before exponentiating.
                let max = logits.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l));
                let mut sum = 0.0;
                for l in logits.iter_mut() {
                    *l = libm::exp(*l - max);
                    sum += *l;
                }
                for l in logits.iter_mut() {
                    *l /= sum;
                }
                Ok(logits)
            }
            Self::Mixture { base, alpha } => {
                let k = base.action_count() as f64;
                let mut probs = base.action_probabilities(context)?;
                for p in probs.iter_mut() {
                    *p = alpha * *p + (1.0 - alpha) / k;
                }
                Ok(probs)
            }
        }
    }

    /// π(a|x).
    pub fn action_probability(&self, context: &[f64], action: usize) -> Result<f64, PolicyError> {
        let count = self.action_count();
        if action >= count {
            return Err(PolicyError::ActionRange { action, count });
        }
        Ok(self.action_probabilities(context)?[action])
    }
}

/// `π(a|x) / β(a|x)` with the behavior probability checked against the floor.
pub fn importance_weight(
    target: &PolicySpec,
    behavior: &PolicySpec,
    context: &[f64],
    action: usize,
) -> Result<f64, PolicyError> {
    let beta = behavior.action_probability(context, action)?;
    if beta <= PROPENSITY_FLOOR {
        return Err(PolicyError::AbsoluteContinuity {
            propensity: beta,
            floor: PROPENSITY_FLOOR,
        });
    }
    Ok(target.action_probability(context, action)? / beta)
}

/// Per-row importance weights for a dataset.
///
/// A row's logged propensity, when present, takes precedence over evaluating
/// the behavior policy; `behavior` may therefore be `None` for fully logged
/// datasets. Errors name the offending row.
pub fn row_weights(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
) -> Result<Vec<f64>, PolicyError> {
    let mut weights = Vec::with_capacity(data.len());
    for (row, r) in data.rows().iter().enumerate() {
        let beta = match (r.logged_propensity, behavior) {
            (Some(p), _) => p,
            (None, Some(b)) => b.action_probability(&r.context, r.action)?,
            (None, None) => return Err(PolicyError::UnresolvedBehavior { row }),
        };
        if beta <= PROPENSITY_FLOOR {
            return Err(PolicyError::AbsoluteContinuityAtRow { row, propensity: beta });
        }
        weights.push(target.action_probability(&r.context, r.action)? / beta);
    }
    Ok(weights)
}

/// Whether weight statistics are exact suprema/expectations over an
/// enumerable environment or plug-in estimates from a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightStatsSource {
    Exact,
    Empirical,
}

/// `w_max` and `w₂` for a (target, behavior) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightStats {
    pub w_max: f64,
    pub w_2: f64,
    pub source: WeightStatsSource,
}

impl WeightStats {
    /// For exact statistics `w₂ <= w_max` must hold (it follows from
    /// `E_β[w] = 1`); empirical plug-ins only satisfy `w₂ <= w_max²`.
    pub fn new(w_max: f64, w_2: f64, source: WeightStatsSource) -> Result<Self, PolicyError> {
        if !(w_max.is_finite() && w_max > 0.0 && w_2.is_finite() && w_2 > 0.0) {
            return Err(PolicyError::BadWeightStats);
        }
        let limit = match source {
            WeightStatsSource::Exact => w_max,
            WeightStatsSource::Empirical => w_max * w_max,
        };
        if w_2 > limit * (1.0 + 1e-12) {
            return Err(PolicyError::WeightStatsOrder { w_2, w_max });
        }
        Ok(Self { w_max, w_2, source })
    }

    pub fn exact(w_max: f64, w_2: f64) -> Result<Self, PolicyError> {
        Self::new(w_max, w_2, WeightStatsSource::Exact)
    }
}

/// Plug-in weight statistics from a logged sample: `w_max` over observed
/// pairs and `w₂` as the sample mean of `w²`. Flagged [`WeightStatsSource::Empirical`].
pub fn weight_stats_empirical(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
) -> Result<WeightStats, PolicyError> {
    if data.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let weights = row_weights(data, target, behavior)?;
    let w_max = weights.iter().fold(0.0f64, |m, &w| m.max(w));
    let w_2 = weights.iter().map(|w| w * w).sum::<f64>() / weights.len() as f64;
    WeightStats::new(w_max, w_2, WeightStatsSource::Empirical)
}

/// Empirical-frequency behavior policy with additive smoothing:
/// `β̂(a|x) = (count(x, a) + smoothing) / (count(x) + K * smoothing)`.
///
/// Returns the tabular policy together with `inf β̂` over every (key, action)
/// cell, the constant needed to widen a confidence band for estimated
/// weights.
pub fn estimate_behavior_tabular(
    data: &LoggedDataset,
    key_fn: &dyn Fn(&[f64]) -> String,
    smoothing: f64,
) -> Result<(PolicySpec, f64), PolicyError> {
    if data.is_empty() {
        return Err(PolicyError::EmptyDataset);
    }
    let k = data.action_count();
    let mut counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in data.rows() {
        let entry = counts.entry(key_fn(&r.context)).or_insert_with(|| {
            let mut v = Vec::new();
            v.resize(k, 0.0);
            v
        });
        entry[r.action] += 1.0;
    }
    let mut inf_beta = f64::INFINITY;
    let mut table = BTreeMap::new();
    for (key, cell) in counts {
        let total: f64 = cell.iter().sum::<f64>() + k as f64 * smoothing;
        let probs: Vec<f64> = cell.iter().map(|c| (c + smoothing) / total).collect();
        for &p in &probs {
            inf_beta = inf_beta.min(p);
        }
        table.insert(key, probs);
    }
    Ok((PolicySpec::tabular(table, k)?, inf_beta))
}
