//! Conditional reward-CDF models `Ḡ(t; x, a)`.
//!
//! The direct method and doubly robust estimators need a model of the
//! conditional reward distribution. Any model must behave like a CDF in `t`
//! for every (context, action): values in `[0, 1]`, nondecreasing in `t`,
//! 0 below the support and 1 at or beyond the reward bound. Three
//! implementations are provided:
//!
//! - [`TabularCdfModel`]: empirical conditional CDF per discretized context
//!   key, with optional additive smoothing toward the uniform distribution
//!   and a marginal-CDF fallback for unseen cells.
//! - [`LogisticCdfModel`]: one binary logistic regression per (action,
//!   threshold) predicting `1{r <= t_j}`, trained by full-batch gradient
//!   descent; a running-maximum pass along the grid repairs any
//!   non-monotonicity across thresholds.
//! - [`OracleCdf`]: the exact `G` of a finite environment, for validation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::data::LoggedDataset;
use crate::env::FiniteEnv;
use crate::policy::{PolicyError, PolicySpec};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("threshold grid must be strictly increasing, start at or above 0, and end exactly at the reward bound")]
    BadGrid,
    #[error("learning rate and epochs must be positive, l2 nonnegative")]
    BadFitConfig,
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Strictly increasing thresholds spanning `[0, D]`; the last one is `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    thresholds: Vec<f64>,
    reward_bound: f64,
}

impl ThresholdGrid {
    pub fn new(thresholds: Vec<f64>, reward_bound: f64) -> Result<Self, ModelError> {
        let ok = !thresholds.is_empty()
            && thresholds.windows(2).all(|w| w[0] < w[1])
            && thresholds[0] >= 0.0
            && *thresholds.last().unwrap() == reward_bound;
        if !ok {
            return Err(ModelError::BadGrid);
        }
        Ok(Self {
            thresholds,
            reward_bound,
        })
    }

    /// `count` evenly spaced thresholds from 0 to `reward_bound` inclusive.
    pub fn even(count: usize, reward_bound: f64) -> Result<Self, ModelError> {
        if count < 2 {
            return Err(ModelError::BadGrid);
        }
        let thresholds = (0..count)
            .map(|j| reward_bound * j as f64 / (count - 1) as f64)
            .collect();
        Self::new(thresholds, reward_bound)
    }

    /// Default grid for a dataset: 33 evenly spaced thresholds plus the
    /// distinct observed rewards when there are fewer than 64 of them. This
    /// keeps model-based estimators exact at the estimator breakpoints
    /// whenever the reward support is small.
    pub fn default_for(data: &LoggedDataset) -> Result<Self, ModelError> {
        let d = data.reward_bound();
        let mut thresholds: Vec<f64> = (0..33).map(|j| d * j as f64 / 32.0).collect();
        let mut observed: Vec<f64> = data.rows().iter().map(|r| r.reward).collect();
        observed.sort_unstable_by(f64::total_cmp);
        observed.dedup();
        if observed.len() < 64 {
            thresholds.extend_from_slice(&observed);
            thresholds.sort_unstable_by(f64::total_cmp);
            thresholds.dedup();
        }
        Self::new(thresholds, d)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Index of the largest threshold ≤ t, if any.
    fn floor_index(&self, t: f64) -> Option<usize> {
        let idx = self.thresholds.partition_point(|b| *b <= t);
        idx.checked_sub(1)
    }
}

/// A model of the conditional reward CDF given context and action.
pub trait ConditionalCdf {
    fn reward_bound(&self) -> f64;
    fn action_count(&self) -> usize;

    /// `Ḡ(t; x, a)`.
    fn evaluate(&self, t: f64, context: &[f64], action: usize) -> f64;

    /// Batched evaluation for thresholds sorted ascending.
    fn evaluate_many(&self, ts: &[f64], context: &[f64], action: usize) -> Vec<f64> {
        ts.iter().map(|&t| self.evaluate(t, context, action)).collect()
    }

    /// `Ḡ(t; x, π) = Σ_a π(a|x) Ḡ(t; x, a)`.
    fn marginalize(&self, t: f64, context: &[f64], policy: &PolicySpec) -> Result<f64, PolicyError> {
        let probs = policy.action_probabilities(context)?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(a, p)| p * self.evaluate(t, context, a))
            .sum())
    }

    /// Batched marginalization for thresholds sorted ascending.
    fn marginalize_many(
        &self,
        ts: &[f64],
        context: &[f64],
        policy: &PolicySpec,
    ) -> Result<Vec<f64>, PolicyError> {
        let probs = policy.action_probabilities(context)?;
        let mut out = vec![0.0; ts.len()];
        for (a, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.evaluate_many(ts, context, a)) {
                *o += p * v;
            }
        }
        Ok(out)
    }
}

/// Empirical conditional-CDF counts per `(context key, action)` cell.
#[derive(Debug, Clone)]
pub struct TabularCdfModel {
    cells: alloc::collections::BTreeMap<String, Vec<Vec<f64>>>,
    marginal: Vec<f64>,
    smoothing: f64,
    key_fn: fn(&[f64]) -> String,
    action_count: usize,
    reward_bound: f64,
}

/// `Ḡ(t; x, a) = (#{r <= t in cell} + smoothing·t/D) / (#cell + smoothing)`,
/// with unseen cells falling back to the marginal empirical CDF of the whole
/// dataset.
pub fn fit_tabular(
    data: &LoggedDataset,
    key_fn: fn(&[f64]) -> String,
    smoothing: f64,
) -> Result<TabularCdfModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let k = data.action_count();
    let mut cells: alloc::collections::BTreeMap<String, Vec<Vec<f64>>> =
        alloc::collections::BTreeMap::new();
    let mut marginal: Vec<f64> = Vec::with_capacity(data.len());
    for r in data.rows() {
        let cell = cells.entry(key_fn(&r.context)).or_insert_with(|| vec![Vec::new(); k]);
        cell[r.action].push(r.reward);
        marginal.push(r.reward);
    }
    for cell in cells.values_mut() {
        for rewards in cell.iter_mut() {
            rewards.sort_unstable_by(f64::total_cmp);
        }
    }
    marginal.sort_unstable_by(f64::total_cmp);
    Ok(TabularCdfModel {
        cells,
        marginal,
        smoothing: smoothing.max(0.0),
        key_fn,
        action_count: k,
        reward_bound: data.reward_bound(),
    })
}

fn count_leq(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|r| *r <= t)
}

impl ConditionalCdf for TabularCdfModel {
    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn action_count(&self) -> usize {
        self.action_count
    }

    fn evaluate(&self, t: f64, context: &[f64], action: usize) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= self.reward_bound {
            return 1.0;
        }
        let rewards = self
            .cells
            .get(&(self.key_fn)(context))
            .map(|cell| &cell[action])
            .filter(|rewards| !rewards.is_empty());
        match rewards {
            Some(rewards) => {
                let n = rewards.len() as f64;
                (count_leq(rewards, t) as f64 + self.smoothing * t / self.reward_bound)
                    / (n + self.smoothing)
            }
            None => count_leq(&self.marginal, t) as f64 / self.marginal.len() as f64,
        }
    }
}

/// Hyperparameters for the per-threshold logistic fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFitConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticFitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 500,
            l2: 1.0,
        }
    }
}

/// `(weights, bias)` per grid threshold for one action.
type ThresholdFits = Vec<(Vec<f64>, f64)>;

/// One logistic model per (action, threshold); see [`fit_per_threshold_logistic`].
#[derive(Debug, Clone)]
pub struct LogisticCdfModel {
    grid: ThresholdGrid,
    // params[action]: None when the action had no training rows (the
    // marginal fallback applies).
    params: Vec<Option<ThresholdFits>>,
    marginal: Vec<f64>,
    reward_bound: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Fit a binary logistic model of `1{r <= t_j}` for every action and grid
/// threshold via full-batch gradient descent with L2 penalty (bias excluded
/// from the penalty). Actions with no rows fall back to the marginal
/// empirical CDF.
pub fn fit_per_threshold_logistic(
    data: &LoggedDataset,
    grid: ThresholdGrid,
    config: LogisticFitConfig,
) -> Result<LogisticCdfModel, ModelError> {
    if data.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    if !(config.learning_rate > 0.0) || config.l2 < 0.0 {
        return Err(ModelError::BadFitConfig);
    }
    let dim = data.context_dim();
    let k = data.action_count();
    let mut params: Vec<Option<ThresholdFits>> = vec![None; k];
    for (action, slot) in params.iter_mut().enumerate() {
        let rows: Vec<&crate::data::Interaction> =
            data.rows().iter().filter(|r| r.action == action).collect();
        if rows.is_empty() {
            continue;
        }
        let m = rows.len() as f64;
        let mut per_threshold = Vec::with_capacity(grid.thresholds().len());
        for &t in grid.thresholds() {
            let labels: Vec<f64> = rows.iter().map(|r| f64::from(r.reward <= t)).collect();
            let mut weights = vec![0.0; dim];
            let mut bias = 0.0;
            for _ in 0..config.epochs {
                let mut grad_w = vec![0.0; dim];
                let mut grad_b = 0.0;
                for (row, &y) in rows.iter().zip(labels.iter()) {
                    let z = bias
                        + weights
                            .iter()
                            .zip(row.context.iter())
                            .map(|(w, x)| w * x)
                            .sum::<f64>();
                    let err = sigmoid(z) - y;
                    for (g, &x) in grad_w.iter_mut().zip(row.context.iter()) {
                        *g += err * x;
                    }
                    grad_b += err;
                }
                for (w, g) in weights.iter_mut().zip(grad_w.iter()) {
                    *w -= config.learning_rate * (g / m + config.l2 * *w / m);
                }
                bias -= config.learning_rate * grad_b / m;
            }
            per_threshold.push((weights, bias));
        }
        *slot = Some(per_threshold);
    }
    let mut marginal: Vec<f64> = data.rows().iter().map(|r| r.reward).collect();
    marginal.sort_unstable_by(f64::total_cmp);
    Ok(LogisticCdfModel {
        grid,
        params,
        marginal,
        reward_bound: data.reward_bound(),
    })
}

impl LogisticCdfModel {
    /// Running maximum of the raw per-threshold predictions up to grid index
    /// `upto`, clamped into [0, 1]. Independent classifiers need not be
    /// monotone across thresholds; the running maximum is the repair.
    fn repaired_prediction(&self, fits: &ThresholdFits, context: &[f64], upto: usize) -> f64 {
        let mut best = 0.0f64;
        for (weights, bias) in fits.iter().take(upto + 1) {
            let z = bias
                + weights
                    .iter()
                    .zip(context.iter())
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            best = best.max(sigmoid(z));
        }
        best.clamp(0.0, 1.0)
    }
}

impl ConditionalCdf for LogisticCdfModel {
    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    fn action_count(&self) -> usize {
        self.params.len()
    }

    fn evaluate(&self, t: f64, context: &[f64], action: usize) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= self.reward_bound {
            return 1.0;
        }
        match (&self.params[action], self.grid.floor_index(t)) {
            (Some(fits), Some(j)) => self.repaired_prediction(fits, context, j),
            (Some(_), None) => 0.0,
            (None, _) => count_leq(&self.marginal, t) as f64 / self.marginal.len() as f64,
        }
    }

    fn evaluate_many(&self, ts: &[f64], context: &[f64], action: usize) -> Vec<f64> {
        let fits = match &self.params[action] {
            Some(fits) => fits,
            None => return ts.iter().map(|&t| self.evaluate(t, context, action)).collect(),
        };
        // Precompute the running maximum along the grid once, then read it
        // off per threshold.
        let mut running = Vec::with_capacity(fits.len());
        let mut best = 0.0f64;
        for (weights, bias) in fits {
            let z = bias
                + weights
                    .iter()
                    .zip(context.iter())
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
            best = best.max(sigmoid(z));
            running.push(best.clamp(0.0, 1.0));
        }
        ts.iter()
            .map(|&t| {
                if t < 0.0 {
                    0.0
                } else if t >= self.reward_bound {
                    1.0
                } else {
                    match self.grid.floor_index(t) {
                        Some(j) => running[j],
                        None => 0.0,
                    }
                }
            })
            .collect()
    }
}

/// The exact conditional CDF of a finite environment.
#[derive(Debug, Clone)]
pub struct OracleCdf {
    env: FiniteEnv,
}

impl OracleCdf {
    pub fn new(env: FiniteEnv) -> Self {
        Self { env }
    }
}

impl ConditionalCdf for OracleCdf {
    fn reward_bound(&self) -> f64 {
        self.env.reward_bound()
    }

    fn action_count(&self) -> usize {
        self.env.action_count()
    }

    fn evaluate(&self, t: f64, context: &[f64], action: usize) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        if t >= self.env.reward_bound() {
            return 1.0;
        }
        let ci = self
            .env
            .context_index(context)
            .expect("oracle model evaluated at a context outside its environment");
        self.env.conditional_cdf(t, ci, action)
    }
}
