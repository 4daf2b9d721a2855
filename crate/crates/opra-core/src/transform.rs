//! Turning classification data into logged-bandit data.
//!
//! Features become contexts, class labels become actions, and the reward is
//! 1 when the chosen action matches the ground-truth label, else 0. The
//! target policy π is a multinomial softmax-linear classifier trained on
//! the labels; the behavior policy mixes it with the uniform policy,
//! `β = α π + (1 - α) π_unif`, so α controls the policy mismatch and hence
//! `w_max`. Actions are sampled once per row from β with logged
//! propensities filled in.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::data::{DataError, Interaction, LoggedDataset};
use crate::env::{DiscreteDist, EnvContext, EnvError, FiniteEnv};
use crate::model::LogisticFitConfig;
use crate::policy::{PolicyError, PolicySpec};
use crate::rng::CounterRng;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("need at least one row")]
    Empty,
    #[error("features and labels must have equal length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("labels must contain at least two distinct classes")]
    SingleClass,
    #[error("mixing alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Train a multinomial softmax-linear classifier by full-batch gradient
/// descent with L2 penalty (bias unpenalized). Deterministic: zero
/// initialization, fixed epoch count.
pub fn train_softmax_classifier(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    config: LogisticFitConfig,
) -> Result<PolicySpec, TransformError> {
    if features.is_empty() {
        return Err(TransformError::Empty);
    }
    if features.len() != labels.len() {
        return Err(TransformError::LengthMismatch(features.len(), labels.len()));
    }
    let dim = features[0].len();
    let m = features.len() as f64;
    let mut weights = vec![vec![0.0; dim]; classes];
    let mut bias = vec![0.0; classes];
    let mut probs = vec![0.0; classes];
    for _ in 0..config.epochs {
        let mut grad_w = vec![vec![0.0; dim]; classes];
        let mut grad_b = vec![0.0; classes];
        for (x, &y) in features.iter().zip(labels.iter()) {
            let mut max_logit = f64::NEG_INFINITY;
            for k in 0..classes {
                probs[k] = bias[k]
                    + weights[k].iter().zip(x.iter()).map(|(w, v)| w * v).sum::<f64>();
                max_logit = max_logit.max(probs[k]);
            }
            let mut sum = 0.0;
            for p in probs.iter_mut() {
                *p = libm::exp(*p - max_logit);
                sum += *p;
            }
            for (k, p) in probs.iter().enumerate() {
                let err = p / sum - f64::from(u8::from(k == y));
                for (g, &v) in grad_w[k].iter_mut().zip(x.iter()) {
                    *g += err * v;
                }
                grad_b[k] += err;
            }
        }
        for k in 0..classes {
            for (w, g) in weights[k].iter_mut().zip(grad_w[k].iter()) {
                *w -= config.learning_rate * (g / m + config.l2 * *w / m);
            }
            bias[k] -= config.learning_rate * grad_b[k] / m;
        }
    }
    Ok(PolicySpec::softmax_linear(weights, bias)?)
}

/// The exact environment induced by a labeled dataset: each row is a
/// context with probability 1/n, and action `a` deterministically rewards
/// `1{a == label}`. Ground truth for the transform.
pub fn classification_env(features: &[Vec<f64>], labels: &[usize]) -> Result<FiniteEnv, TransformError> {
    if features.is_empty() {
        return Err(TransformError::Empty);
    }
    if features.len() != labels.len() {
        return Err(TransformError::LengthMismatch(features.len(), labels.len()));
    }
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;
    let n = features.len();
    let contexts: Vec<EnvContext> = features
        .iter()
        .zip(labels.iter())
        .map(|(x, &y)| EnvContext {
            probability: 1.0 / n as f64,
            features: x.clone(),
            rewards: (0..classes)
                .map(|a| DiscreteDist::point(f64::from(u8::from(a == y))))
                .collect(),
        })
        .collect();
    Ok(FiniteEnv::new(contexts, classes, 1.0)?)
}

/// The classification-to-bandit transform. Returns the logged dataset (one
/// sampled action per row, with propensities), the trained target policy,
/// and the mixture behavior policy.
pub fn classification_to_bandit(
    features: &[Vec<f64>],
    labels: &[usize],
    alpha: f64,
    seed: u64,
    classifier: LogisticFitConfig,
) -> Result<(LoggedDataset, PolicySpec, PolicySpec), TransformError> {
    if features.is_empty() {
        return Err(TransformError::Empty);
    }
    if features.len() != labels.len() {
        return Err(TransformError::LengthMismatch(features.len(), labels.len()));
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(TransformError::BadAlpha(alpha));
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(TransformError::SingleClass);
    }
    let classes = *distinct.last().unwrap() + 1;

    let target = train_softmax_classifier(features, labels, classes, classifier)?;
    let behavior = if alpha == 1.0 {
        target.clone()
    } else {
        PolicySpec::mixture(target.clone(), alpha)?
    };

    let mut rng = CounterRng::stream(seed, &[stream_tags::ACTIONS]);
    let mut rows = Vec::with_capacity(features.len());
    for (x, &y) in features.iter().zip(labels.iter()) {
        let probs = behavior.action_probabilities(x)?;
        let action = rng.sample_categorical(&probs);
        rows.push(Interaction {
            context: x.clone(),
            action,
            reward: f64::from(u8::from(action == y)),
            logged_propensity: Some(probs[action]),
        });
    }
    let dim = features[0].len();
    let data = LoggedDataset::new(rows, dim, classes, 1.0)?;
    Ok((data, target, behavior))
}

/// Gaussian-blob classification data: class `k` is an isotropic normal
/// around `separation · e_{k mod dim}`. Deterministic given the seed.
pub fn synthetic_classification(
    rows: usize,
    classes: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = CounterRng::stream(seed, &[stream_tags::FEATURES]);
    let mut features = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for i in 0..rows {
        let class = i % classes;
        let mut x = vec![0.0; dim];
        x[class % dim] += separation;
        for v in x.iter_mut() {
            *v += gaussian(&mut rng);
        }
        features.push(x);
        labels.push(class);
    }
    (features, labels)
}

/// Named substreams so parallel callers stay reproducible.
pub mod stream_tags {
    pub const ACTIONS: u64 = 0xAC;
    pub const FEATURES: u64 = 0xFE;
}

fn gaussian(rng: &mut CounterRng) -> f64 {
    // Box-Muller; u is kept away from 0 so the log is finite.
    let u = rng.next_f64().max(1e-300);
    let v = rng.next_f64();
    libm::sqrt(-2.0 * libm::log(u)) * libm::cos(2.0 * core::f64::consts::PI * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> (Vec<Vec<f64>>, Vec<usize>) {
        synthetic_classification(400, 2, 2, 4.0, 11)
    }

    #[test]
    fn alpha_one_is_on_policy() {
        let (features, labels) = toy_data();
        let (data, target, behavior) =
            classification_to_bandit(&features, &labels, 1.0, 5, LogisticFitConfig::default())
                .unwrap();
        assert_eq!(target, behavior);
        // Logged propensities equal the target's probabilities.
        let r = &data.rows()[0];
        let p = target.action_probability(&r.context, r.action).unwrap();
        assert_eq!(r.logged_propensity, Some(p));
    }

    #[test]
    fn small_alpha_approaches_uniform() {
        let (features, labels) = toy_data();
        let (data, _, behavior) =
            classification_to_bandit(&features, &labels, 0.01, 5, LogisticFitConfig::default())
                .unwrap();
        // β = 0.01 π + 0.99/2: propensities within [0.495, 0.505] + 0.01.
        for r in data.rows() {
            let p = r.logged_propensity.unwrap();
            assert!((0.49..=0.51).contains(&p), "propensity {p}");
        }
        let probs = behavior.action_probabilities(&features[0]).unwrap();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trained_policy_beats_uniform_on_separable_data() {
        let (features, labels) = toy_data();
        let (_, target, _) =
            classification_to_bandit(&features, &labels, 0.5, 5, LogisticFitConfig::default())
                .unwrap();
        // Mean reward under π is the average probability assigned to the
        // true label; uniform gets exactly 0.5 on two classes.
        let mut mean_reward = 0.0;
        for (x, &y) in features.iter().zip(labels.iter()) {
            mean_reward += target.action_probability(x, y).unwrap();
        }
        mean_reward /= features.len() as f64;
        assert!(mean_reward > 0.75, "mean reward {mean_reward}");
    }

    #[test]
    fn single_class_rejected() {
        let features = vec![vec![0.0], vec![1.0]];
        let labels = vec![1, 1];
        assert_eq!(
            classification_to_bandit(&features, &labels, 0.5, 5, LogisticFitConfig::default())
                .unwrap_err(),
            TransformError::SingleClass
        );
    }

    #[test]
    fn env_rewards_match_labels() {
        let features = vec![vec![0.0], vec![1.0]];
        let labels = vec![0, 1];
        let env = classification_env(&features, &labels).unwrap();
        assert_eq!(env.conditional_cdf(0.0, 0, 0), 0.0); // reward 1: P(R <= 0) = 0
        assert_eq!(env.conditional_cdf(0.0, 0, 1), 1.0); // reward 0
        assert_eq!(env.conditional_cdf(0.5, 1, 1), 0.0);
    }

    #[test]
    fn transform_is_deterministic() {
        let (features, labels) = toy_data();
        let a = classification_to_bandit(&features, &labels, 0.3, 9, LogisticFitConfig::default())
            .unwrap();
        let b = classification_to_bandit(&features, &labels, 0.3, 9, LogisticFitConfig::default())
            .unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn gaussian_moments_are_sane() {
        let mut rng = CounterRng::new(77);
        let n = 50_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z = gaussian(&mut rng);
            sum += z;
            sum_sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }
}
