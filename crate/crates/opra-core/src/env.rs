//! Finite synthetic environments with exact ground truth.
//!
//! A [`FiniteEnv`] is a contextual bandit with finitely many contexts and a
//! discrete reward distribution per (context, action) cell. Everything of
//! interest is computable in closed form by enumeration: the target policy's
//! reward CDF `F(t) = Σ_x p(x) Σ_a π(a|x) G(t; x, a)`, exact weight
//! statistics, and the three-term variance decompositions of the importance
//! sampling and doubly robust estimators. That makes these environments the
//! reference against which the estimators are validated.

use alloc::vec;
use alloc::vec::Vec;
use thiserror::Error;

use crate::data::{DataError, Interaction, LoggedDataset};
use crate::model::ConditionalCdf;
use crate::policy::{PolicyError, PolicySpec, WeightStats, PROPENSITY_FLOOR};
use crate::rng::CounterRng;
use crate::step::{StepCdf, StepError};

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("context probabilities must be nonnegative and sum to 1 (sum {0})")]
    BadContextProbabilities(f64),
    #[error("context {context}: expected one reward distribution per action ({expected}), got {got}")]
    ActionMismatch { context: usize, expected: usize, got: usize },
    #[error("context {context}, action {action}: masses must be nonnegative and sum to 1 (sum {sum})")]
    BadMasses { context: usize, action: usize, sum: f64 },
    #[error("context {context}, action {action}: atom {atom} outside [0, {bound}]")]
    AtomOutOfRange { context: usize, action: usize, atom: f64, bound: f64 },
    #[error("environment has no contexts")]
    NoContexts,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Step(#[from] StepError),
}

/// A discrete distribution on `[0, D]` given by atoms and masses.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    pub atoms: Vec<f64>,
    pub masses: Vec<f64>,
}

impl DiscreteDist {
    pub fn new(atoms: Vec<f64>, masses: Vec<f64>) -> Self {
        Self { atoms, masses }
    }

    /// Point mass at `value`.
    pub fn point(value: f64) -> Self {
        Self {
            atoms: vec![value],
            masses: vec![1.0],
        }
    }

    /// `P(R <= t)`.
    pub fn cdf_at(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .zip(self.masses.iter())
            .filter(|(a, _)| **a <= t)
            .map(|(_, m)| m)
            .sum()
    }
}

/// One context: its marginal probability, feature vector, and the reward
/// distribution of each action.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvContext {
    pub probability: f64,
    pub features: Vec<f64>,
    pub rewards: Vec<DiscreteDist>,
}

/// A finite contextual-bandit environment.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteEnv {
    contexts: Vec<EnvContext>,
    action_count: usize,
    reward_bound: f64,
}

/// One point of the enumerable outcome space under a policy, with its
/// probability `p(x) * policy(a|x) * mass(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub probability: f64,
    pub context: usize,
    pub action: usize,
    pub reward: f64,
}

impl FiniteEnv {
    pub fn new(contexts: Vec<EnvContext>, action_count: usize, reward_bound: f64) -> Result<Self, EnvError> {
        if contexts.is_empty() {
            return Err(EnvError::NoContexts);
        }
        let p_sum: f64 = contexts.iter().map(|c| c.probability).sum();
        if contexts.iter().any(|c| c.probability < 0.0) || (p_sum - 1.0).abs() > 1e-9 {
            return Err(EnvError::BadContextProbabilities(p_sum));
        }
        for (ci, c) in contexts.iter().enumerate() {
            if c.rewards.len() != action_count {
                return Err(EnvError::ActionMismatch {
                    context: ci,
                    expected: action_count,
                    got: c.rewards.len(),
                });
            }
            for (ai, dist) in c.rewards.iter().enumerate() {
                let sum: f64 = dist.masses.iter().sum();
                if dist.masses.iter().any(|m| *m < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(EnvError::BadMasses {
                        context: ci,
                        action: ai,
                        sum,
                    });
                }
                for &a in &dist.atoms {
                    if !(a.is_finite() && (0.0..=reward_bound).contains(&a)) {
                        return Err(EnvError::AtomOutOfRange {
                            context: ci,
                            action: ai,
                            atom: a,
                            bound: reward_bound,
                        });
                    }
                }
            }
        }
        Ok(Self {
            contexts,
            action_count,
            reward_bound,
        })
    }

    pub fn contexts(&self) -> &[EnvContext] {
        &self.contexts
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn context_dim(&self) -> usize {
        self.contexts[0].features.len()
    }

    /// Index of the context whose features equal `features` exactly.
    pub fn context_index(&self, features: &[f64]) -> Option<usize> {
        self.contexts.iter().position(|c| c.features == features)
    }

    /// The conditional reward CDF `G(t; x, a)`, independent of any policy.
    pub fn conditional_cdf(&self, t: f64, context: usize, action: usize) -> f64 {
        self.contexts[context].rewards[action].cdf_at(t)
    }

    /// The conditional indicator variance `σ²(t; x, a) = G(1 - G)`.
    pub fn conditional_variance(&self, t: f64, context: usize, action: usize) -> f64 {
        let g = self.conditional_cdf(t, context, action);
        g * (1.0 - g)
    }

    /// Sorted distinct reward atoms across all cells.
    pub fn all_atoms(&self) -> Vec<f64> {
        let mut atoms: Vec<f64> = self
            .contexts
            .iter()
            .flat_map(|c| c.rewards.iter())
            .flat_map(|d| d.atoms.iter().copied())
            .collect();
        atoms.sort_unstable_by(f64::total_cmp);
        atoms.dedup();
        atoms
    }

    /// Enumerate the outcome space `(x, a, r)` under `policy`, dropping
    /// zero-probability points.
    pub fn outcomes(&self, policy: &PolicySpec) -> Result<Vec<Outcome>, PolicyError> {
        let mut out = Vec::new();
        for (ci, c) in self.contexts.iter().enumerate() {
            let probs = policy.action_probabilities(&c.features)?;
            for (ai, dist) in c.rewards.iter().enumerate() {
                for (&atom, &mass) in dist.atoms.iter().zip(dist.masses.iter()) {
                    let p = c.probability * probs[ai] * mass;
                    if p > 0.0 {
                        out.push(Outcome {
                            probability: p,
                            context: ci,
                            action: ai,
                            reward: atom,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// The exact reward CDF under `target`.
    pub fn true_cdf(&self, target: &PolicySpec) -> Result<StepCdf, EnvError> {
        let mut atom_masses: Vec<(f64, f64)> = Vec::new();
        for outcome in self.outcomes(target)? {
            atom_masses.push((outcome.reward, outcome.probability));
        }
        Ok(StepCdf::from_atoms(&atom_masses, self.reward_bound)?)
    }

    /// Exact `w_max = sup_(a,x) π(a|x)/β(a|x)` and `w₂ = E_β[w²]` over the
    /// environment support. Cells where β vanishes while π does not violate
    /// absolute continuity.
    pub fn weight_stats_exact(
        &self,
        target: &PolicySpec,
        behavior: &PolicySpec,
    ) -> Result<WeightStats, PolicyError> {
        let mut w_max = 0.0f64;
        let mut w_2 = 0.0f64;
        for c in &self.contexts {
            let pi = target.action_probabilities(&c.features)?;
            let beta = behavior.action_probabilities(&c.features)?;
            for a in 0..self.action_count {
                if beta[a] <= PROPENSITY_FLOOR {
                    if pi[a] > PROPENSITY_FLOOR {
                        return Err(PolicyError::AbsoluteContinuity {
                            propensity: beta[a],
                            floor: PROPENSITY_FLOOR,
                        });
                    }
                    continue;
                }
                let w = pi[a] / beta[a];
                w_max = w_max.max(w);
                w_2 += c.probability * beta[a] * w * w;
            }
        }
        WeightStats::exact(w_max, w_2)
    }

    /// Exact single-sample variance decomposition of the IS estimator (no
    /// model) or the DR estimator (with a model) at threshold `t`:
    ///
    /// - term1 = `E_β[w² σ²(t; X, A)]` — randomness in the rewards,
    /// - term2 = `V_β[E_β[w G | X]]` — randomness over contexts,
    /// - term3 = `E_β[V_β[w H | X]]` with `H = G` for IS and `H = G - Ḡ`
    ///   for DR — the importance sampling penalty.
    ///
    /// The estimator's variance at sample size `n` is `(term1 + term2 +
    /// term3) / n`.
    pub fn variance_decomposition(
        &self,
        target: &PolicySpec,
        behavior: &PolicySpec,
        t: f64,
        model: Option<&dyn ConditionalCdf>,
    ) -> Result<(f64, f64, f64), PolicyError> {
        let mut term1 = 0.0;
        let mut mean_m = 0.0;
        let mut m_sq = 0.0;
        let mut term3 = 0.0;
        for (ci, c) in self.contexts.iter().enumerate() {
            let pi = target.action_probabilities(&c.features)?;
            let beta = behavior.action_probabilities(&c.features)?;
            let mut m_x = 0.0; // E_β[w G | x]
            let mut h_mean = 0.0; // E_β[w H | x]
            let mut h_sq = 0.0; // E_β[(w H)² | x]
            for a in 0..self.action_count {
                if beta[a] <= PROPENSITY_FLOOR {
                    if pi[a] > PROPENSITY_FLOOR {
                        return Err(PolicyError::AbsoluteContinuity {
                            propensity: beta[a],
                            floor: PROPENSITY_FLOOR,
                        });
                    }
                    continue;
                }
                let w = pi[a] / beta[a];
                let g = self.conditional_cdf(t, ci, a);
                let h = match model {
                    None => g,
                    Some(m) => g - m.evaluate(t, &c.features, a),
                };
                term1 += c.probability * beta[a] * w * w * self.conditional_variance(t, ci, a);
                m_x += beta[a] * w * g;
                h_mean += beta[a] * w * h;
                h_sq += beta[a] * (w * h) * (w * h);
            }
            mean_m += c.probability * m_x;
            m_sq += c.probability * m_x * m_x;
            term3 += c.probability * (h_sq - h_mean * h_mean);
        }
        let term2 = m_sq - mean_m * mean_m;
        Ok((term1, term2, term3))
    }

    /// Draw `n` i.i.d. rounds under `behavior`, filling in logged
    /// propensities.
    pub fn sample_dataset(
        &self,
        behavior: &PolicySpec,
        n: usize,
        rng: &mut CounterRng,
    ) -> Result<LoggedDataset, EnvError> {
        let context_probs: Vec<f64> = self.contexts.iter().map(|c| c.probability).collect();
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let ci = rng.sample_categorical(&context_probs);
            let c = &self.contexts[ci];
            let action_probs = behavior.action_probabilities(&c.features)?;
            let a = rng.sample_categorical(&action_probs);
            let dist = &c.rewards[a];
            let r = dist.atoms[rng.sample_categorical(&dist.masses)];
            rows.push(Interaction {
                context: c.features.clone(),
                action: a,
                reward: r,
                logged_propensity: Some(action_probs[a]),
            });
        }
        Ok(LoggedDataset::new(rows, self.context_dim(), self.action_count, self.reward_bound)?)
    }
}

/// Canonical test environments.
pub mod fixtures {
    use super::*;
    use crate::policy::context_key;
    use alloc::collections::BTreeMap;
    use alloc::string::String;

    fn tabular(entries: &[(&[f64], &[f64])], k: usize) -> PolicySpec {
        let mut table: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (features, probs) in entries {
            table.insert(context_key(features), probs.to_vec());
        }
        PolicySpec::tabular(table, k).expect("fixture policies are valid")
    }

    /// E1: one context, two actions with deterministic rewards 0 and 1,
    /// uniform behavior, target π = (0.2, 0.8). Every derived quantity is
    /// hand-checkable: F = 0.2 on [0, 1), mean 0.8, CVaR_0.5 = 0.6,
    /// variance 0.16, w_max = 1.6, w₂ = 1.36.
    pub fn e1() -> (FiniteEnv, PolicySpec, PolicySpec) {
        let env = FiniteEnv::new(
            vec![EnvContext {
                probability: 1.0,
                features: vec![0.0],
                rewards: vec![DiscreteDist::point(0.0), DiscreteDist::point(1.0)],
            }],
            2,
            1.0,
        )
        .expect("E1 is valid");
        let target = tabular(&[(&[0.0], &[0.2, 0.8])], 2);
        let behavior = tabular(&[(&[0.0], &[0.5, 0.5])], 2);
        (env, target, behavior)
    }

    /// E2: four contexts, three actions, three-atom reward distributions.
    /// The policy pair has w_max = 6 (cell x0/a0: π 0.6 vs β 0.1) and
    /// w₂ ≈ 2.93 ≪ w_max, so Bernstein-style bands beat Hoeffding ones, and
    /// every cell has nondegenerate reward variance.
    pub fn e2() -> (FiniteEnv, PolicySpec, PolicySpec) {
        let third = 1.0 / 3.0;
        let dist = |atoms: [f64; 3], masses: [f64; 3]| DiscreteDist::new(atoms.to_vec(), masses.to_vec());
        let contexts = vec![
            EnvContext {
                probability: 0.4,
                features: vec![0.0],
                rewards: vec![
                    dist([0.0, 0.5, 1.0], [0.2, 0.3, 0.5]),
                    dist([0.1, 0.4, 0.9], [0.5, 0.3, 0.2]),
                    dist([0.2, 0.5, 0.8], [0.25, 0.5, 0.25]),
                ],
            },
            EnvContext {
                probability: 0.3,
                features: vec![1.0],
                rewards: vec![
                    dist([0.0, 0.3, 0.6], [0.4, 0.4, 0.2]),
                    dist([0.3, 0.7, 1.0], [0.2, 0.5, 0.3]),
                    dist([0.1, 0.5, 0.9], [third, third, third]),
                ],
            },
            EnvContext {
                probability: 0.2,
                features: vec![2.0],
                rewards: vec![
                    dist([0.2, 0.6, 1.0], [0.3, 0.4, 0.3]),
                    dist([0.0, 0.4, 0.8], [0.5, 0.25, 0.25]),
                    dist([0.3, 0.5, 0.7], [0.2, 0.6, 0.2]),
                ],
            },
            EnvContext {
                probability: 0.1,
                features: vec![3.0],
                rewards: vec![
                    dist([0.1, 0.6, 0.9], [0.45, 0.35, 0.2]),
                    dist([0.0, 0.5, 1.0], [0.3, 0.4, 0.3]),
                    dist([0.2, 0.4, 0.6], [0.25, 0.5, 0.25]),
                ],
            },
        ];
        let env = FiniteEnv::new(contexts, 3, 1.0).expect("E2 is valid");
        let target = tabular(
            &[
                (&[0.0], &[0.6, 0.3, 0.1]),
                (&[1.0], &[0.1, 0.8, 0.1]),
                (&[2.0], &[0.2, 0.2, 0.6]),
                (&[3.0], &[0.3, 0.4, 0.3]),
            ],
            3,
        );
        let behavior = tabular(
            &[
                (&[0.0], &[0.1, 0.6, 0.3]),
                (&[1.0], &[0.4, 0.2, 0.4]),
                (&[2.0], &[0.5, 0.25, 0.25]),
                (&[3.0], &[third, third, third]),
            ],
            3,
        );
        (env, target, behavior)
    }
}
