//! Logged contextual-bandit datasets.

use alloc::vec::Vec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("row {row}: context has {got} features, dataset declares {expected}")]
    ContextDim { row: usize, got: usize, expected: usize },
    #[error("row {row}: action {action} out of range (action count {count})")]
    ActionRange { row: usize, action: usize, count: usize },
    #[error("row {row}: reward {reward} outside [0, {bound}]")]
    RewardRange { row: usize, reward: f64, bound: f64 },
    #[error("row {row}: logged propensity {propensity} outside (0, 1]")]
    PropensityRange { row: usize, propensity: f64 },
    #[error("action count must be positive")]
    NoActions,
    #[error("reward bound must be positive and finite")]
    BadRewardBound,
    #[error("dataset is empty")]
    EmptyDataset,
}

/// One logged round: the observed context, the action the behavior policy
/// took, the reward revealed for that action, and (optionally) the
/// probability the behavior policy assigned to the action.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub context: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    pub logged_propensity: Option<f64>,
}

/// An immutable table of logged interactions.
///
/// `reward_bound` is a declared attribute of the dataset, not inferred from
/// the rows: Lipschitz constants and confidence bands depend on the support
/// bound, which must be stable across sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedDataset {
    rows: Vec<Interaction>,
    context_dim: usize,
    action_count: usize,
    reward_bound: f64,
}

impl LoggedDataset {
    pub fn new(
        rows: Vec<Interaction>,
        context_dim: usize,
        action_count: usize,
        reward_bound: f64,
    ) -> Result<Self, DataError> {
        if action_count == 0 {
            return Err(DataError::NoActions);
        }
        if !(reward_bound.is_finite() && reward_bound > 0.0) {
            return Err(DataError::BadRewardBound);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.context.len() != context_dim {
                return Err(DataError::ContextDim {
                    row,
                    got: r.context.len(),
                    expected: context_dim,
                });
            }
            if r.action >= action_count {
                return Err(DataError::ActionRange {
                    row,
                    action: r.action,
                    count: action_count,
                });
            }
            if !(r.reward.is_finite() && (0.0..=reward_bound).contains(&r.reward)) {
                return Err(DataError::RewardRange {
                    row,
                    reward: r.reward,
                    bound: reward_bound,
                });
            }
            if let Some(p) = r.logged_propensity {
                if !(p.is_finite() && p > 0.0 && p <= 1.0) {
                    return Err(DataError::PropensityRange { row, propensity: p });
                }
            }
        }
        Ok(Self {
            rows,
            context_dim,
            action_count,
            reward_bound,
        })
    }

    pub fn rows(&self) -> &[Interaction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn context_dim(&self) -> usize {
        self.context_dim
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    /// Sub-dataset with the rows at `indices` (cloned, original order kept).
    pub fn subset(&self, indices: &[usize]) -> Result<Self, DataError> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        Self::new(rows, self.context_dim, self.action_count, self.reward_bound)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn row(context: Vec<f64>, action: usize, reward: f64) -> Interaction {
        Interaction {
            context,
            action,
            reward,
            logged_propensity: None,
        }
    }

    #[test]
    fn accepts_valid_rows() {
        let d = LoggedDataset::new(vec![row(vec![0.0], 1, 0.5)], 1, 2, 1.0).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn rejects_reward_above_bound() {
        let err = LoggedDataset::new(vec![row(vec![0.0], 0, 1.5)], 1, 2, 1.0).unwrap_err();
        assert!(matches!(err, DataError::RewardRange { row: 0, .. }));
    }

    #[test]
    fn rejects_action_out_of_range() {
        let err = LoggedDataset::new(vec![row(vec![0.0], 2, 0.5)], 1, 2, 1.0).unwrap_err();
        assert!(matches!(err, DataError::ActionRange { row: 0, action: 2, .. }));
    }

    #[test]
    fn rejects_zero_propensity() {
        let mut r = row(vec![0.0], 0, 0.5);
        r.logged_propensity = Some(0.0);
        let err = LoggedDataset::new(vec![r], 1, 2, 1.0).unwrap_err();
        assert!(matches!(err, DataError::PropensityRange { row: 0, .. }));
    }

    #[test]
    fn rejects_context_dim_mismatch() {
        let err = LoggedDataset::new(vec![row(vec![0.0, 1.0], 0, 0.5)], 1, 2, 1.0).unwrap_err();
        assert!(matches!(err, DataError::ContextDim { row: 0, got: 2, expected: 1 }));
    }
}
