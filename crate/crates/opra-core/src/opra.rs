//! Risk-assessment orchestration: one CDF estimate, one confidence band,
//! simultaneous risk estimates.
//!
//! [`run_opra`] builds a valid CDF estimate with the configured estimator,
//! attaches the matching finite-sample sup-norm band, and evaluates every
//! configured risk functional on that single shared estimate. Each
//! Lipschitz risk gets the half-width `L·ε`; because all of them share one
//! band, the error guarantees hold simultaneously regardless of how many
//! risks are requested.

use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::bound::{
    eps_dr, eps_estimated_policy, eps_is_bernstein, eps_is_hoeffding, BandMethod, BoundError,
    BoundInputs, ConfidenceBand,
};
use crate::data::{DataError, Interaction, LoggedDataset};
use crate::estimator::{
    estimate_dm, estimate_dm_crossfit, estimate_dr, estimate_dr_crossfit, estimate_is_clip,
    estimate_wis, monotone_clip, EstimatorError, EstimatorKind,
};
use crate::model::{
    fit_per_threshold_logistic, fit_tabular, LogisticFitConfig, ModelError, ThresholdGrid,
};
use crate::policy::{
    context_key, estimate_behavior_tabular, weight_stats_empirical, PolicyError, PolicySpec,
    WeightStats, WeightStatsSource,
};
use crate::risk::{RiskError, RiskSpec};
use crate::step::StepCdf;

#[derive(Debug, Error, PartialEq)]
pub enum OpraError {
    #[error("estimator {0} does not produce a valid CDF here; use is-clip, wis, dm, or m-dr")]
    InvalidEstimator(EstimatorKind),
    #[error("estimator {estimator} is incompatible with band method {band}")]
    IncompatibleBand {
        estimator: EstimatorKind,
        band: BandMethod,
    },
    #[error("estimator {0} has no finite-sample band; configure it without one")]
    BandNotAvailable(EstimatorKind),
    #[error("estimator {0} needs a model configuration")]
    MissingModel(EstimatorKind),
    #[error("behavior source 'known-policy' needs a behavior policy")]
    MissingBehaviorPolicy,
    #[error("no risk functionals configured")]
    NoRisks,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Where the importance weights come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BehaviorSource {
    /// A known behavior policy; rows with logged propensities still use
    /// them, matching real logged-bandit pipelines.
    KnownPolicy,
    /// Logged propensities only; every row must carry one.
    LoggedPropensities,
    /// Fit a tabular behavior estimate from the dataset itself and widen
    /// the band by `w_max · eps_beta / inf β̂`. `eps_beta` is the caller's
    /// bound on `sup |β - β̂|` (e.g. from a concentration inequality on the
    /// empirical frequencies).
    EstimatedTabular { smoothing: f64, eps_beta: f64 },
}

/// Conditional reward-CDF model configuration for DM / M-DR.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Tabular { smoothing: f64 },
    Logistic { grid_points: Option<usize>, fit: LogisticFitConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpraConfig {
    pub estimator: EstimatorKind,
    /// Required for `is-clip` (Hoeffding or Bernstein) and `m-dr` (Dr);
    /// must be `None` for `wis` and `dm`, which carry no guarantee.
    pub band: Option<BandMethod>,
    pub delta: f64,
    pub risks: Vec<RiskSpec>,
    pub model: Option<ModelConfig>,
    pub crossfit: bool,
    pub behavior_source: BehaviorSource,
    /// Exact weight statistics when the environment is enumerable. Without
    /// them the band falls back to empirical plug-ins and is flagged
    /// heuristic.
    pub weight_stats: Option<WeightStats>,
}

/// One per-risk line of a report.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEntry {
    pub name: String,
    pub estimate: f64,
    pub lipschitz: Option<f64>,
    /// `lipschitz × band.epsilon`; absent for non-Lipschitz risks and for
    /// estimators without a band.
    pub half_width: Option<f64>,
}

/// The widening applied when the behavior policy was estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyCorrection {
    pub eps_beta: f64,
    pub inf_beta_hat: f64,
    /// `w_max · eps_beta / inf β̂`, already included in the band epsilon.
    pub correction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub band: ConfidenceBand,
    /// The concentration result behind the epsilon (differs from
    /// `band.method` only for the estimated-policy adjustment).
    pub base_method: BandMethod,
    pub weight_stats: WeightStats,
    pub policy_correction: Option<PolicyCorrection>,
}

impl BandReport {
    /// Bands built from empirical plug-in weight statistics are heuristics,
    /// not guarantees.
    pub fn is_heuristic(&self) -> bool {
        self.weight_stats.source == WeightStatsSource::Empirical
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub estimator: EstimatorKind,
    pub n: usize,
    pub delta: f64,
    pub reward_bound: f64,
    pub crossfit: bool,
    /// `None` for estimate-only modes (WIS, DM): no guarantee attaches.
    pub band: Option<BandReport>,
    pub entries: Vec<RiskEntry>,
    pub cdf: StepCdf,
}

fn validate_config(config: &OpraConfig) -> Result<(), OpraError> {
    if config.risks.is_empty() {
        return Err(OpraError::NoRisks);
    }
    for risk in &config.risks {
        risk.validate()?;
    }
    match (config.estimator, config.band) {
        (EstimatorKind::IsClip, Some(BandMethod::IsHoeffding | BandMethod::IsBernstein)) => Ok(()),
        (EstimatorKind::MDr, Some(BandMethod::Dr)) => Ok(()),
        (EstimatorKind::Wis | EstimatorKind::Dm, None) => Ok(()),
        (EstimatorKind::Wis | EstimatorKind::Dm, Some(band)) => Err(OpraError::IncompatibleBand {
            estimator: config.estimator,
            band,
        }),
        (EstimatorKind::IsClip | EstimatorKind::MDr, None) => {
            Err(OpraError::BandNotAvailable(config.estimator))
        }
        (EstimatorKind::IsClip | EstimatorKind::MDr, Some(band)) => Err(OpraError::IncompatibleBand {
            estimator: config.estimator,
            band,
        }),
        (EstimatorKind::Is | EstimatorKind::Dr, _) => {
            Err(OpraError::InvalidEstimator(config.estimator))
        }
    }
}

/// Strip logged propensities so estimators evaluate the given policy
/// instead; used by the estimated-behavior path.
fn without_propensities(data: &LoggedDataset) -> LoggedDataset {
    let rows: Vec<Interaction> = data
        .rows()
        .iter()
        .map(|r| Interaction {
            context: r.context.clone(),
            action: r.action,
            reward: r.reward,
            logged_propensity: None,
        })
        .collect();
    LoggedDataset::new(rows, data.context_dim(), data.action_count(), data.reward_bound())
        .expect("stripping propensities keeps the dataset valid")
}

struct ResolvedBehavior {
    /// Dataset the estimators should run on.
    data: LoggedDataset,
    /// Policy to hand the estimators (logged propensities take precedence
    /// where present).
    policy: Option<PolicySpec>,
    /// Set on the estimated-tabular path.
    estimated: Option<(f64, f64)>, // (eps_beta, inf_beta_hat)
}

fn resolve_behavior(
    data: &LoggedDataset,
    behavior: Option<&PolicySpec>,
    source: BehaviorSource,
) -> Result<ResolvedBehavior, OpraError> {
    match source {
        BehaviorSource::KnownPolicy => {
            let policy = behavior.ok_or(OpraError::MissingBehaviorPolicy)?;
            Ok(ResolvedBehavior {
                data: data.clone(),
                policy: Some(policy.clone()),
                estimated: None,
            })
        }
        BehaviorSource::LoggedPropensities => Ok(ResolvedBehavior {
            data: data.clone(),
            policy: None,
            estimated: None,
        }),
        BehaviorSource::EstimatedTabular { smoothing, eps_beta } => {
            let (beta_hat, inf_beta) = estimate_behavior_tabular(data, &context_key, smoothing)?;
            Ok(ResolvedBehavior {
                data: without_propensities(data),
                policy: Some(beta_hat),
                estimated: Some((eps_beta, inf_beta)),
            })
        }
    }
}

fn build_cdf(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
    config: &OpraConfig,
) -> Result<StepCdf, OpraError> {
    match config.estimator {
        EstimatorKind::IsClip => Ok(estimate_is_clip(data, target, behavior)?),
        EstimatorKind::Wis => Ok(estimate_wis(data, target, behavior)?),
        EstimatorKind::Dm | EstimatorKind::MDr => {
            let model_config = config
                .model
                .as_ref()
                .ok_or(OpraError::MissingModel(config.estimator))?;
            let grid = match model_config {
                ModelConfig::Tabular { .. } => ThresholdGrid::default_for(data)?,
                ModelConfig::Logistic { grid_points, .. } => match grid_points {
                    Some(points) => ThresholdGrid::even(*points, data.reward_bound())?,
                    None => ThresholdGrid::default_for(data)?,
                },
            };
            let dm = config.estimator == EstimatorKind::Dm;
            match model_config {
                ModelConfig::Tabular { smoothing } => {
                    let smoothing = *smoothing;
                    let fit = |d: &LoggedDataset| fit_tabular(d, context_key, smoothing);
                    estimate_validated(data, target, behavior, &grid, fit, dm, config.crossfit)
                }
                ModelConfig::Logistic { fit: fit_config, .. } => {
                    let fit_config = *fit_config;
                    let fit =
                        |d: &LoggedDataset| fit_per_threshold_logistic(d, grid.clone(), fit_config);
                    estimate_validated(data, target, behavior, &grid, fit, dm, config.crossfit)
                }
            }
        }
        EstimatorKind::Is | EstimatorKind::Dr => Err(OpraError::InvalidEstimator(config.estimator)),
    }
}

fn estimate_validated<M, F>(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
    grid: &ThresholdGrid,
    fit: F,
    dm: bool,
    crossfit: bool,
) -> Result<StepCdf, OpraError>
where
    M: crate::model::ConditionalCdf,
    F: Fn(&LoggedDataset) -> Result<M, ModelError>,
{
    if dm {
        if crossfit {
            Ok(estimate_dm_crossfit(data, target, grid, fit)?)
        } else {
            let model = fit(data)?;
            Ok(estimate_dm(data, target, &model, grid)?)
        }
    } else if crossfit {
        let raw = estimate_dr_crossfit(data, target, behavior, grid, fit)?;
        Ok(monotone_clip(&raw))
    } else {
        let model = fit(data)?;
        let raw = estimate_dr(data, target, behavior, &model, grid)?;
        Ok(monotone_clip(&raw))
    }
}

/// Run the full assessment: estimate the CDF, compute its band, evaluate
/// every risk on the shared estimate.
pub fn run_opra(
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: Option<&PolicySpec>,
    config: &OpraConfig,
) -> Result<RiskReport, OpraError> {
    validate_config(config)?;
    if data.is_empty() {
        return Err(OpraError::Estimator(EstimatorError::EmptyDataset));
    }
    let resolved = resolve_behavior(data, behavior, config.behavior_source)?;
    let cdf = build_cdf(&resolved.data, target, resolved.policy.as_ref(), config)?;

    let band = match config.band {
        None => None,
        Some(base_method) => {
            let stats = match config.weight_stats {
                Some(stats) => stats,
                None => weight_stats_empirical(&resolved.data, target, resolved.policy.as_ref())?,
            };
            let inputs = BoundInputs::new(data.len(), config.delta, stats)?;
            let base_eps = match base_method {
                BandMethod::IsHoeffding => eps_is_hoeffding(&inputs),
                BandMethod::IsBernstein => eps_is_bernstein(&inputs),
                BandMethod::Dr => eps_dr(&inputs),
                // Excluded by validate_config.
                BandMethod::EstimatedPolicyAdjusted | BandMethod::Dkw => {
                    return Err(OpraError::IncompatibleBand {
                        estimator: config.estimator,
                        band: base_method,
                    })
                }
            };
            let (method, epsilon, policy_correction) = match resolved.estimated {
                None => (base_method, base_eps, None),
                Some((eps_beta, inf_beta_hat)) => {
                    let widened =
                        eps_estimated_policy(base_eps, stats.w_max, eps_beta, inf_beta_hat)?;
                    (
                        BandMethod::EstimatedPolicyAdjusted,
                        widened,
                        Some(PolicyCorrection {
                            eps_beta,
                            inf_beta_hat,
                            correction: widened - base_eps,
                        }),
                    )
                }
            };
            Some(BandReport {
                band: ConfidenceBand {
                    epsilon,
                    delta: config.delta,
                    method,
                },
                base_method,
                weight_stats: stats,
                policy_correction,
            })
        }
    };

    let d = data.reward_bound();
    let epsilon = band.as_ref().map(|b| b.band.epsilon);
    let mut entries = Vec::with_capacity(config.risks.len());
    for risk in &config.risks {
        let estimate = risk.evaluate(&cdf)?;
        let lipschitz = risk.lipschitz_constant(d);
        // One band, many risks: every half-width is L_p times the same
        // epsilon, which is what makes the guarantees simultaneous.
        let half_width = match (lipschitz, epsilon) {
            (Some(l), Some(e)) => Some(l * e),
            _ => None,
        };
        entries.push(RiskEntry {
            name: risk.name(),
            estimate,
            lipschitz,
            half_width,
        });
    }

    Ok(RiskReport {
        estimator: config.estimator,
        n: data.len(),
        delta: config.delta,
        reward_bound: d,
        crossfit: config.crossfit,
        band,
        entries,
        cdf,
    })
}
