//! Off-policy risk assessment for contextual bandits.
//!
//! Everything revolves around estimating the reward CDF of a *target* policy
//! π from data logged under a *behavior* policy β, then reading risk
//! functionals (mean, CVaR, variance, distorted and CPT risks, ...) off the
//! estimated CDF. Because every risk is evaluated on the same estimate, a
//! single sup-norm confidence band yields error bounds for all of them
//! simultaneously.
//!
//! The crate is `no_std` (with `alloc`): it contains only the numerics.
//! Dataset/policy file formats, the CLI, and the Monte Carlo sweep harness
//! live in the companion `opra-cli` crate.
//!
//! Module map:
//!
//! - [`step`]: right-continuous step functions — the carrier for every CDF
//!   estimate.
//! - [`data`]: logged interaction datasets.
//! - [`policy`]: policy representations, importance weights, weight
//!   statistics, tabular behavior-policy estimation.
//! - [`model`]: conditional reward-CDF models Ḡ(t; x, a) for the direct
//!   method and doubly robust estimators.
//! - [`estimator`]: the CDF estimators (IS, clipped IS, WIS, DM, DR) plus the
//!   monotone-clip projection and two-fold cross-fitting.
//! - [`bound`]: closed-form finite-sample sup-norm confidence half-widths.
//! - [`risk`]: Lipschitz risk functionals evaluated exactly on step CDFs.
//! - [`opra`]: the assessment orchestration — one CDF, one band, many risks.
//! - [`mod@env`]: finite synthetic environments with exact ground truth.
//! - [`transform`]: the classification-to-bandit dataset transform.
//! - [`rng`]: counter-based deterministic random streams.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bound;
pub mod data;
pub mod env;
pub mod estimator;
pub mod model;
pub mod opra;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod step;
pub mod transform;

pub use bound::{BoundError, BoundInputs, BandMethod, ConfidenceBand};
pub use data::{DataError, Interaction, LoggedDataset};
pub use env::{DiscreteDist, EnvContext, FiniteEnv};
pub use estimator::{EstimatorError, EstimatorKind};
pub use model::{ConditionalCdf, ModelError, ThresholdGrid};
pub use opra::{run_opra, BehaviorSource, ModelConfig, OpraConfig, OpraError, RiskEntry, RiskReport};
pub use policy::{PolicyError, PolicySpec, WeightStats, WeightStatsSource};
pub use risk::{Distortion, RiskError, RiskSpec, Utility};
pub use rng::CounterRng;
pub use step::{RawStepFn, StepCdf, StepError, StepFunction};
