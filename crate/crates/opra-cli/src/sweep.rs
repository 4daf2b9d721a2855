//! Monte Carlo sweep harness: sample datasets from a finite environment
//! across a grid of sample sizes (and optionally behavior-mixture levels),
//! run the configured estimators, and record sup-norm CDF errors, band
//! half-widths, and squared risk errors against the exact ground truth.
//!
//! Replications run on a rayon pool but each derives its own RNG stream
//! from `(seed, alpha index, n index, replication)`, so results are
//! identical regardless of scheduling, and rows are emitted in
//! `(alpha, n, rep, estimator)` order.

use std::time::Instant;

use opra_core::bound::{eps_dr, eps_is_bernstein, eps_is_hoeffding, BoundInputs};
use opra_core::env::FiniteEnv;
use opra_core::estimator::{
    estimate_dm, estimate_dm_crossfit, estimate_dr, estimate_dr_crossfit, estimate_is_clip,
    estimate_wis, monotone_clip,
};
use opra_core::model::{fit_per_threshold_logistic, fit_tabular, ThresholdGrid};
use opra_core::policy::context_key;
use opra_core::step::{sup_distance, StepCdf};
use opra_core::{
    CounterRng, EstimatorKind, LoggedDataset, ModelConfig, PolicySpec, RiskSpec, WeightStats,
};
use rayon::prelude::*;

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    /// When set, the behavior policy is replaced by
    /// `alpha * target + (1 - alpha) * uniform` for each grid value.
    pub alpha_grid: Option<Vec<f64>>,
    pub delta: f64,
    pub risks: Vec<RiskSpec>,
    pub model: ModelConfig,
    pub crossfit: bool,
    /// Measure wall-clock time per estimate. Off by default so that reruns
    /// with the same seed produce byte-identical CSVs.
    pub timings: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: Option<f64>,
    pub n: usize,
    pub rep: usize,
    pub estimator: EstimatorKind,
    pub sup_err: f64,
    pub band_eps: Option<f64>,
    pub risk_errs: Vec<f64>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub risk_names: Vec<String>,
    pub has_alpha: bool,
}

fn validate(config: &SweepConfig) -> Result<(), CliError> {
    if config.n_grid.is_empty() || !config.n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(CliError::config("--ns must be a strictly increasing list"));
    }
    if config.n_grid[0] == 0 {
        return Err(CliError::config("sample sizes must be positive"));
    }
    if config.replications == 0 {
        return Err(CliError::config("--reps must be at least 1"));
    }
    if config.estimators.is_empty() {
        return Err(CliError::config("--estimators must name at least one estimator"));
    }
    for kind in &config.estimators {
        if matches!(kind, EstimatorKind::Is | EstimatorKind::Dr) {
            return Err(CliError::config(format!(
                "estimator {kind} has no valid-CDF form for sweeps; use is-clip or m-dr"
            )));
        }
    }
    if !(config.delta > 0.0 && config.delta < 1.0) {
        return Err(CliError::config("--delta must lie strictly between 0 and 1"));
    }
    for risk in &config.risks {
        risk.validate().map_err(|e| CliError::config(e.to_string()))?;
    }
    Ok(())
}

fn build_estimate(
    kind: EstimatorKind,
    data: &LoggedDataset,
    target: &PolicySpec,
    behavior: &PolicySpec,
    model: &ModelConfig,
    crossfit: bool,
) -> Result<StepCdf, CliError> {
    match kind {
        EstimatorKind::IsClip => Ok(estimate_is_clip(data, target, Some(behavior))?),
        EstimatorKind::Wis => Ok(estimate_wis(data, target, Some(behavior))?),
        EstimatorKind::Dm | EstimatorKind::MDr => {
            let grid = ThresholdGrid::default_for(data).map_err(|e| CliError::config(e.to_string()))?;
            let dm = kind == EstimatorKind::Dm;
            match model {
                ModelConfig::Tabular { smoothing } => {
                    let smoothing = *smoothing;
                    let fit = |d: &LoggedDataset| fit_tabular(d, context_key, smoothing);
                    if dm {
                        if crossfit {
                            Ok(estimate_dm_crossfit(data, target, &grid, fit)?)
                        } else {
                            let model = fit(data).map_err(|e| CliError::config(e.to_string()))?;
                            Ok(estimate_dm(data, target, &model, &grid)?)
                        }
                    } else if crossfit {
                        Ok(monotone_clip(&estimate_dr_crossfit(
                            data,
                            target,
                            Some(behavior),
                            &grid,
                            fit,
                        )?))
                    } else {
                        let model = fit(data).map_err(|e| CliError::config(e.to_string()))?;
                        Ok(monotone_clip(&estimate_dr(
                            data,
                            target,
                            Some(behavior),
                            &model,
                            &grid,
                        )?))
                    }
                }
                ModelConfig::Logistic { grid_points, fit: fit_config } => {
                    let fit_grid = match grid_points {
                        Some(points) => ThresholdGrid::even(*points, data.reward_bound())
                            .map_err(|e| CliError::config(e.to_string()))?,
                        None => grid.clone(),
                    };
                    let fit_config = *fit_config;
                    let fit = |d: &LoggedDataset| {
                        fit_per_threshold_logistic(d, fit_grid.clone(), fit_config)
                    };
                    if dm {
                        if crossfit {
                            Ok(estimate_dm_crossfit(data, target, &grid, fit)?)
                        } else {
                            let model = fit(data).map_err(|e| CliError::config(e.to_string()))?;
                            Ok(estimate_dm(data, target, &model, &grid)?)
                        }
                    } else if crossfit {
                        Ok(monotone_clip(&estimate_dr_crossfit(
                            data,
                            target,
                            Some(behavior),
                            &grid,
                            fit,
                        )?))
                    } else {
                        let model = fit(data).map_err(|e| CliError::config(e.to_string()))?;
                        Ok(monotone_clip(&estimate_dr(
                            data,
                            target,
                            Some(behavior),
                            &model,
                            &grid,
                        )?))
                    }
                }
            }
        }
        EstimatorKind::Is | EstimatorKind::Dr => {
            Err(CliError::config(format!("estimator {kind} not valid for sweeps")))
        }
    }
}

fn band_for(kind: EstimatorKind, n: usize, delta: f64, stats: WeightStats) -> Option<f64> {
    let inputs = BoundInputs::new(n, delta, stats).ok()?;
    match kind {
        // Both IS bounds hold individually and the choice between them
        // depends only on (n, delta, w_max, w_2), so taking the smaller one
        // is a valid band.
        EstimatorKind::IsClip => Some(eps_is_hoeffding(&inputs).min(eps_is_bernstein(&inputs))),
        EstimatorKind::MDr => Some(eps_dr(&inputs)),
        _ => None,
    }
}

/// Run the sweep. Rows come back ordered by `(alpha, n, rep, estimator)`.
pub fn run_sweep(
    env: &FiniteEnv,
    target: &PolicySpec,
    behavior: &PolicySpec,
    config: &SweepConfig,
) -> Result<SweepResult, CliError> {
    validate(config)?;
    let risk_names: Vec<String> = config.risks.iter().map(RiskSpec::name).collect();

    // (alpha, behavior policy) pairs; a single unlabeled entry without an
    // alpha grid.
    let behaviors: Vec<(Option<f64>, PolicySpec)> = match &config.alpha_grid {
        None => vec![(None, behavior.clone())],
        Some(alphas) => {
            let mut out = Vec::with_capacity(alphas.len());
            for &alpha in alphas {
                let mixed = if alpha == 1.0 {
                    target.clone()
                } else {
                    PolicySpec::mixture(target.clone(), alpha)
                        .map_err(|e| CliError::config(e.to_string()))?
                };
                out.push((Some(alpha), mixed));
            }
            out
        }
    };

    let truth = env
        .true_cdf(target)
        .map_err(|e| CliError::config(e.to_string()))?;
    let mut true_risks = Vec::with_capacity(config.risks.len());
    for risk in &config.risks {
        true_risks.push(
            risk.evaluate(&truth)
                .map_err(|e| CliError::config(e.to_string()))?,
        );
    }

    let mut rows = Vec::new();
    for (alpha_idx, (alpha, behavior)) in behaviors.iter().enumerate() {
        let stats = env
            .weight_stats_exact(target, behavior)
            .map_err(|e| CliError::Estimation(e.to_string()))?;
        let cells: Vec<(usize, usize)> = config
            .n_grid
            .iter()
            .enumerate()
            .flat_map(|(n_idx, _)| (0..config.replications).map(move |rep| (n_idx, rep)))
            .collect();
        let cell_rows: Vec<Result<Vec<SweepRow>, CliError>> = cells
            .par_iter()
            .map(|&(n_idx, rep)| {
                let n = config.n_grid[n_idx];
                let mut rng = CounterRng::stream(
                    config.seed,
                    &[alpha_idx as u64, n_idx as u64, rep as u64],
                );
                let data = env
                    .sample_dataset(behavior, n, &mut rng)
                    .map_err(|e| CliError::Estimation(e.to_string()))?;
                let mut out = Vec::with_capacity(config.estimators.len());
                for &kind in &config.estimators {
                    let start = Instant::now();
                    let estimate =
                        build_estimate(kind, &data, target, behavior, &config.model, config.crossfit)?;
                    let runtime_ms = if config.timings {
                        start.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    };
                    let sup_err = sup_distance(&estimate, &truth);
                    let mut risk_errs = Vec::with_capacity(config.risks.len());
                    for (risk, &truth_value) in config.risks.iter().zip(true_risks.iter()) {
                        let value = risk
                            .evaluate(&estimate)
                            .map_err(|e| CliError::Estimation(e.to_string()))?;
                        let err = value - truth_value;
                        risk_errs.push(err * err);
                    }
                    out.push(SweepRow {
                        alpha: *alpha,
                        n,
                        rep,
                        estimator: kind,
                        sup_err,
                        band_eps: band_for(kind, n, config.delta, stats),
                        risk_errs,
                        runtime_ms,
                    });
                }
                Ok(out)
            })
            .collect();
        for cell in cell_rows {
            rows.extend(cell?);
        }
    }

    Ok(SweepResult {
        rows,
        risk_names,
        has_alpha: config.alpha_grid.is_some(),
    })
}

/// Render the result as CSV. Column layout:
/// `n,rep[,alpha],estimator,sup_err,band_eps,<risk>_err...,runtime_ms`;
/// risk column names replace `:` with `_`. `band_eps` is empty for
/// estimators without a finite-sample guarantee.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("n,rep");
    if result.has_alpha {
        out.push_str(",alpha");
    }
    out.push_str(",estimator,sup_err,band_eps");
    for name in &result.risk_names {
        out.push(',');
        out.push_str(&name.replace(':', "_"));
        out.push_str("_err");
    }
    out.push_str(",runtime_ms\n");
    for row in &result.rows {
        out.push_str(&format!("{},{}", row.n, row.rep));
        if result.has_alpha {
            match row.alpha {
                Some(a) => out.push_str(&format!(",{a}")),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{},{}", row.estimator, row.sup_err));
        match row.band_eps {
            Some(eps) => out.push_str(&format!(",{eps}")),
            None => out.push(','),
        }
        for err in &row.risk_errs {
            out.push_str(&format!(",{err}"));
        }
        out.push_str(&format!(",{}\n", row.runtime_ms));
    }
    out
}
