//! Run manifests and report rendering (JSON + human-readable table).

use std::fs;
use std::time::{SystemTime, UNIX_EPOCH};

use opra_core::bound::{eps_dkw, eps_is_bernstein, eps_is_hoeffding, BandMethod, BoundInputs};
use opra_core::step::StepFunction;
use opra_core::{RiskReport, WeightStatsSource};
use serde::Serialize;
use serde_json::json;

use crate::error::CliError;

/// Provenance attached to every emitted artifact: the command and its
/// configuration, the seed, library version, timestamp, and digests of all
/// input files.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub created_unix_ms: u64,
    pub inputs: Vec<InputDigest>,
    pub config: serde_json::Value,
    /// Artifacts this manifest describes (paths as written).
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub digest: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: serde_json::Value) -> Self {
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            created_unix_ms,
            inputs: Vec::new(),
            config,
            artifacts: Vec::new(),
        }
    }

    pub fn record_input(&mut self, path: &str) -> Result<(), CliError> {
        self.inputs.push(InputDigest {
            path: path.to_string(),
            digest: crate::io::digest_file(path)?,
        });
        Ok(())
    }

    pub fn record_artifact(&mut self, path: &str) {
        self.artifacts.push(path.to_string());
    }

    pub fn write(&self, path: &str) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::config(e.to_string()))?;
        text.push('\n');
        fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}

/// Both IS band variants for a report, with the tighter one labeled.
fn is_band_alternatives(report: &RiskReport) -> Vec<serde_json::Value> {
    let Some(band) = &report.band else {
        return Vec::new();
    };
    if !matches!(band.base_method, BandMethod::IsHoeffding | BandMethod::IsBernstein) {
        return Vec::new();
    }
    let Ok(inputs) = BoundInputs::new(report.n, report.delta, band.weight_stats) else {
        return Vec::new();
    };
    let hoeffding = eps_is_hoeffding(&inputs);
    let bernstein = eps_is_bernstein(&inputs);
    vec![
        json!({
            "method": BandMethod::IsHoeffding.as_str(),
            "epsilon": hoeffding,
            "tighter": hoeffding <= bernstein,
        }),
        json!({
            "method": BandMethod::IsBernstein.as_str(),
            "epsilon": bernstein,
            "tighter": bernstein < hoeffding,
        }),
    ]
}

/// JSON rendering of a risk report (stable key order).
pub fn report_json(report: &RiskReport, manifest: &RunManifest) -> serde_json::Value {
    let band = report.band.as_ref().map(|b| {
        json!({
            "method": b.band.method.as_str(),
            "base_method": b.base_method.as_str(),
            "epsilon": b.band.epsilon,
            "delta": b.band.delta,
            "weight_stats": {
                "w_max": b.weight_stats.w_max,
                "w_2": b.weight_stats.w_2,
                "source": match b.weight_stats.source {
                    WeightStatsSource::Exact => "exact",
                    WeightStatsSource::Empirical => "empirical-estimate",
                },
            },
            "heuristic": b.is_heuristic(),
            "vacuous": b.band.is_vacuous(),
            "policy_correction": b.policy_correction.map(|c| json!({
                "eps_beta": c.eps_beta,
                "inf_beta_hat": c.inf_beta_hat,
                "correction": c.correction,
            })),
            "alternatives": is_band_alternatives(report),
            // The classical on-policy empirical-CDF width at the same
            // (n, delta): the w_max = 1 reference point.
            "dkw_baseline": eps_dkw(report.n, report.delta).ok(),
        })
    });
    let risks: Vec<serde_json::Value> = report
        .entries
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "estimate": e.estimate,
                "lipschitz": e.lipschitz,
                "half_width": e.half_width,
                "guarantee": e.half_width.is_some(),
            })
        })
        .collect();
    json!({
        "manifest": serde_json::to_value(manifest).expect("manifest serializes"),
        "estimator": report.estimator.as_str(),
        "n": report.n,
        "delta": report.delta,
        "reward_bound": report.reward_bound,
        "crossfit": report.crossfit,
        "crossfit_split": if report.crossfit { Some("index-parity") } else { None },
        "band": band,
        "risks": risks,
        "cdf": {
            "breakpoints": report.cdf.breakpoints(),
            "values": report.cdf.values(),
            "support_bound": report.cdf.support_bound(),
        },
    })
}

/// Human-readable table rendering.
pub fn report_table(report: &RiskReport) -> String {
    let mut out = String::new();
    out.push_str("off-policy risk assessment\n");
    out.push_str(&format!(
        "  estimator: {}   n: {}   delta: {}   reward bound: {}{}\n",
        report.estimator,
        report.n,
        report.delta,
        report.reward_bound,
        if report.crossfit { "   (cross-fit)" } else { "" },
    ));
    match &report.band {
        Some(b) => {
            let mut flags = String::new();
            if b.is_heuristic() {
                flags.push_str("  [heuristic: empirical weight stats]");
            }
            if b.band.is_vacuous() {
                flags.push_str("  [VACUOUS: epsilon >= 1]");
            }
            out.push_str(&format!(
                "  band: {}  epsilon: {:.6}  (w_max {}, w_2 {}){}\n",
                b.band.method, b.band.epsilon, b.weight_stats.w_max, b.weight_stats.w_2, flags,
            ));
            if matches!(b.base_method, BandMethod::IsHoeffding | BandMethod::IsBernstein) {
                if let Ok(inputs) = BoundInputs::new(report.n, report.delta, b.weight_stats) {
                    let hoeffding = eps_is_hoeffding(&inputs);
                    let bernstein = eps_is_bernstein(&inputs);
                    let tighter = if bernstein < hoeffding { "bernstein" } else { "hoeffding" };
                    out.push_str(&format!(
                        "  is bands: hoeffding {hoeffding:.6}, bernstein {bernstein:.6} (tighter: {tighter})\n"
                    ));
                }
            }
            if let Some(c) = b.policy_correction {
                out.push_str(&format!(
                    "  estimated-policy widening: +{:.6} (eps_beta {}, inf beta_hat {})\n",
                    c.correction, c.eps_beta, c.inf_beta_hat,
                ));
            }
        }
        None => out.push_str("  band: none (estimate-only mode, no guarantee)\n"),
    }
    out.push('\n');
    out.push_str(&format!(
        "  {:<20} {:>12} {:>8} {:>12}\n",
        "risk", "estimate", "L", "half-width"
    ));
    for e in &report.entries {
        let l = e
            .lipschitz
            .map_or_else(|| "-".to_string(), |l| format!("{l:.3}"));
        let hw = e
            .half_width
            .map_or_else(|| "no guarantee".to_string(), |h| format!("{h:.6}"));
        out.push_str(&format!(
            "  {:<20} {:>12.6} {:>8} {:>12}\n",
            e.name, e.estimate, l, hw
        ));
    }
    out
}
