//! The `--risks` command grammar: comma-separated `name[:param[:param]]`.
//!
//! Supported names:
//!
//! - `mean`
//! - `cvar:ALPHA` — lower-tail CVaR at level ALPHA
//! - `variance`
//! - `mean-variance:LAMBDA`
//! - `var:ALPHA` — the quantile (value-at-risk); no half-width
//! - `power:ALPHA` — proportional-hazard distortion `g(s) = s^ALPHA`
//! - `cpt:BASELINE` — CPT with hinge utilities around BASELINE and identity
//!   distortions
//! - `distorted:@FILE.csv` — piecewise-linear distortion table (`s,g`
//!   pairs); the Lipschitz modulus is the maximum slope

use opra_core::{Distortion, RiskSpec, Utility};

use crate::error::CliError;
use crate::io::read_distortion_table;

fn parse_param(spec: &str, name: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse()
        .map_err(|_| CliError::config(format!("risk {spec:?}: cannot parse {name} from {raw:?}")))
}

fn parse_one(spec: &str) -> Result<RiskSpec, CliError> {
    let (name, param) = match spec.split_once(':') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let require = |what: &str| {
        param.ok_or_else(|| CliError::config(format!("risk {spec:?}: missing {what} parameter")))
    };
    let risk = match name {
        "mean" => RiskSpec::Mean,
        "variance" => RiskSpec::Variance,
        "cvar" => RiskSpec::Cvar {
            alpha: parse_param(spec, "alpha", require("alpha")?)?,
        },
        "mean-variance" => RiskSpec::MeanVariance {
            lambda: parse_param(spec, "lambda", require("lambda")?)?,
        },
        "var" => RiskSpec::VarQuantile {
            alpha: parse_param(spec, "alpha", require("alpha")?)?,
        },
        "power" => RiskSpec::Distorted {
            g: Distortion::PowerHazard {
                alpha: parse_param(spec, "alpha", require("alpha")?)?,
            },
            lip_g: None,
        },
        "cpt" => {
            let c = parse_param(spec, "baseline", require("baseline")?)?;
            RiskSpec::Cpt {
                g_plus: Distortion::Identity,
                g_minus: Distortion::Identity,
                u_plus: Utility::GainAbove { c },
                u_minus: Utility::LossBelow { c },
                baseline: c,
                lip_g: None,
            }
        }
        "distorted" => {
            let arg = require("table")?;
            let path = arg.strip_prefix('@').ok_or_else(|| {
                CliError::config(format!("risk {spec:?}: expected distorted:@FILE.csv"))
            })?;
            RiskSpec::Distorted {
                g: Distortion::PiecewiseLinear {
                    points: read_distortion_table(path)?,
                },
                lip_g: None,
            }
        }
        other => {
            return Err(CliError::config(format!(
                "unknown risk {other:?} (expected mean, cvar:A, variance, mean-variance:L, var:A, power:A, cpt:C, distorted:@FILE)"
            )))
        }
    };
    risk.validate()
        .map_err(|e| CliError::config(format!("risk {spec:?}: {e}")))?;
    Ok(risk)
}

/// Parse a comma-separated risk list.
pub fn parse_risks(arg: &str) -> Result<Vec<RiskSpec>, CliError> {
    let mut risks = Vec::new();
    for spec in arg.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        risks.push(parse_one(spec)?);
    }
    if risks.is_empty() {
        return Err(CliError::config("no risks given"));
    }
    Ok(risks)
}
