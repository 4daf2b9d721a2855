//! Law-invariant risk functionals evaluated exactly on step CDFs.
//!
//! For a nonnegative random variable with CDF `F` on `[0, D]`, a distorted
//! risk is `ρ(F) = ∫ g(1 - F(t)) dt` for a distortion `g: [0,1] → [0,1]`
//! with `g(0) = 0`, `g(1) = 1`, nondecreasing. The identity `g` gives the
//! mean; `g(s) = max{(s - (1-α))/α, 0}` gives the lower-tail CVaR at level
//! α, the average of the worst α-fraction of outcomes. Variance, mean plus
//! scaled variance, CPT risks (gains and losses split around a baseline and
//! distorted separately), and weighted sums are also supported.
//!
//! Because step CDFs are piecewise constant, every integral here is a
//! finite sum — no quadrature, no discretization error.
//!
//! Each functional carries a Lipschitz constant `L` with respect to the sup
//! norm on CDFs: `|ρ(F) - ρ(F')| <= L ‖F - F'‖∞`. A sup-norm confidence
//! band of half-width ε on the CDF therefore yields the half-width `L·ε`
//! for the risk estimate. The quantile (value-at-risk) functional is the
//! deliberate exception: it is not Lipschitz and yields no half-width.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use thiserror::Error;

use crate::step::{StepCdf, StepFunction};

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("level alpha must lie strictly between 0 and 1, got {0}")]
    BadAlpha(f64),
    #[error("lambda must be positive, got {0}")]
    BadLambda(f64),
    #[error("weighted sum needs at least one child")]
    EmptyWeightedSum,
    #[error("invalid distortion: {0}")]
    InvalidDistortion(&'static str),
    #[error("invalid utility: {0}")]
    InvalidUtility(&'static str),
}

/// A distortion function `g: [0, 1] → [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Distortion {
    Identity,
    /// `g(s) = max{(s - (1 - alpha)) / alpha, 0}` — lower-tail CVaR at
    /// level alpha. 1/alpha-Lipschitz.
    CvarLower { alpha: f64 },
    /// Proportional hazard `g(s) = s^alpha` for `alpha` in (0, 1]. Not
    /// Lipschitz for `alpha < 1` (unbounded slope at 0).
    PowerHazard { alpha: f64 },
    /// Linear interpolation through `(s, g(s))` points covering [0, 1].
    /// Lipschitz modulus is the maximum slope.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl Distortion {
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Self::Identity => s,
            Self::CvarLower { alpha } => ((s - (1.0 - alpha)) / alpha).clamp(0.0, 1.0),
            Self::PowerHazard { alpha } => libm::pow(s, *alpha),
            Self::PiecewiseLinear { points } => {
                let idx = points.partition_point(|p| p.0 <= s);
                if idx == 0 {
                    return points[0].1;
                }
                if idx == points.len() {
                    return points[points.len() - 1].1;
                }
                let (s0, g0) = points[idx - 1];
                let (s1, g1) = points[idx];
                g0 + (g1 - g0) * (s - s0) / (s1 - s0)
            }
        }
    }

    /// Lipschitz modulus of `g` itself, when finite.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Self::Identity => Some(1.0),
            Self::CvarLower { alpha } => Some(1.0 / alpha),
            Self::PowerHazard { alpha } if *alpha >= 1.0 => Some(1.0),
            Self::PowerHazard { .. } => None,
            Self::PiecewiseLinear { points } => points
                .windows(2)
                .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
                .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s)))),
        }
    }

    /// Structural parameter checks plus a 1025-point grid sample verifying
    /// `g(0) = 0`, `g(1) = 1`, nondecreasing.
    pub fn validate(&self) -> Result<(), RiskError> {
        match self {
            Self::Identity => {}
            Self::CvarLower { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0) {
                    return Err(RiskError::BadAlpha(*alpha));
                }
            }
            Self::PowerHazard { alpha } => {
                if !(alpha.is_finite() && *alpha > 0.0 && *alpha <= 1.0) {
                    return Err(RiskError::BadAlpha(*alpha));
                }
            }
            Self::PiecewiseLinear { points } => {
                if points.len() < 2 {
                    return Err(RiskError::InvalidDistortion("needs at least two points"));
                }
                if !points.windows(2).all(|w| w[0].0 < w[1].0) {
                    return Err(RiskError::InvalidDistortion("s-coordinates must be strictly increasing"));
                }
                if points[0].0 != 0.0 || points[points.len() - 1].0 != 1.0 {
                    return Err(RiskError::InvalidDistortion("points must cover [0, 1]"));
                }
                if points.iter().any(|p| !p.1.is_finite()) {
                    return Err(RiskError::InvalidDistortion("values must be finite"));
                }
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=1024 {
            let v = self.eval(i as f64 / 1024.0);
            if v < prev {
                return Err(RiskError::InvalidDistortion("not nondecreasing"));
            }
            prev = v;
        }
        if self.eval(0.0) != 0.0 || (self.eval(1.0) - 1.0).abs() > 1e-12 {
            return Err(RiskError::InvalidDistortion("must map 0 to 0 and 1 to 1"));
        }
        Ok(())
    }

    fn name(&self) -> String {
        match self {
            Self::Identity => String::from("identity"),
            Self::CvarLower { alpha } => format!("cvar({alpha})"),
            Self::PowerHazard { alpha } => format!("power({alpha})"),
            Self::PiecewiseLinear { .. } => String::from("pwl"),
        }
    }
}

/// A continuous nonnegative utility `u: ℝ → ℝ₊` for CPT gains/losses.
#[derive(Debug, Clone, PartialEq)]
pub enum Utility {
    Identity,
    Zero,
    /// `max(z - c, 0)` — active on gains above the baseline.
    GainAbove { c: f64 },
    /// `max(c - z, 0)` — active on losses below the baseline.
    LossBelow { c: f64 },
    /// Linear interpolation with constant extension beyond the endpoints.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl Utility {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Self::Identity => z.max(0.0),
            Self::Zero => 0.0,
            Self::GainAbove { c } => (z - c).max(0.0),
            Self::LossBelow { c } => (c - z).max(0.0),
            Self::PiecewiseLinear { points } => {
                let idx = points.partition_point(|p| p.0 <= z);
                if idx == 0 {
                    return points[0].1;
                }
                if idx == points.len() {
                    return points[points.len() - 1].1;
                }
                let (z0, u0) = points[idx - 1];
                let (z1, u1) = points[idx];
                u0 + (u1 - u0) * (z - z0) / (z1 - z0)
            }
        }
    }

    pub fn validate(&self) -> Result<(), RiskError> {
        if let Self::PiecewiseLinear { points } = self {
            if points.len() < 2 {
                return Err(RiskError::InvalidUtility("needs at least two points"));
            }
            if !points.windows(2).all(|w| w[0].0 < w[1].0) {
                return Err(RiskError::InvalidUtility("z-coordinates must be strictly increasing"));
            }
            if points.iter().any(|p| !(p.1.is_finite() && p.1 >= 0.0)) {
                return Err(RiskError::InvalidUtility("values must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// A risk functional to evaluate on an estimated CDF.
#[derive(Debug, Clone, PartialEq)]
pub enum RiskSpec {
    Mean,
    /// Lower-tail conditional value-at-risk at level alpha.
    Cvar { alpha: f64 },
    Variance,
    /// `E[Z] + lambda · V[Z]`, lambda > 0.
    MeanVariance { lambda: f64 },
    /// `∫ g(1 - F)` with an explicit distortion; `lip_g` overrides the
    /// computed modulus of `g` when supplied.
    Distorted { g: Distortion, lip_g: Option<f64> },
    /// Gains and losses split around `baseline` by `u_plus`/`u_minus`,
    /// distorted by `g_plus`/`g_minus`:
    /// `∫ g⁺(1 - F_{u⁺(Z)}) - ∫ g⁻(1 - F_{u⁻(Z)})`.
    Cpt {
        g_plus: Distortion,
        g_minus: Distortion,
        u_plus: Utility,
        u_minus: Utility,
        baseline: f64,
        lip_g: Option<f64>,
    },
    /// `Σ_k lambda_k · rho_k`, all lambda_k > 0.
    WeightedSum { children: Vec<(f64, RiskSpec)> },
    /// The generalized inverse `F⁻¹(alpha)`. Not Lipschitz: estimates carry
    /// no half-width.
    VarQuantile { alpha: f64 },
}

impl RiskSpec {
    pub fn validate(&self) -> Result<(), RiskError> {
        match self {
            Self::Mean | Self::Variance => Ok(()),
            Self::Cvar { alpha } | Self::VarQuantile { alpha } => {
                if alpha.is_finite() && *alpha > 0.0 && *alpha < 1.0 {
                    Ok(())
                } else {
                    Err(RiskError::BadAlpha(*alpha))
                }
            }
            Self::MeanVariance { lambda } => {
                if lambda.is_finite() && *lambda > 0.0 {
                    Ok(())
                } else {
                    Err(RiskError::BadLambda(*lambda))
                }
            }
            Self::Distorted { g, .. } => g.validate(),
            Self::Cpt {
                g_plus,
                g_minus,
                u_plus,
                u_minus,
                ..
            } => {
                g_plus.validate()?;
                g_minus.validate()?;
                u_plus.validate()?;
                u_minus.validate()
            }
            Self::WeightedSum { children } => {
                if children.is_empty() {
                    return Err(RiskError::EmptyWeightedSum);
                }
                for (lambda, child) in children {
                    if !(lambda.is_finite() && *lambda > 0.0) {
                        return Err(RiskError::BadLambda(*lambda));
                    }
                    child.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Stable display name used in reports and CSV column headers.
    pub fn name(&self) -> String {
        match self {
            Self::Mean => String::from("mean"),
            Self::Cvar { alpha } => format!("cvar:{alpha}"),
            Self::Variance => String::from("variance"),
            Self::MeanVariance { lambda } => format!("mean-variance:{lambda}"),
            Self::Distorted { g, .. } => format!("distorted:{}", g.name()),
            Self::Cpt { baseline, .. } => format!("cpt:{baseline}"),
            Self::WeightedSum { children } => {
                let mut s = String::from("sum(");
                for (i, (lambda, child)) in children.iter().enumerate() {
                    if i > 0 {
                        s.push('+');
                    }
                    s.push_str(&format!("{lambda}*{}", child.name()));
                }
                s.push(')');
                s
            }
            Self::VarQuantile { alpha } => format!("var:{alpha}"),
        }
    }

    pub fn evaluate(&self, f: &StepCdf) -> Result<f64, RiskError> {
        self.validate()?;
        Ok(match self {
            Self::Mean => eval_mean(f),
            Self::Cvar { alpha } => eval_cvar(f, *alpha)?,
            Self::Variance => eval_variance(f),
            Self::MeanVariance { lambda } => eval_mean(f) + lambda * eval_variance(f),
            Self::Distorted { g, .. } => eval_distorted(f, g),
            Self::Cpt {
                g_plus,
                g_minus,
                u_plus,
                u_minus,
                ..
            } => eval_cpt(f, g_plus, g_minus, u_plus, u_minus),
            Self::WeightedSum { children } => {
                let mut total = 0.0;
                for (lambda, child) in children {
                    total += lambda * child.evaluate(f)?;
                }
                total
            }
            Self::VarQuantile { alpha } => f.quantile(*alpha),
        })
    }

    /// The sup-norm Lipschitz constant on `[0, D]`, when one exists:
    /// mean `D`, CVaR `D/α`, variance `3D²`, mean-variance `D + 3λD²`,
    /// distorted `lip(g)·D`, CPT `2·lip(g)·D` (conservative), weighted sums
    /// add up. Quantiles have none.
    pub fn lipschitz_constant(&self, d: f64) -> Option<f64> {
        match self {
            Self::Mean => Some(d),
            Self::Cvar { alpha } => Some(d / alpha),
            Self::Variance => Some(3.0 * d * d),
            Self::MeanVariance { lambda } => Some(d + 3.0 * lambda * d * d),
            Self::Distorted { g, lip_g } => lip_g.or_else(|| g.lipschitz()).map(|l| l * d),
            Self::Cpt {
                g_plus,
                g_minus,
                lip_g,
                ..
            } => lip_g
                .or_else(|| match (g_plus.lipschitz(), g_minus.lipschitz()) {
                    (Some(a), Some(b)) => Some(a.max(b)),
                    _ => None,
                })
                .map(|l| 2.0 * l * d),
            Self::WeightedSum { children } => {
                let mut total = 0.0;
                for (lambda, child) in children {
                    total += lambda * child.lipschitz_constant(d)?;
                }
                Some(total)
            }
            Self::VarQuantile { .. } => None,
        }
    }
}

/// Walk the constant segments of `F` over `[0, support_bound]`, calling
/// `accum(lo, hi, value)` for each nonempty segment.
fn for_each_segment<A: FnMut(f64, f64, f64)>(f: &StepCdf, mut accum: A) {
    let d = f.support_bound();
    let mut prev = 0.0;
    let mut value = 0.0;
    for (&b, &v) in f.breakpoints().iter().zip(f.values().iter()) {
        if b > prev {
            accum(prev, b, value);
            prev = b;
        }
        value = v;
    }
    if d > prev {
        accum(prev, d, value);
    }
}

/// `∫₀^D g(1 - F(t)) dt`, exact on the step segments.
pub fn eval_distorted(f: &StepCdf, g: &Distortion) -> f64 {
    let mut total = 0.0;
    for_each_segment(f, |lo, hi, value| {
        total += g.eval(1.0 - value) * (hi - lo);
    });
    total
}

/// Expected value: the identity distortion.
pub fn eval_mean(f: &StepCdf) -> f64 {
    eval_distorted(f, &Distortion::Identity)
}

/// Lower-tail CVaR at level alpha: the expected value over the worst
/// alpha-fraction of outcomes, `(1/α) ∫₀^α F⁻¹(u) du`.
pub fn eval_cvar(f: &StepCdf, alpha: f64) -> Result<f64, RiskError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::BadAlpha(alpha));
    }
    Ok(eval_distorted(f, &Distortion::CvarLower { alpha }))
}

/// `2 ∫ t (1 - F(t)) dt - (∫ (1 - F(t)) dt)²`, exact on the step segments.
pub fn eval_variance(f: &StepCdf) -> f64 {
    let mut second_moment = 0.0;
    let mut mean = 0.0;
    for_each_segment(f, |lo, hi, value| {
        let tail = 1.0 - value;
        second_moment += tail * (hi * hi - lo * lo);
        mean += tail * (hi - lo);
    });
    second_moment - mean * mean
}

/// `E[Z] + lambda · V[Z]`.
pub fn eval_mean_variance(f: &StepCdf, lambda: f64) -> Result<f64, RiskError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(RiskError::BadLambda(lambda));
    }
    Ok(eval_mean(f) + lambda * eval_variance(f))
}

/// Push the atoms of `f` through a utility and rebuild the step CDF of the
/// transformed variable. Any sub-distribution residual mass sits at the
/// support bound, matching how the distorted integral treats it.
fn pushforward(f: &StepCdf, u: &Utility) -> Option<StepCdf> {
    let mut atoms = f.atoms();
    let residual = 1.0 - f.terminal_value();
    if residual > 0.0 {
        atoms.push((f.support_bound(), residual));
    }
    let mapped: Vec<(f64, f64)> = atoms.iter().map(|&(z, m)| (u.eval(z), m)).collect();
    let bound = mapped.iter().fold(0.0f64, |b, &(loc, _)| b.max(loc));
    if bound <= 0.0 {
        // Everything maps to zero: the transformed variable is degenerate at
        // 0 and contributes nothing to the distorted integral.
        return None;
    }
    Some(StepCdf::from_atoms(&mapped, bound).expect("pushforward atoms are valid"))
}

/// CPT risk: gains and losses are mapped through the utilities, each
/// transformed distribution is distorted separately, and the loss part is
/// subtracted.
pub fn eval_cpt(
    f: &StepCdf,
    g_plus: &Distortion,
    g_minus: &Distortion,
    u_plus: &Utility,
    u_minus: &Utility,
) -> f64 {
    let plus = pushforward(f, u_plus).map_or(0.0, |p| eval_distorted(&p, g_plus));
    let minus = pushforward(f, u_minus).map_or(0.0, |p| eval_distorted(&p, g_minus));
    plus - minus
}

/// The generalized inverse `F⁻¹(alpha)` — value-at-risk.
pub fn eval_var_quantile(f: &StepCdf, alpha: f64) -> Result<f64, RiskError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(RiskError::BadAlpha(alpha));
    }
    Ok(f.quantile(alpha))
}

/// `Σ_k lambda_k · rho_k(F)`.
pub fn eval_weighted_sum(f: &StepCdf, children: &[(f64, RiskSpec)]) -> Result<f64, RiskError> {
    if children.is_empty() {
        return Err(RiskError::EmptyWeightedSum);
    }
    let mut total = 0.0;
    for (lambda, child) in children {
        if !(lambda.is_finite() && *lambda > 0.0) {
            return Err(RiskError::BadLambda(*lambda));
        }
        total += lambda * child.evaluate(f)?;
    }
    Ok(total)
}
