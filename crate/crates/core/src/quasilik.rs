//! Threshold classification of increments and the two quasi-likelihood
//! contrasts.
//!
//! An increment is treated as continuous when its magnitude stays at or below
//! h^rho, and as carrying (at least) one jump otherwise. The continuous
//! contrast `h1` is the truncated Gaussian quasi-likelihood of the diffusion
//! part; the jump contrast `h2` is the single-jump compound-Poisson term with
//! its compensator. The intensity enters `h2` through log-linear terms only,
//! so its maximizer has the closed form implemented by `profile_lambda`.

use crate::error::{Error, Result};
use crate::model::{JumpDensityFamily, ModelSpec};
use crate::quad::{self, QuadOptions};
use crate::simulate::Observations;

/// Threshold exponent rho with cutoff h^rho. Valid strictly inside
/// (3/8, 1/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRule {
    rho: f64,
}

impl ThresholdRule {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.375 && rho < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "threshold exponent must lie in (0.375, 0.5), got {rho}"
            )));
        }
        Ok(ThresholdRule { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn cutoff(&self, h: f64) -> f64 {
        h.powf(self.rho)
    }
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule { rho: 0.4 }
    }
}

/// Outcome of thresholding a path's increments.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementClassification {
    /// true at k when increment k is classified continuous.
    pub continuous_mask: Vec<bool>,
    /// The increments exceeding the cutoff, in path order.
    pub jump_values: Vec<f64>,
}

impl IncrementClassification {
    pub fn n_detected_jumps(&self) -> usize {
        self.jump_values.len()
    }
}

/// Split increments at the cutoff h^rho.
pub fn classify(obs: &Observations, rule: &ThresholdRule) -> IncrementClassification {
    let cutoff = rule.cutoff(obs.h);
    let mut mask = Vec::with_capacity(obs.n_increments());
    let mut jumps = Vec::new();
    for k in 1..obs.values.len() {
        let d = obs.values[k] - obs.values[k - 1];
        if d.abs() <= cutoff {
            mask.push(true);
        } else {
            mask.push(false);
            jumps.push(d);
        }
    }
    IncrementClassification {
        continuous_mask: mask,
        jump_values: jumps,
    }
}

/// Weight function applied to detected jumps in `h2`, together with its
/// integral against a jump density. `Identity` (weight one everywhere) is the
/// default; the smooth cutoff fades from one to zero between two radii.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TruncationFunction {
    #[default]
    Identity,
    SmoothCutoff { r1: f64, r2: f64 },
}

impl TruncationFunction {
    /// The default smooth cutoff radii.
    pub fn smooth_default() -> Self {
        TruncationFunction::SmoothCutoff { r1: 40.0, r2: 50.0 }
    }

    pub fn phi(&self, z: f64) -> f64 {
        match *self {
            TruncationFunction::Identity => 1.0,
            TruncationFunction::SmoothCutoff { r1, r2 } => {
                let t = ((r2 - z.abs()) / (r2 - r1)).clamp(0.0, 1.0);
                t * t * (3.0 - 2.0 * t)
            }
        }
    }

    /// Integral of phi against the density.
    pub fn integral_against(&self, family: &JumpDensityFamily, params: &[f64]) -> Result<f64> {
        match *self {
            TruncationFunction::Identity => Ok(family.normalizer(params)),
            TruncationFunction::SmoothCutoff { r1, r2 } => {
                let r = family.support_radius(params, -40.0).max(r2 + 1.0);
                let f = |z: f64| self.phi(z) * family.density(z, params);
                let mut breaks: Vec<f64> = vec![-r2, -r1, r1, r2];
                breaks.extend(family.kink(params));
                quad::integrate_split(
                    &f,
                    params[0] - r,
                    params[0] + r,
                    &breaks,
                    QuadOptions::default(),
                )
            }
        }
    }
}

/// Continuous contrast: for each continuous-classified increment,
/// -1/2 [ log S + (dX - h a)^2 / (h S) ] with S = b^2 evaluated at the left
/// endpoint. Fails when the diffusion is not strictly positive at a used
/// evaluation site.
pub fn h1(
    obs: &Observations,
    drift_params: &[f64],
    diff_params: &[f64],
    model: &ModelSpec,
    cls: &IncrementClassification,
) -> Result<f64> {
    if cls.continuous_mask.len() != obs.n_increments() {
        return Err(Error::DimensionMismatch {
            expected: obs.n_increments(),
            got: cls.continuous_mask.len(),
        });
    }
    let h = obs.h;
    let mut acc = 0.0;
    for (k, keep) in cls.continuous_mask.iter().enumerate() {
        if !keep {
            continue;
        }
        let x = obs.values[k];
        let b = model.diffusion().eval(x, diff_params);
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::NonPositiveDiffusion { index: k });
        }
        let s = b * b;
        let centered = (obs.values[k + 1] - x) - h * model.drift().eval(x, drift_params);
        acc += -0.5 * (s.ln() + centered * centered / (h * s));
    }
    Ok(acc)
}

/// Jump contrast: sum over detected jumps of
/// (log lambda + log F(dX)) phi(dX), minus the compensator
/// lambda * n * h * integral(F phi).
pub fn h2(
    obs: &Observations,
    jump_params: &[f64],
    lambda: f64,
    model: &ModelSpec,
    cls: &IncrementClassification,
    trunc: &TruncationFunction,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = obs.n_increments() as f64;
    let mut acc = 0.0;
    for (i, &z) in cls.jump_values.iter().enumerate() {
        let w = trunc.phi(z);
        if w == 0.0 {
            continue;
        }
        let logf = model.jump().log_density(z, jump_params);
        if !logf.is_finite() {
            return Err(Error::JumpDensityDiverged { index: i });
        }
        acc += (lambda.ln() + logf) * w;
    }
    let mass = trunc.integral_against(model.jump(), jump_params)?;
    Ok(acc - lambda * n * obs.h * mass)
}

/// Closed-form maximizer of `h2` in lambda, clamped to the model bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfiledLambda {
    pub value: f64,
    /// Set when no weighted jumps were detected; `value` is then the lower
    /// intensity bound.
    pub no_jumps_detected: bool,
}

/// Maximize `h2` over lambda at fixed jump parameters: the stationary point
/// of J log(lambda) - lambda n h m is J / (n h m), with J the truncated jump
/// count and m the truncated density mass.
pub fn profile_lambda(
    obs: &Observations,
    jump_params: &[f64],
    model: &ModelSpec,
    cls: &IncrementClassification,
    trunc: &TruncationFunction,
) -> Result<ProfiledLambda> {
    let (lo, hi) = model.lambda_bounds();
    let weighted_count: f64 = cls.jump_values.iter().map(|&z| trunc.phi(z)).sum();
    if weighted_count <= 0.0 {
        return Ok(ProfiledLambda {
            value: lo,
            no_jumps_detected: true,
        });
    }
    let mass = trunc.integral_against(model.jump(), jump_params)?;
    if !(mass > 0.0) {
        return Err(Error::InvalidParameter(
            "truncated density mass is not positive".into(),
        ));
    }
    let raw = weighted_count / (obs.n_increments() as f64 * obs.h * mass);
    Ok(ProfiledLambda {
        value: raw.clamp(lo, hi),
        no_jumps_detected: false,
    })
}
