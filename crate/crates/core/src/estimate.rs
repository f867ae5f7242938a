//! Quasi-maximum likelihood fitting and the empirical information matrix.
//!
//! Fitting is a two-stage maximization exploiting the separation of the
//! contrasts: stage one maximizes `h1` jointly over the drift and diffusion
//! parameters, stage two maximizes `h2` over the jump parameters with the
//! intensity profiled out in closed form at every evaluation. The built-in
//! families never share parameters between the drift and the jump density,
//! which is what makes the hard split exact; models with shared parameters
//! would need a joint pass instead.

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParameterBox};
use crate::optim::{maximize_in_box, SimplexOptions};
use crate::quad::{self, QuadOptions};
use crate::quasilik::{
    classify, h1, h2, profile_lambda, IncrementClassification, ThresholdRule, TruncationFunction,
};
use crate::simulate::Observations;

/// Optimizer budget and tolerance for one fit, plus the jump-weight choice.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Simplex evaluation budget per restart, per stage.
    pub max_evaluations: usize,
    /// Simplex diameter tolerance on the parameter scale.
    pub tolerance: f64,
    pub truncation: TruncationFunction,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_evaluations: 2000,
            tolerance: 1e-8,
            truncation: TruncationFunction::Identity,
        }
    }
}

/// A fitted candidate: parameter estimates, contrast values, selection score
/// and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub drift_params: Vec<f64>,
    pub diff_params: Vec<f64>,
    pub jump_params: Vec<f64>,
    pub lambda_hat: f64,
    pub h1_value: f64,
    pub h2_value: f64,
    pub h_total: f64,
    /// Stamped by the selection layer; `None` until then.
    pub pic: Option<f64>,
    pub converged: bool,
    pub n_evaluations: usize,
    pub n_detected_jumps: usize,
    /// No increment exceeded the threshold; `lambda_hat` sits at its lower
    /// bound by convention.
    pub no_jumps_detected: bool,
}

/// Pre-extracted continuous-increment data so the stage-one objective does
/// not re-walk the mask on every evaluation.
struct ContrastData {
    left_states: Vec<f64>,
    increments: Vec<f64>,
    h: f64,
}

impl ContrastData {
    fn build(obs: &Observations, cls: &IncrementClassification) -> Self {
        let mut left_states = Vec::new();
        let mut increments = Vec::new();
        for (k, keep) in cls.continuous_mask.iter().enumerate() {
            if *keep {
                left_states.push(obs.values[k]);
                increments.push(obs.values[k + 1] - obs.values[k]);
            }
        }
        ContrastData {
            left_states,
            increments,
            h: obs.h,
        }
    }

    /// Same sum as `quasilik::h1`, evaluated on the cached arrays. NaN marks
    /// an invalid parameter point (rejected by the optimizer).
    fn h1(&self, model: &ModelSpec, drift_params: &[f64], diff_params: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.left_states.len() {
            let x = self.left_states[i];
            let b = model.diffusion().eval(x, diff_params);
            if !(b > 0.0) || !b.is_finite() {
                return f64::NAN;
            }
            let s = b * b;
            let centered = self.increments[i] - self.h * model.drift().eval(x, drift_params);
            acc += -0.5 * (s.ln() + centered * centered / (self.h * s));
        }
        acc
    }
}

fn joined_box(a: &ParameterBox, b: &ParameterBox) -> ParameterBox {
    let mut lo = a.lower().to_vec();
    lo.extend_from_slice(b.lower());
    let mut hi = a.upper().to_vec();
    hi.extend_from_slice(b.upper());
    ParameterBox::new(lo, hi).unwrap()
}

/// Outcome of the continuous stage: drift and diffusion estimates with the
/// maximized `h1`.
#[derive(Debug, Clone)]
pub(crate) struct Stage1Fit {
    pub drift_params: Vec<f64>,
    pub diff_params: Vec<f64>,
    pub h1_value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Outcome of the jump stage: jump-density estimates, profiled intensity and
/// the maximized `h2`.
#[derive(Debug, Clone)]
pub(crate) struct Stage2Fit {
    pub jump_params: Vec<f64>,
    pub lambda_hat: f64,
    pub h2_value: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub no_jumps_detected: bool,
}

pub(crate) fn fit_stage1(
    model: &ModelSpec,
    obs: &Observations,
    cls: &IncrementClassification,
    opts: &FitOptions,
) -> Result<Stage1Fit> {
    let data = ContrastData::build(obs, cls);
    let simplex = SimplexOptions {
        max_evaluations: opts.max_evaluations,
        x_tolerance: opts.tolerance,
    };
    let p_drift = model.drift().param_dim();
    let stage1_box = joined_box(model.drift_box(), model.diffusion_box());
    let out = maximize_in_box(
        |q: &[f64]| data.h1(model, &q[..p_drift], &q[p_drift..]),
        &stage1_box,
        simplex,
    )?;
    Ok(Stage1Fit {
        drift_params: out.x[..p_drift].to_vec(),
        diff_params: out.x[p_drift..].to_vec(),
        h1_value: out.value,
        converged: out.converged,
        evaluations: out.evaluations,
    })
}

pub(crate) fn fit_stage2(
    model: &ModelSpec,
    obs: &Observations,
    cls: &IncrementClassification,
    opts: &FitOptions,
) -> Result<Stage2Fit> {
    let simplex = SimplexOptions {
        max_evaluations: opts.max_evaluations,
        x_tolerance: opts.tolerance,
    };
    let trunc = &opts.truncation;
    let out = maximize_in_box(
        |q: &[f64]| {
            let lam = match profile_lambda(obs, q, model, cls, trunc) {
                Ok(p) => p.value,
                Err(_) => return f64::NAN,
            };
            h2(obs, q, lam, model, cls, trunc).unwrap_or(f64::NAN)
        },
        model.jump_box(),
        simplex,
    )?;
    let profiled = profile_lambda(obs, &out.x, model, cls, trunc)?;
    let h2_value = h2(obs, &out.x, profiled.value, model, cls, trunc)?;
    Ok(Stage2Fit {
        jump_params: out.x,
        lambda_hat: profiled.value,
        h2_value,
        converged: out.converged,
        evaluations: out.evaluations,
        no_jumps_detected: profiled.no_jumps_detected,
    })
}

/// Two-stage quasi-maximum likelihood fit of one candidate model.
pub fn fit(
    model: &ModelSpec,
    obs: &Observations,
    rule: &ThresholdRule,
    opts: &FitOptions,
) -> Result<FitResult> {
    if obs.values.len() < 2 {
        return Err(Error::InvalidConfig("need at least two observations".into()));
    }
    let cls = classify(obs, rule);
    let stage1 = fit_stage1(model, obs, &cls, opts)?;
    let stage2 = fit_stage2(model, obs, &cls, opts)?;

    // Recompute the continuous contrast at the returned point through the
    // public path; the total is the exact sum of the parts.
    let h1_value = h1(obs, &stage1.drift_params, &stage1.diff_params, model, &cls)?;

    Ok(FitResult {
        drift_params: stage1.drift_params,
        diff_params: stage1.diff_params,
        jump_params: stage2.jump_params,
        lambda_hat: stage2.lambda_hat,
        h1_value,
        h2_value: stage2.h2_value,
        h_total: h1_value + stage2.h2_value,
        pic: None,
        converged: stage1.converged && stage2.converged,
        n_evaluations: stage1.evaluations + stage2.evaluations,
        n_detected_jumps: cls.n_detected_jumps(),
        no_jumps_detected: stage2.no_jumps_detected,
    })
}

/// Empirical estimate of the asymptotic information blocks at a fitted point.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationEstimate {
    /// Diffusion block, p_sigma x p_sigma.
    pub gamma_sigma: Vec<Vec<f64>>,
    /// Drift-plus-jump-plus-intensity block,
    /// (p_drift + p_jump + 1) squared, intensity last.
    pub gamma_theta_star: Vec<Vec<f64>>,
}

fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// Information blocks by ergodic averages along the path (diffusion and
/// drift terms) and adaptive quadrature (jump-score term). Derivatives are
/// central finite differences with a 1e-5 relative step.
pub fn information_matrix(
    model: &ModelSpec,
    obs: &Observations,
    fit: &FitResult,
    _rule: &ThresholdRule,
) -> Result<InformationEstimate> {
    if !fit.converged {
        return Err(Error::InvalidConfig(
            "information matrix requires a converged fit".into(),
        ));
    }
    let n = obs.n_increments();
    let p_sigma = model.diffusion().param_dim();
    let p_drift = model.drift().param_dim();
    let p_jump = model.jump().param_dim();

    // dS/dsigma_i via central differences of S = b^2 at each left state.
    let s_partial = |x: f64, i: usize| -> f64 {
        let mut plus = fit.diff_params.clone();
        let mut minus = fit.diff_params.clone();
        let eps = fd_step(plus[i]);
        plus[i] += eps;
        minus[i] -= eps;
        let bp = model.diffusion().eval(x, &plus);
        let bm = model.diffusion().eval(x, &minus);
        (bp * bp - bm * bm) / (2.0 * eps)
    };

    let mut gamma_sigma = vec![vec![0.0; p_sigma]; p_sigma];
    for k in 0..n {
        let x = obs.values[k];
        let b = model.diffusion().eval(x, &fit.diff_params);
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::NonPositiveDiffusion { index: k });
        }
        let s_inv = 1.0 / (b * b);
        for i in 0..p_sigma {
            let di = s_partial(x, i) * s_inv;
            for j in i..p_sigma {
                let dj = s_partial(x, j) * s_inv;
                gamma_sigma[i][j] += 0.5 * di * dj;
            }
        }
    }
    for i in 0..p_sigma {
        for j in i..p_sigma {
            gamma_sigma[i][j] /= n as f64;
            gamma_sigma[j][i] = gamma_sigma[i][j];
        }
    }

    // Drift part of the theta* block: (1/n) sum (da/dtheta)^T S^-1 (da/dtheta).
    let p_star = p_drift + p_jump + 1;
    let mut gamma_star = vec![vec![0.0; p_star]; p_star];
    let a_partial = |x: f64, i: usize| -> f64 {
        let mut plus = fit.drift_params.clone();
        let mut minus = fit.drift_params.clone();
        let eps = fd_step(plus[i]);
        plus[i] += eps;
        minus[i] -= eps;
        (model.drift().eval(x, &plus) - model.drift().eval(x, &minus)) / (2.0 * eps)
    };
    for k in 0..n {
        let x = obs.values[k];
        let b = model.diffusion().eval(x, &fit.diff_params);
        let s_inv = 1.0 / (b * b);
        for i in 0..p_drift {
            let di = a_partial(x, i);
            for j in i..p_drift {
                gamma_star[i][j] += di * s_inv * a_partial(x, j);
            }
        }
    }
    for i in 0..p_drift {
        for j in i..p_drift {
            gamma_star[i][j] /= n as f64;
        }
    }

    // Jump-score part: integral of (df/dt_i)(df/dt_j) / f with f = lambda F,
    // over the jump and intensity directions.
    let lam = fit.lambda_hat;
    let f_partial = |z: f64, idx: usize| -> f64 {
        if idx == p_jump {
            // d(lambda F)/dlambda = F
            return model.jump().density(z, &fit.jump_params);
        }
        let mut plus = fit.jump_params.clone();
        let mut minus = fit.jump_params.clone();
        let eps = fd_step(plus[idx]);
        plus[idx] += eps;
        minus[idx] -= eps;
        lam * (model.jump().density(z, &plus) - model.jump().density(z, &minus)) / (2.0 * eps)
    };
    let radius = model.jump().support_radius(&fit.jump_params, -45.0);
    let center = fit.jump_params[0];
    let breaks: Vec<f64> = model.jump().kink(&fit.jump_params).into_iter().collect();
    // Cross terms of the score integral vanish by symmetry; an absolute
    // floor keeps the subdivision from chasing a zero to relative accuracy.
    let quad_opts = QuadOptions {
        rel_tol: 1e-9,
        abs_tol: 1e-12,
        ..QuadOptions::default()
    };
    for i in 0..=p_jump {
        for j in i..=p_jump {
            let integrand = |z: f64| {
                let f = lam * model.jump().density(z, &fit.jump_params);
                if f <= 1e-300 {
                    return 0.0;
                }
                f_partial(z, i) * f_partial(z, j) / f
            };
            let v = quad::integrate_split(
                &integrand,
                center - radius,
                center + radius,
                &breaks,
                quad_opts,
            )?;
            gamma_star[p_drift + i][p_drift + j] += v;
        }
    }
    for i in 0..p_star {
        for j in i..p_star {
            gamma_star[j][i] = gamma_star[i][j];
        }
    }

    Ok(InformationEstimate {
        gamma_sigma,
        gamma_theta_star: gamma_star,
    })
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
/// Used by diagnostics and tests on the information blocks.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _ in 0..100 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(a[i][j].abs());
            }
        }
        if off < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig
}
