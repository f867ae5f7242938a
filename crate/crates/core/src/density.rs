//! Desk-scale numerical verification of the jump-order expansion of the
//! transition density in the one-dimensional constant-coefficient case.
//!
//! With constant drift and diffusion the continuous part has an exactly
//! Gaussian transition kernel, so the k-jump term of the small-time
//! expansion collapses to
//!
//! ```text
//! q_h^(k)(x, y) = lambda^k h^k / k! * (G_{b^2 h} * F^(*k))(y - x - a h),
//! ```
//!
//! with `G_v` the centered Gaussian density of variance v and `F^(*k)` the
//! k-fold self-convolution of the jump density. This module computes these
//! terms by nested adaptive quadrature and certifies the geometric-in-h
//! envelope `(C h)^k exp(-u zeta |y - x|)` on a grid, together with the
//! Gaussian–Laplace convolution inequality the envelope rests on.

use crate::error::{Error, Result};
use crate::model::JumpDensityFamily;
use crate::quad::{self, QuadOptions};
use rayon::prelude::*;

/// Scalar jump diffusion with constant coefficients, used only for the
/// density verification.
#[derive(Debug, Clone)]
pub struct ConstCoeffModel {
    pub drift_const: f64,
    pub diff_const: f64,
    pub lambda: f64,
    pub jump: JumpDensityFamily,
    pub jump_params: Vec<f64>,
}

impl ConstCoeffModel {
    pub fn new(
        diff_const: f64,
        lambda: f64,
        jump: JumpDensityFamily,
        jump_params: Vec<f64>,
    ) -> Result<Self> {
        if !(diff_const > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "diffusion constant must be positive, got {diff_const}"
            )));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        Ok(ConstCoeffModel {
            drift_const: 0.0,
            diff_const,
            lambda,
            jump,
            jump_params,
        })
    }
}

#[inline]
fn gaussian_density(u: f64, variance: f64) -> f64 {
    (-0.5 * u * u / variance).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
}

/// Gaussian effective support radius for a tail below e^-45.
fn gauss_radius(variance: f64) -> f64 {
    (2.0 * 45.0 * variance).sqrt()
}

/// (G_{b^2 h} * F^(*k))(u) by nested adaptive quadrature.
fn smoothed_self_convolution(m: &ConstCoeffModel, h: f64, k: u32, u: f64) -> Result<f64> {
    let var = m.diff_const * m.diff_const * h;
    let rg = gauss_radius(var);
    let rf = m.jump.support_radius(&m.jump_params, -45.0);
    let loc = m.jump_params[0];
    let kink = m.jump.kink(&m.jump_params);

    // innermost: F itself
    let f1 = |z: f64| m.jump.density(z, &m.jump_params);

    // F*F with a kink-aware inner integral
    let f2 = |s: f64| -> f64 {
        let lo = (loc - rf).max(s - loc - rf);
        let hi = (loc + rf).min(s - loc + rf);
        if lo >= hi {
            return 0.0;
        }
        let mut breaks = Vec::new();
        if let Some(z0) = kink {
            breaks.push(z0);
            breaks.push(s - z0);
        }
        quad::integrate_split(
            &|v: f64| f1(v) * f1(s - v),
            lo,
            hi,
            &breaks,
            QuadOptions {
                rel_tol: 1e-9,
                ..QuadOptions::default()
            },
        )
        .unwrap_or(f64::NAN)
    };

    // F*F*F, coarser tolerance: only the composite envelope uses it
    let f3 = |s: f64| -> f64 {
        let lo = 2.0 * loc - 2.0 * rf;
        let hi = 2.0 * loc + 2.0 * rf;
        let lo = lo.max(s - loc - rf);
        let hi = hi.min(s - loc + rf);
        if lo >= hi {
            return 0.0;
        }
        let mut breaks = Vec::new();
        if let Some(z0) = kink {
            breaks.push(s - z0);
        }
        quad::integrate_split(
            &|v: f64| f2(v) * f1(s - v),
            lo,
            hi,
            &breaks,
            QuadOptions {
                rel_tol: 1e-5,
                abs_tol: 1e-12,
                max_subdivisions: 400,
            },
        )
        .unwrap_or(f64::NAN)
    };

    let (fk, spread): (Box<dyn Fn(f64) -> f64>, f64) = match k {
        1 => (Box::new(f1), rf),
        2 => (Box::new(f2), 2.0 * rf),
        3 => (Box::new(f3), 3.0 * rf),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "jump order must be 1, 2 or 3, got {k}"
            )))
        }
    };
    let center = k as f64 * loc;
    let lo = (center - spread).max(u - rg);
    let hi = (center + spread).min(u + rg);
    if lo >= hi {
        return Ok(0.0);
    }
    let mut breaks = Vec::new();
    if k == 1 {
        if let Some(z0) = kink {
            breaks.push(z0);
        }
    }
    let outer_tol = if k <= 2 { 1e-8 } else { 1e-5 };
    let v = quad::integrate_split(
        &|s: f64| fk(s) * gaussian_density(u - s, var),
        lo,
        hi,
        &breaks,
        QuadOptions {
            rel_tol: outer_tol,
            ..QuadOptions::default()
        },
    )?;
    if !v.is_finite() {
        return Err(Error::Quadrature("nested convolution returned NaN".into()));
    }
    Ok(v.max(0.0))
}

/// The one-jump term of the expansion at time step h.
pub fn q1_density(m: &ConstCoeffModel, h: f64, x: f64, y: f64) -> Result<f64> {
    qk_density(m, h, 1, x, y)
}

/// The k-jump term, k in {1, 2, 3}.
pub fn qk_density(m: &ConstCoeffModel, h: f64, k: u32, x: f64, y: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive, got {h}"
        )));
    }
    let u = y - x - m.drift_const * h;
    let conv = smoothed_self_convolution(m, h, k, u)?;
    let mut factorial = 1.0;
    for i in 2..=k {
        factorial *= i as f64;
    }
    Ok(m.lambda.powi(k as i32) * h.powi(k as i32) / factorial * conv)
}

/// Result of sweeping the envelope constant over a grid and a set of step
/// sizes.
#[derive(Debug, Clone)]
pub struct BoundCertificate {
    pub k: u32,
    pub h_values: Vec<f64>,
    /// max over the grid and h of (q_k e^{u zeta |y-x|})^{1/k} / h.
    pub empirical_c: f64,
    /// Per-h envelope constants, aligned with `h_values`.
    pub per_h_c: Vec<f64>,
    /// max over grid and h of q_k - (empirical_c h)^k e^{-u zeta |y-x|};
    /// non-positive means the fitted envelope held everywhere.
    pub max_violation: f64,
    pub grid_spec: String,
}

impl BoundCertificate {
    /// Ratio of the largest to the smallest per-h constant.
    pub fn stability_ratio(&self) -> f64 {
        let max = self.per_h_c.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.per_h_c.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// The certificate passes when the constant is finite, stable across h
    /// (max/min below 1.5) and the envelope holds on the grid.
    pub fn passes(&self) -> bool {
        self.empirical_c.is_finite()
            && self.per_h_c.iter().all(|c| c.is_finite() && *c > 0.0)
            && self.stability_ratio() < 1.5
            && self.max_violation <= 1e-12
    }

    /// CSV dump, one row per step size: `k,h,empirical_C,max_violation`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,h,empirical_C,max_violation\n");
        for (h, c) in self.h_values.iter().zip(&self.per_h_c) {
            out.push_str(&format!(
                "{},{},{:.10e},{:.10e}\n",
                self.k, h, c, self.max_violation
            ));
        }
        out
    }
}

/// Check F(z) <= C e^{-u|z|} on a coarse grid: the bound fails when the
/// rescaled density keeps growing toward the grid edge.
fn check_tail_bound(jump: &JumpDensityFamily, params: &[f64], u: f64) -> Result<()> {
    let mut inner_max = f64::MIN;
    let mut outer_max = f64::MIN;
    let mut outer_arg = 0.0;
    let mut z = -50.0;
    while z <= 50.0 {
        let c = jump.log_density(z, params) + u * z.abs();
        if z.abs() <= 45.0 {
            inner_max = inner_max.max(c);
        } else if c > outer_max {
            outer_max = c;
            outer_arg = z;
        }
        z += 0.25;
    }
    if outer_max > inner_max + 1e-9 {
        return Err(Error::TailBound { z: outer_arg });
    }
    Ok(())
}

/// Sweep the k-jump term over a (y - x) grid for each h and extract the
/// envelope constant of `(C h)^k exp(-u zeta |y - x|)`.
pub fn certify_ktesti_bound(
    m: &ConstCoeffModel,
    k: u32,
    h_values: &[f64],
    u: f64,
    zeta: f64,
) -> Result<BoundCertificate> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "zeta must lie in (0, 1), got {zeta}"
        )));
    }
    if !(u > 0.0) {
        return Err(Error::InvalidParameter("u must be positive".into()));
    }
    if h_values.is_empty() || h_values.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidParameter(
            "need a non-empty list of positive step sizes".into(),
        ));
    }
    check_tail_bound(&m.jump, &m.jump_params, u)?;

    let n_grid = 201;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| -10.0 + 20.0 * i as f64 / (n_grid - 1) as f64)
        .collect();
    let mut per_h_c = Vec::with_capacity(h_values.len());
    let mut values = Vec::with_capacity(h_values.len());
    for &h in h_values {
        // grid points are independent; sweep them in parallel
        let row: Result<Vec<f64>> = grid
            .par_iter()
            .map(|&d| qk_density(m, h, k, 0.0, d))
            .collect();
        let row = row?;
        let mut c_h = 0.0f64;
        for (&d, &q) in grid.iter().zip(&row) {
            if q > 0.0 {
                let c = (q * (u * zeta * d.abs()).exp()).powf(1.0 / k as f64) / h;
                c_h = c_h.max(c);
            }
        }
        per_h_c.push(c_h);
        values.push(row);
    }
    let empirical_c = per_h_c.iter().cloned().fold(f64::MIN, f64::max);
    let mut max_violation = f64::MIN;
    for (hi, &h) in h_values.iter().enumerate() {
        for (gi, &d) in grid.iter().enumerate() {
            let envelope = (empirical_c * h).powi(k as i32) * (-u * zeta * d.abs()).exp();
            max_violation = max_violation.max(values[hi][gi] - envelope);
        }
    }
    Ok(BoundCertificate {
        k,
        h_values: h_values.to_vec(),
        empirical_c,
        per_h_c,
        max_violation,
        grid_spec: format!("x = 0, y - x in [-10, 10], {n_grid} points"),
    })
}

/// Result of sweeping the Gaussian–Laplace convolution inequality.
#[derive(Debug, Clone)]
pub struct ConvolutionLemmaReport {
    /// max over (a, z) of the convolution against exp(-u|z|).
    pub max_ratio: f64,
    /// Per-a maxima over the z grid, aligned with the input order.
    pub per_a_max: Vec<(f64, f64)>,
}

/// For each width a, integrate a^{-1/2} e^{-u|x|} e^{-(x-z)^2 / a} over x and
/// compare against e^{-u|z|} across the z grid.
pub fn convolution_lemma_check(
    a_values: &[f64],
    u: f64,
    z_grid: &[f64],
) -> Result<ConvolutionLemmaReport> {
    if a_values.is_empty() || a_values.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidParameter(
            "need positive Gaussian widths".into(),
        ));
    }
    if !(u > 0.0) {
        return Err(Error::InvalidParameter("u must be positive".into()));
    }
    let mut per_a_max = Vec::with_capacity(a_values.len());
    let mut max_ratio = f64::MIN;
    for &a in a_values {
        let ratios: Result<Vec<f64>> = z_grid
            .par_iter()
            .map(|&z| {
                // effective support: Gaussian factor within sqrt(45 a) of z,
                // exponential factor within 45 / u of 0
                let rg = (45.0f64 * a).sqrt();
                let lo = (z - rg).max(-45.0 / u - 1.0);
                let hi = (z + rg).min(45.0 / u + 1.0);
                let lhs = if lo < hi {
                    quad::integrate_split(
                        &|x: f64| {
                            (-u * x.abs()).exp() * (-(x - z) * (x - z) / a).exp() / a.sqrt()
                        },
                        lo,
                        hi,
                        &[0.0],
                        QuadOptions::default(),
                    )?
                } else {
                    0.0
                };
                Ok(lhs * (u * z.abs()).exp())
            })
            .collect();
        let worst = ratios?.into_iter().fold(f64::MIN, f64::max);
        per_a_max.push((a, worst));
        max_ratio = max_ratio.max(worst);
    }
    Ok(ConvolutionLemmaReport {
        max_ratio,
        per_a_max,
    })
}
