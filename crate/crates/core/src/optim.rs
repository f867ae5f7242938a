//! Derivative-free simplex maximization over a box.
//!
//! The box is handled by a coordinatewise logit reparameterization, so the
//! simplex moves in an unconstrained space while every trial point maps back
//! strictly inside the bounds. Restarts run from five deterministic points:
//! the box center and four scaled corner patterns. Convergence is declared
//! when the simplex diameter, measured in the original coordinates, falls
//! below the tolerance (a flat objective counts as converged once the value
//! spread collapses).

use crate::error::{Error, Result};
use crate::model::ParameterBox;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexOptions {
    /// Evaluation budget per restart.
    pub max_evaluations: usize,
    /// Diameter tolerance on the parameter scale.
    pub x_tolerance: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            max_evaluations: 2000,
            x_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[inline]
fn to_free(x: f64, lo: f64, hi: f64) -> f64 {
    let t = ((x - lo) / (hi - x)).max(1e-14);
    t.ln()
}

#[inline]
fn to_box(y: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) / (1.0 + (-y).exp())
}

/// The five deterministic restart points: center plus four corner patterns
/// pulled halfway toward the center.
fn restart_points(bx: &ParameterBox) -> Vec<Vec<f64>> {
    let n = bx.dim();
    let mid = bx.center();
    let half: Vec<f64> = (0..n)
        .map(|i| 0.5 * (bx.upper()[i] - bx.lower()[i]))
        .collect();
    let patterns: [fn(usize) -> f64; 4] = [
        |_| 1.0,
        |_| -1.0,
        |i| if i % 2 == 0 { 1.0 } else { -1.0 },
        |i| if i % 2 == 0 { -1.0 } else { 1.0 },
    ];
    let mut starts = vec![mid.clone()];
    for pat in patterns {
        starts.push((0..n).map(|i| mid[i] + 0.5 * pat(i) * half[i]).collect());
    }
    starts
}

struct Simplex {
    points: Vec<(Vec<f64>, f64)>, // free coordinates, value of -f
}

/// One Nelder–Mead run from `start` (box coordinates). Returns the best
/// point, objective value, evaluation count and convergence flag.
fn run_simplex<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    bx: &ParameterBox,
    start: &[f64],
    opts: SimplexOptions,
) -> SimplexOutcome {
    let n = bx.dim();
    let lo = bx.lower();
    let hi = bx.upper();
    let mut evals = 0usize;
    let eval_free = |y: &[f64], f: &mut F, evals: &mut usize| -> f64 {
        let x: Vec<f64> = (0..n).map(|i| to_box(y[i], lo[i], hi[i])).collect();
        *evals += 1;
        let v = f(&x);
        // Non-finite objective values are rejected, not propagated.
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let y0: Vec<f64> = (0..n).map(|i| to_free(start[i], lo[i], hi[i])).collect();
    let mut sx = Simplex { points: Vec::with_capacity(n + 1) };
    let v0 = eval_free(&y0, f, &mut evals);
    sx.points.push((y0.clone(), v0));
    for i in 0..n {
        let mut y = y0.clone();
        y[i] += 0.5;
        let v = eval_free(&y, f, &mut evals);
        sx.points.push((y, v));
    }

    let (alpha, gamma, beta, shrink) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < opts.max_evaluations {
        sx.points
            .sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let diameter = {
            let best: Vec<f64> = (0..n).map(|i| to_box(sx.points[0].0[i], lo[i], hi[i])).collect();
            sx.points
                .iter()
                .map(|(y, _)| {
                    (0..n)
                        .map(|i| (to_box(y[i], lo[i], hi[i]) - best[i]).abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max)
        };
        let spread = sx.points[n].1 - sx.points[0].1;
        if diameter < opts.x_tolerance || (spread.is_finite() && spread.abs() < 1e-12) {
            converged = sx.points[0].1.is_finite();
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|i| sx.points[..n].iter().map(|(y, _)| y[i]).sum::<f64>() / n as f64)
            .collect();
        let reflect: Vec<f64> = (0..n)
            .map(|i| centroid[i] + alpha * (centroid[i] - sx.points[n].0[i]))
            .collect();
        let vr = eval_free(&reflect, f, &mut evals);
        if vr < sx.points[0].1 {
            let expand: Vec<f64> = (0..n)
                .map(|i| centroid[i] + gamma * (reflect[i] - centroid[i]))
                .collect();
            let ve = eval_free(&expand, f, &mut evals);
            sx.points[n] = if ve < vr { (expand, ve) } else { (reflect, vr) };
        } else if vr < sx.points[n - 1].1 {
            sx.points[n] = (reflect, vr);
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|i| centroid[i] + beta * (sx.points[n].0[i] - centroid[i]))
                .collect();
            let vc = eval_free(&contract, f, &mut evals);
            if vc < sx.points[n].1 {
                sx.points[n] = (contract, vc);
            } else {
                for k in 1..=n {
                    let y: Vec<f64> = (0..n)
                        .map(|i| sx.points[0].0[i] + shrink * (sx.points[k].0[i] - sx.points[0].0[i]))
                        .collect();
                    let v = eval_free(&y, f, &mut evals);
                    sx.points[k] = (y, v);
                }
            }
        }
    }
    sx.points
        .sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let best: Vec<f64> = (0..n).map(|i| to_box(sx.points[0].0[i], lo[i], hi[i])).collect();
    SimplexOutcome {
        x: best,
        value: -sx.points[0].1,
        evaluations: evals,
        converged,
    }
}

/// Maximize `f` over the box with the deterministic restart scheme. Errors
/// only when every restart failed to see a finite objective value.
pub(crate) fn maximize_in_box<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    bx: &ParameterBox,
    opts: SimplexOptions,
) -> Result<SimplexOutcome> {
    let mut best: Option<SimplexOutcome> = None;
    let mut total_evals = 0usize;
    for start in restart_points(bx) {
        let mut out = run_simplex(&mut f, bx, &start, opts);
        total_evals += out.evaluations;
        out.evaluations = total_evals;
        let better = match &best {
            None => true,
            Some(b) => out.value.is_finite() && out.value > b.value,
        };
        if better {
            best = Some(out);
        } else if let Some(b) = best.as_mut() {
            b.evaluations = total_evals;
        }
    }
    let best = best.unwrap();
    if !best.value.is_finite() {
        return Err(Error::NoFiniteObjective);
    }
    Ok(best)
}
