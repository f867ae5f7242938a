//! The predictive information criterion, candidate selection, and the
//! chi-square tail governing the asymptotic overfit probability of nested
//! comparisons.
//!
//! PIC = -2 H + 2 dim(alpha), with H the total fitted contrast and
//! dim(alpha) the coefficient-parameter dimension. The intensity contributes
//! one parameter to every candidate alike, so it cancels from comparisons
//! and is left out of the penalty.

use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions, FitResult};
use crate::model::ModelSpec;
use crate::quasilik::ThresholdRule;
use crate::simulate::Observations;
use crate::special::reg_gamma_q;
use rayon::prelude::*;

/// PIC of a fitted candidate.
pub fn pic_value(fit: &FitResult, model: &ModelSpec) -> f64 {
    -2.0 * fit.h_total + 2.0 * model.alpha_dim() as f64
}

/// Compute and store the PIC on a fit.
pub fn stamp_pic(fit: &mut FitResult, model: &ModelSpec) {
    fit.pic = Some(pic_value(fit, model));
}

/// Result of selecting among candidates by smallest PIC.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub chosen_index: usize,
    /// PIC per candidate; NaN marks a candidate whose fit failed.
    pub pic_values: Vec<f64>,
    pub ties_broken: bool,
    /// Fits of the surviving candidates, index-aligned with the input.
    pub fits: Vec<Option<FitResult>>,
    /// (candidate index, diagnostic) for every fit failure.
    pub failures: Vec<(usize, String)>,
}

/// Fit every candidate and return the PIC minimizer. Ties go to the smaller
/// parameter dimension, then the smaller index. Individual fit failures are
/// recorded and the candidate excluded; only a full wipeout is an error.
pub fn select(
    candidates: &[ModelSpec],
    obs: &Observations,
    rule: &ThresholdRule,
    opts: &FitOptions,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidates supplied".into()));
    }
    let fitted: Vec<std::result::Result<FitResult, String>> = candidates
        .par_iter()
        .map(|m| {
            fit(m, obs, rule, opts)
                .map(|mut f| {
                    stamp_pic(&mut f, m);
                    f
                })
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut pic_values = vec![f64::NAN; candidates.len()];
    let mut fits: Vec<Option<FitResult>> = vec![None; candidates.len()];
    let mut failures = Vec::new();
    for (i, r) in fitted.into_iter().enumerate() {
        match r {
            Ok(f) => {
                pic_values[i] = f.pic.unwrap();
                fits[i] = Some(f);
            }
            Err(msg) => failures.push((i, msg)),
        }
    }
    if fits.iter().all(|f| f.is_none()) {
        return Err(Error::AllCandidatesFailed(
            failures
                .iter()
                .map(|(i, m)| format!("#{i}: {m}"))
                .collect::<Vec<_>>()
                .join("; "),
        ));
    }

    let mut chosen = usize::MAX;
    let mut ties_broken = false;
    for i in 0..candidates.len() {
        if fits[i].is_none() {
            continue;
        }
        if chosen == usize::MAX {
            chosen = i;
            continue;
        }
        let (pi, pc) = (pic_values[i], pic_values[chosen]);
        if pi < pc {
            chosen = i;
        } else if pi == pc {
            ties_broken = true;
            let (di, dc) = (candidates[i].alpha_dim(), candidates[chosen].alpha_dim());
            if di < dc {
                chosen = i;
            }
            // equal dimension keeps the smaller index
        }
    }

    Ok(SelectionOutcome {
        chosen_index: chosen,
        pic_values,
        ties_broken,
        fits,
        failures,
    })
}

/// Upper tail P(chi2(dof) > x) through the regularized incomplete gamma.
pub fn chi2_tail(dof: u32, x: f64) -> f64 {
    assert!(dof >= 1, "dof must be at least 1");
    assert!(x >= 0.0, "x must be non-negative");
    reg_gamma_q(dof as f64 / 2.0, x / 2.0)
}

/// Asymptotic probability that the criterion prefers a redundant bigger
/// model over a nested true one with `p_big - p_small` extra parameters:
/// P(chi2(d) > 2 d).
pub fn overfit_probability(p_big: usize, p_small: usize) -> f64 {
    assert!(p_big > p_small, "bigger model must have more parameters");
    let d = (p_big - p_small) as u32;
    chi2_tail(d, 2.0 * d as f64)
}
