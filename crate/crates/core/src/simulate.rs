//! Sample-path generation: Euler–Maruyama on a fine grid with exact
//! compound-Poisson jump placement.
//!
//! Jump times are drawn up front as order statistics of uniforms on the full
//! horizon, the fine grid is refined so every jump time is a grid node, and
//! the sampled mark is added at its exact time. A burn-in stretch is
//! simulated first and discarded so the observation window starts close to
//! the stationary regime.
//!
//! Everything is deterministic given the seed; the generator is ChaCha8
//! (counter-based), so identical inputs reproduce identical paths on any
//! platform. Replication r of a batch uses seed + r.

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

/// Grid and seeding configuration for one simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    pub n_obs: usize,
    pub h: f64,
    pub substeps: usize,
    pub burn_in_time: f64,
    pub seed: u64,
}

impl PathConfig {
    pub fn new(n_obs: usize, h: f64, seed: u64) -> Result<Self> {
        let cfg = PathConfig {
            n_obs,
            h,
            substeps: 16,
            burn_in_time: 50.0,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn with_burn_in(mut self, burn_in_time: f64) -> Self {
        self.burn_in_time = burn_in_time;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_obs == 0 || self.substeps == 0 {
            return Err(Error::InvalidConfig(
                "n_obs and substeps must be positive".into(),
            ));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid step h = {}", self.h)));
        }
        if !(self.burn_in_time >= 0.0 && self.burn_in_time.is_finite()) {
            return Err(Error::InvalidConfig("invalid burn-in time".into()));
        }
        Ok(())
    }

    /// Observation horizon T = n_obs * h.
    pub fn horizon(&self) -> f64 {
        self.n_obs as f64 * self.h
    }
}

/// An equally spaced sample {X_{kh}}, k = 0..n_obs.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub h: f64,
    pub values: Vec<f64>,
    pub seed_used: u64,
}

impl Observations {
    /// Number of increments n.
    pub fn n_increments(&self) -> usize {
        self.values.len() - 1
    }

    /// CSV dump with header `t,x`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{:.16e},{:.16e}\n", k as f64 * self.h, v));
        }
        out
    }

    /// Parse the `t,x` CSV format produced by `to_csv`.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if i == 0 {
                if line != "t,x" {
                    return Err(Error::CsvParse(format!("expected header 't,x', got '{line}'")));
                }
                continue;
            }
            let mut parts = line.split(',');
            let (t, x) = match (parts.next(), parts.next(), parts.next()) {
                (Some(t), Some(x), None) => (t, x),
                _ => return Err(Error::CsvParse(format!("line {}: expected 2 fields", i + 1))),
            };
            let t: f64 = t
                .parse()
                .map_err(|_| Error::CsvParse(format!("line {}: bad time '{t}'", i + 1)))?;
            let x: f64 = x
                .parse()
                .map_err(|_| Error::CsvParse(format!("line {}: bad value '{x}'", i + 1)))?;
            times.push(t);
            values.push(x);
        }
        if values.len() < 2 {
            return Err(Error::CsvParse("need at least 2 rows".into()));
        }
        let h = times[1] - times[0];
        if !(h > 0.0) {
            return Err(Error::CsvParse("times must be strictly increasing".into()));
        }
        for (k, t) in times.iter().enumerate() {
            if (t - k as f64 * h).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::CsvParse(format!(
                    "non-uniform time grid at row {k}: {t} vs {}",
                    k as f64 * h
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::CsvParse("non-finite value".into()));
        }
        Ok(Observations {
            h,
            values,
            seed_used: 0,
        })
    }
}

/// A simulated path together with the jump record of its observation window,
/// kept so tests can compare detected against actual jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPath {
    pub observations: Observations,
    /// Jump times inside the observation window, relative to its start.
    pub jump_times: Vec<f64>,
    /// Marks matching `jump_times`.
    pub jump_marks: Vec<f64>,
}

#[inline]
pub(crate) fn euler_step(
    model: &ModelSpec,
    params: &ParamSet,
    x: f64,
    dt: f64,
    dw: f64,
) -> Result<f64> {
    let a = model.drift().eval(x, &params.drift);
    let b = model.diffusion().eval(x, &params.diffusion);
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::NonPositiveDiffusion { index: 0 });
    }
    Ok(x + a * dt + b * dw)
}

/// Integrate the continuous part over a fixed grid given Brownian increments.
/// Used by the refinement-coupling convergence check.
#[cfg(test)]
pub(crate) fn euler_drive(
    model: &ModelSpec,
    params: &ParamSet,
    x0: f64,
    dt: f64,
    dws: &[f64],
) -> Result<f64> {
    let mut x = x0;
    for dw in dws {
        x = euler_step(model, params, x, dt, *dw)?;
    }
    Ok(x)
}

/// Generate one path of the jump diffusion and subsample it to the
/// observation grid. See the module docs for the scheme.
pub fn simulate_path(
    model: &ModelSpec,
    params: &ParamSet,
    lambda: f64,
    cfg: &PathConfig,
) -> Result<SimulatedPath> {
    cfg.validate()?;
    if !model.drift_box().contains(&params.drift)
        || !model.diffusion_box().contains(&params.diffusion)
        || !model.jump_box().contains(&params.jump)
    {
        return Err(Error::InvalidParameter(
            "true parameters outside the model boxes".into(),
        ));
    }
    // lambda = 0 is allowed as the degenerate jump-free simulation.
    let (lam_lo, lam_hi) = model.lambda_bounds();
    if lambda != 0.0 && !(lambda >= lam_lo && lambda <= lam_hi) {
        return Err(Error::InvalidParameter(format!(
            "lambda {lambda} outside bounds [{lam_lo}, {lam_hi}]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // Burn-in rounded up to whole observation intervals so the window starts
    // on a grid node.
    let burn_steps = (cfg.burn_in_time / cfg.h).ceil() as usize;
    let burn = burn_steps as f64 * cfg.h;
    let total = cfg.horizon() + burn;

    let n_jumps = if lambda == 0.0 {
        0
    } else {
        Poisson::new(lambda * total)
            .map_err(|e| Error::InvalidParameter(format!("poisson: {e}")))?
            .sample(&mut rng) as usize
    };
    let mut jump_times: Vec<f64> = (0..n_jumps)
        .map(|_| rng.random_range(0.0..total))
        .collect();
    jump_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let marks: Vec<f64> = (0..n_jumps)
        .map(|_| model.jump().sample(&params.jump, &mut rng))
        .collect();

    let n_base = (cfg.n_obs + burn_steps) * cfg.substeps;
    let dt_base = cfg.h / cfg.substeps as f64;
    let mut x = 0.0f64;
    let mut values = Vec::with_capacity(cfg.n_obs + 1);
    let mut window_times = Vec::new();
    let mut window_marks = Vec::new();
    let mut ji = 0usize;

    for step in 0..n_base {
        let t0 = step as f64 * dt_base;
        let t1 = t0 + dt_base;
        if step % cfg.substeps == 0 && step >= burn_steps * cfg.substeps {
            values.push(x);
        }
        let mut t_cur = t0;
        while ji < jump_times.len() && jump_times[ji] <= t1 {
            let tj = jump_times[ji];
            let dt = tj - t_cur;
            if dt > 0.0 {
                let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
                x = euler_step(model, params, x, dt, dw)
                    .map_err(|_| Error::NonPositiveDiffusion { index: step })?;
            }
            x += marks[ji];
            if tj >= burn {
                window_times.push(tj - burn);
                window_marks.push(marks[ji]);
            }
            t_cur = tj;
            ji += 1;
        }
        let dt = t1 - t_cur;
        if dt > 0.0 {
            let dw = dt.sqrt() * rng.sample::<f64, _>(StandardNormal);
            x = euler_step(model, params, x, dt, dw)
                .map_err(|_| Error::NonPositiveDiffusion { index: step })?;
        }
        if !x.is_finite() {
            return Err(Error::NonFiniteState { step });
        }
    }
    values.push(x);
    debug_assert_eq!(values.len(), cfg.n_obs + 1);

    Ok(SimulatedPath {
        observations: Observations {
            h: cfg.h,
            values,
            seed_used: cfg.seed,
        },
        jump_times: window_times,
        jump_marks: window_marks,
    })
}

/// Independent replications; replication r (1-based) uses `cfg.seed + r`.
/// Executed in parallel, returned in replication order.
pub fn simulate_replications(
    model: &ModelSpec,
    params: &ParamSet,
    lambda: f64,
    cfg: &PathConfig,
    n_rep: usize,
) -> Result<Vec<SimulatedPath>> {
    if n_rep == 0 {
        return Err(Error::InvalidConfig("n_rep must be >= 1".into()));
    }
    (1..=n_rep)
        .into_par_iter()
        .map(|r| {
            let mut c = cfg.clone();
            c.seed = cfg.seed.wrapping_add(r as u64);
            simulate_path(model, params, lambda, &c).map_err(|e| Error::Replication {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}
