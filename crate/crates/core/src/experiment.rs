//! Monte Carlo selection experiment: replicate the data-generating model,
//! fit every candidate combination, select by PIC, and tabulate the counts.
//!
//! The drift/diffusion grid and the jump families are scored separately,
//! mirroring how the two reports are normalized: drift and diffusion through
//! the continuous contrast with penalty 2 (p_drift + p_diffusion), jump
//! families through the jump contrast with penalty 2 p_jump. A joint
//! full-criterion selection over all twelve combinations can be requested on
//! top.

use crate::error::{Error, Result};
use crate::estimate::{fit_stage1, fit_stage2, FitOptions};
use crate::model::{builtin_true_model, FamilyId, JumpFamilyId, ModelSpec};
use crate::model::{
    default_diffusion_box, default_drift_box, default_jump_box, CoefficientFamily,
    JumpDensityFamily, DEFAULT_LAMBDA_BOUNDS,
};
use crate::quasilik::{classify, ThresholdRule};
use crate::simulate::{simulate_path, PathConfig};
use rayon::prelude::*;

/// Scenario grid, replication count and seeding for one experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// (T, h) pairs; T / h must be a whole number of increments.
    pub scenarios: Vec<(f64, f64)>,
    pub n_rep: usize,
    pub rho: f64,
    pub seed: u64,
    /// Candidate catalogue identifier; only "section3" is built in.
    pub candidate_set: String,
    pub output_path: Option<String>,
    /// Also tabulate the joint selection over all twelve combinations.
    pub joint: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenarios: vec![(30.0, 0.05), (50.0, 0.025), (100.0, 0.01)],
            n_rep: 1000,
            rho: 0.4,
            seed: 1,
            candidate_set: "section3".into(),
            output_path: None,
            joint: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("no scenarios".into()));
        }
        for &(t, h) in &self.scenarios {
            if !(t > 0.0 && h > 0.0) {
                return Err(Error::InvalidConfig(format!("bad scenario ({t}, {h})")));
            }
            let n = t / h;
            if (n - n.round()).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "T / h must be integral, got {t} / {h} = {n}"
                )));
            }
        }
        if self.n_rep == 0 {
            return Err(Error::InvalidConfig("n_rep must be >= 1".into()));
        }
        ThresholdRule::new(self.rho)?;
        if self.candidate_set != "section3" {
            return Err(Error::InvalidConfig(format!(
                "unknown candidate set '{}'",
                self.candidate_set
            )));
        }
        Ok(())
    }

    /// Overlay keys from the flat `key = value` config format. Recognized
    /// keys: scenarios, n_rep, rho, seed, candidates, output. A scenario list
    /// is written `T:h` pairs separated by commas, e.g.
    /// `scenarios = 30:0.05,50:0.025,100:0.01`.
    pub fn apply_config_text(&mut self, text: &str) -> Result<()> {
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", line_no + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "scenarios" => self.scenarios = parse_scenarios(value)?,
                "n_rep" => {
                    self.n_rep = value.parse().map_err(|_| {
                        Error::InvalidConfig(format!("bad n_rep '{value}'"))
                    })?
                }
                "rho" => {
                    self.rho = value
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad rho '{value}'")))?
                }
                "seed" => {
                    self.seed = value
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad seed '{value}'")))?
                }
                "candidates" => self.candidate_set = value.to_string(),
                "output" => self.output_path = Some(value.to_string()),
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown config key '{other}'"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Parse a `T:h,T:h,...` scenario list.
pub fn parse_scenarios(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (t, h) = part
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("bad scenario '{part}', want T:h")))?;
        let t: f64 = t
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad scenario horizon '{t}'")))?;
        let h: f64 = h
            .trim()
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad scenario step '{h}'")))?;
        out.push((t, h));
    }
    if out.is_empty() {
        return Err(Error::InvalidConfig("empty scenario list".into()));
    }
    Ok(out)
}

/// Selection counts for one scenario. Counts over successful replications;
/// failures are tracked separately and never silently dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionTable {
    /// Scenario horizon as an integer-valued float, kept as written.
    pub t_times_1000: u64,
    pub h_times_1e6: u64,
    /// counts[drift index][diffusion index], families in catalogue order.
    pub drift_diffusion_counts: [[u32; 2]; 3],
    /// counts[jump index]: Gaussian first, Laplace second.
    pub jump_counts: [u32; 2],
    /// Joint full-criterion counts when requested, indexed
    /// `[drift][diffusion][jump]`.
    pub joint_counts: Option<[[[u32; 2]; 2]; 3]>,
    pub n_rep: u32,
    pub dd_failures: u32,
    pub jump_failures: u32,
    /// More than five percent of replications failed a stage.
    pub degraded: bool,
}

impl SelectionTable {
    pub fn t_len(&self) -> f64 {
        self.t_times_1000 as f64 / 1000.0
    }

    pub fn h(&self) -> f64 {
        self.h_times_1e6 as f64 / 1e6
    }
}

/// The six drift x diffusion stage-one candidates, drift-major.
fn dd_candidates() -> Vec<ModelSpec> {
    let mut out = Vec::with_capacity(6);
    for drift in [FamilyId::Drift1, FamilyId::Drift2, FamilyId::Drift3] {
        for diffusion in [FamilyId::Diffusion1, FamilyId::Diffusion2] {
            let d = CoefficientFamily::new(drift);
            let s = CoefficientFamily::new(diffusion);
            out.push(
                ModelSpec::new(
                    d,
                    default_drift_box(d.param_dim()),
                    s,
                    default_diffusion_box(s.param_dim()),
                    JumpDensityFamily::new(JumpFamilyId::Laplace),
                    default_jump_box(),
                    DEFAULT_LAMBDA_BOUNDS,
                )
                .unwrap(),
            );
        }
    }
    out
}

/// The two jump-density stage-two candidates: Gaussian, then Laplace.
fn jump_candidates() -> Vec<ModelSpec> {
    [JumpFamilyId::Gaussian, JumpFamilyId::Laplace]
        .into_iter()
        .map(|id| {
            let d = CoefficientFamily::new(FamilyId::Drift3);
            let s = CoefficientFamily::new(FamilyId::Diffusion2);
            ModelSpec::new(
                d,
                default_drift_box(1),
                s,
                default_diffusion_box(2),
                JumpDensityFamily::new(id),
                default_jump_box(),
                DEFAULT_LAMBDA_BOUNDS,
            )
            .unwrap()
        })
        .collect()
}

struct RepOutcome {
    dd_choice: Option<(usize, usize)>,
    jump_choice: Option<usize>,
    joint_choice: Option<(usize, usize, usize)>,
}

/// Argmin with the parsimony tie-break: smaller value, then smaller
/// dimension, then smaller index.
fn argmin_with_tiebreak(values: &[f64], dims: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..values.len() {
        if values[i].is_nan() {
            continue;
        }
        match best {
            None => best = Some(i),
            Some(b) => {
                if values[i] < values[b]
                    || (values[i] == values[b] && dims[i] < dims[b])
                {
                    best = Some(i);
                }
            }
        }
    }
    best
}

fn run_replication(
    seed: u64,
    t_len: f64,
    h: f64,
    rule: &ThresholdRule,
    opts: &FitOptions,
    joint: bool,
) -> RepOutcome {
    let (true_model, true_params, lambda) = builtin_true_model();
    let n_obs = (t_len / h).round() as usize;
    let cfg = match PathConfig::new(n_obs, h, seed) {
        Ok(c) => c,
        Err(_) => {
            return RepOutcome {
                dd_choice: None,
                jump_choice: None,
                joint_choice: None,
            }
        }
    };
    let path = match simulate_path(&true_model, &true_params, lambda, &cfg) {
        Ok(p) => p,
        Err(_) => {
            return RepOutcome {
                dd_choice: None,
                jump_choice: None,
                joint_choice: None,
            }
        }
    };
    let obs = &path.observations;
    let cls = classify(obs, rule);

    let dd = dd_candidates();
    let mut dd_pic = vec![f64::NAN; dd.len()];
    let mut dd_h1 = vec![f64::NAN; dd.len()];
    let mut dd_dims = vec![0usize; dd.len()];
    for (i, m) in dd.iter().enumerate() {
        let dim = m.drift().param_dim() + m.diffusion().param_dim();
        dd_dims[i] = dim;
        if let Ok(s1) = fit_stage1(m, obs, &cls, opts) {
            dd_h1[i] = s1.h1_value;
            dd_pic[i] = -2.0 * s1.h1_value + 2.0 * dim as f64;
        }
    }
    let dd_choice = argmin_with_tiebreak(&dd_pic, &dd_dims).map(|i| (i / 2, i % 2));

    let jumps = jump_candidates();
    let mut j_pic = vec![f64::NAN; jumps.len()];
    let mut j_h2 = vec![f64::NAN; jumps.len()];
    let j_dims = vec![2usize; jumps.len()];
    for (i, m) in jumps.iter().enumerate() {
        if let Ok(s2) = fit_stage2(m, obs, &cls, opts) {
            j_h2[i] = s2.h2_value;
            j_pic[i] = -2.0 * s2.h2_value + 2.0 * m.jump().param_dim() as f64;
        }
    }
    let jump_choice = argmin_with_tiebreak(&j_pic, &j_dims);

    let joint_choice = if joint {
        // Full criterion over the twelve combinations, reusing both stages.
        let mut values = Vec::with_capacity(12);
        let mut dims = Vec::with_capacity(12);
        let mut keys = Vec::with_capacity(12);
        for (i, _) in dd.iter().enumerate() {
            for (j, _) in jumps.iter().enumerate() {
                if dd_h1[i].is_nan() || j_h2[j].is_nan() {
                    values.push(f64::NAN);
                } else {
                    let dim = dd_dims[i] + 2;
                    values.push(-2.0 * (dd_h1[i] + j_h2[j]) + 2.0 * dim as f64);
                }
                dims.push(dd_dims[i] + 2);
                keys.push((i / 2, i % 2, j));
            }
        }
        argmin_with_tiebreak(&values, &dims).map(|i| keys[i])
    } else {
        None
    };

    RepOutcome {
        dd_choice,
        jump_choice,
        joint_choice,
    }
}

/// Run the full experiment. Deterministic given the config: scenario i uses
/// the seed stream cfg.seed + i * 2^32 + replication index.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SelectionTable>> {
    cfg.validate()?;
    let rule = ThresholdRule::new(cfg.rho)?;
    let opts = FitOptions::default();
    let mut tables = Vec::with_capacity(cfg.scenarios.len());
    for (scenario_idx, &(t_len, h)) in cfg.scenarios.iter().enumerate() {
        let base = cfg.seed.wrapping_add((scenario_idx as u64) << 32);
        let outcomes: Vec<RepOutcome> = (1..=cfg.n_rep)
            .into_par_iter()
            .map(|r| {
                run_replication(
                    base.wrapping_add(r as u64),
                    t_len,
                    h,
                    &rule,
                    &opts,
                    cfg.joint,
                )
            })
            .collect();

        let mut table = SelectionTable {
            t_times_1000: (t_len * 1000.0).round() as u64,
            h_times_1e6: (h * 1e6).round() as u64,
            drift_diffusion_counts: [[0; 2]; 3],
            jump_counts: [0; 2],
            joint_counts: cfg.joint.then_some([[[0; 2]; 2]; 3]),
            n_rep: cfg.n_rep as u32,
            dd_failures: 0,
            jump_failures: 0,
            degraded: false,
        };
        for o in &outcomes {
            match o.dd_choice {
                Some((d, s)) => table.drift_diffusion_counts[d][s] += 1,
                None => table.dd_failures += 1,
            }
            match o.jump_choice {
                Some(j) => table.jump_counts[j] += 1,
                None => table.jump_failures += 1,
            }
            if let (Some(counts), Some((d, s, j))) =
                (table.joint_counts.as_mut(), o.joint_choice)
            {
                counts[d][s][j] += 1;
            }
        }
        let worst_failures = table.dd_failures.max(table.jump_failures) as f64;
        table.degraded = worst_failures > 0.05 * cfg.n_rep as f64;
        tables.push(table);
    }
    Ok(tables)
}

/// Output format for `emit_tables`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

fn fmt_num(x: f64) -> String {
    format!("{x}")
}

/// Render the tables. CSV emits two blocks separated by a blank line (three
/// with joint counts); markdown mirrors the two-report layout with the modal
/// cell in bold.
pub fn emit_tables(tables: &[SelectionTable], format: TableFormat) -> String {
    match format {
        TableFormat::Csv => emit_csv(tables),
        TableFormat::Markdown => emit_markdown(tables),
    }
}

fn emit_csv(tables: &[SelectionTable]) -> String {
    let mut out = String::from("T,h,drift,diffusion,count\n");
    for t in tables {
        for d in 0..3 {
            for s in 0..2 {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt_num(t.t_len()),
                    fmt_num(t.h()),
                    d + 1,
                    s + 1,
                    t.drift_diffusion_counts[d][s]
                ));
            }
        }
    }
    out.push('\n');
    out.push_str("T,h,jump,count\n");
    for t in tables {
        for j in 0..2 {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(t.t_len()),
                fmt_num(t.h()),
                j + 1,
                t.jump_counts[j]
            ));
        }
    }
    if tables.iter().any(|t| t.joint_counts.is_some()) {
        out.push('\n');
        out.push_str("T,h,drift,diffusion,jump,count\n");
        for t in tables {
            if let Some(counts) = &t.joint_counts {
                for d in 0..3 {
                    for s in 0..2 {
                        for j in 0..2 {
                            out.push_str(&format!(
                                "{},{},{},{},{},{}\n",
                                fmt_num(t.t_len()),
                                fmt_num(t.h()),
                                d + 1,
                                s + 1,
                                j + 1,
                                counts[d][s][j]
                            ));
                        }
                    }
                }
            }
        }
    }
    out
}

fn emit_markdown(tables: &[SelectionTable]) -> String {
    let mut out = String::new();
    out.push_str("| T | h | | Diffusion 1 | Diffusion 2 |\n");
    out.push_str("|---|---|---|---|---|\n");
    for t in tables {
        let modal = t
            .drift_diffusion_counts
            .iter()
            .flatten()
            .copied()
            .max()
            .unwrap_or(0);
        for d in 0..3 {
            let cell = |s: usize| {
                let c = t.drift_diffusion_counts[d][s];
                if c == modal && modal > 0 {
                    format!("**{c}**")
                } else {
                    format!("{c}")
                }
            };
            let (tt, hh) = if d == 0 {
                (fmt_num(t.t_len()), fmt_num(t.h()))
            } else {
                (String::new(), String::new())
            };
            out.push_str(&format!(
                "| {tt} | {hh} | Drift {} | {} | {} |\n",
                d + 1,
                cell(0),
                cell(1)
            ));
        }
    }
    out.push('\n');
    out.push_str("| T | h | Jump 1 | Jump 2 |\n");
    out.push_str("|---|---|---|---|\n");
    for t in tables {
        let modal = t.jump_counts.iter().copied().max().unwrap_or(0);
        let cell = |j: usize| {
            let c = t.jump_counts[j];
            if c == modal && modal > 0 {
                format!("**{c}**")
            } else {
                format!("{c}")
            }
        };
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            fmt_num(t.t_len()),
            fmt_num(t.h()),
            cell(0),
            cell(1)
        ));
    }
    for t in tables {
        if let Some(counts) = &t.joint_counts {
            out.push_str(&format!(
                "\nJoint selection at T = {}, h = {}: ",
                fmt_num(t.t_len()),
                fmt_num(t.h())
            ));
            let mut cells = Vec::new();
            for d in 0..3 {
                for s in 0..2 {
                    for j in 0..2 {
                        cells.push(format!(
                            "d{}s{}j{}={}",
                            d + 1,
                            s + 1,
                            j + 1,
                            counts[d][s][j]
                        ));
                    }
                }
            }
            out.push_str(&cells.join(", "));
            out.push('\n');
        }
    }
    out
}
