//! Command-line front end: simulate paths, fit and select candidate models,
//! reproduce the Monte Carlo selection tables, and run the density
//! certificates.
//!
//! Results go to stdout or the requested output file; diagnostics go to
//! stderr. Exit codes: 0 success, 1 usage error, 2 numerical or I/O failure.

use std::process::ExitCode;

use jdpic_core::density::{certify_ktesti_bound, convolution_lemma_check, ConstCoeffModel};
use jdpic_core::estimate::FitOptions;
use jdpic_core::experiment::{emit_tables, parse_scenarios, TableFormat};
use jdpic_core::model::{
    builtin_candidates, builtin_true_model, default_diffusion_box, default_drift_box,
    default_jump_box, CoefficientFamily, FamilyId, JumpDensityFamily, JumpFamilyId, ModelSpec,
    DEFAULT_LAMBDA_BOUNDS,
};
use jdpic_core::pic::stamp_pic;
use jdpic_core::{
    fit, run_experiment, select, simulate_path, ExperimentConfig, Observations, PathConfig,
    ThresholdRule,
};

const USAGE: &str = "\
jdpic: threshold quasi-likelihood estimation and PIC model selection
       for scalar jump diffusions

USAGE: jdpic <verb> [--key value ...]

VERBS
  simulate         generate one path of the built-in data-generating model
                   and dump it as `t,x` CSV
                   keys: --t --h [--seed N] [--lambda L] [--substeps K]
                         [--burn-in B] [--output FILE]
  fit              fit one candidate to a path CSV, print the fit as
                   key=value lines
                   keys: --input FILE [--rho R] [--drift 1|2|3]
                         [--diffusion 1|2] [--jump gaussian|laplace]
                         [--output FILE]
  select           fit all twelve built-in candidates to a path CSV and
                   report the PIC minimizer
                   keys: --input FILE [--rho R] [--output FILE]
  reproduce        run the Monte Carlo selection experiment and print the
                   selection tables
                   keys: [--config FILE] [--scenarios T:h,...] [--n-rep N]
                         [--rho R] [--seed S] [--candidates NAME]
                         [--output FILE] [--format csv|markdown] [--joint]
  certify-density  sweep the k-jump transition-density terms and emit the
                   envelope certificate CSV `k,h,empirical_C,max_violation`
                   keys: [--k 1,2] [--h 0.1,0.02,0.01] [--u U] [--zeta Z]
                         [--diff-const B] [--lambda L]
                         [--jump gaussian|laplace] [--loc M] [--scale S]
                         [--output FILE]
  check-lemma      sweep the Gaussian-exponential convolution inequality
                   keys: [--u 0.5,1,2] [--a 0.1,0.01,0.001] [--z-max Z]
                         [--z-step D] [--output FILE]

GLOBAL KEYS
  --threads N      cap the worker-thread count
  --help           print this text

A reproduce config file holds `key = value` lines with exactly the keys
scenarios, n_rep, rho, seed, candidates, output; command-line keys override
file keys. Exit codes: 0 success, 1 usage error, 2 numerical failure.
";

/// Parsed `--key value` arguments with single-use take semantics so unknown
/// leftovers are rejected.
struct Opts {
    pairs: Vec<(String, String)>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failure(String),
}

impl From<jdpic_core::Error> for CliError {
    fn from(e: jdpic_core::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(format!("i/o: {e}"))
    }
}

type CliResult<T> = Result<T, CliError>;

impl Opts {
    fn parse(args: &[String]) -> CliResult<(Option<String>, Opts)> {
        let mut verb = None;
        let mut pairs = Vec::new();
        let mut it = args.iter().peekable();
        while let Some(a) = it.next() {
            if a == "--help" || a == "-h" {
                pairs.push(("help".to_string(), String::new()));
            } else if let Some(key) = a.strip_prefix("--") {
                // flags without a value
                if key == "joint" {
                    pairs.push((key.to_string(), "true".to_string()));
                    continue;
                }
                let value = it
                    .next()
                    .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?;
                pairs.push((key.to_string(), value.clone()));
            } else if verb.is_none() {
                verb = Some(a.clone());
            } else {
                return Err(CliError::Usage(format!("unexpected argument '{a}'")));
            }
        }
        Ok((verb, Opts { pairs }))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        let idx = self.pairs.iter().position(|(k, _)| k == key)?;
        Some(self.pairs.remove(idx).1)
    }

    fn take_parsed<T: std::str::FromStr>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("bad value for --{key}: '{v}'"))),
        }
    }

    fn finish(self) -> CliResult<()> {
        if let Some((k, _)) = self.pairs.into_iter().next() {
            return Err(CliError::Usage(format!("unknown key --{k}")));
        }
        Ok(())
    }
}

fn parse_list(text: &str, key: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad value '{p}' in --{key}")))
        })
        .collect()
}

fn jump_family(name: &str) -> CliResult<JumpDensityFamily> {
    match name {
        "gaussian" => Ok(JumpDensityFamily::new(JumpFamilyId::Gaussian)),
        "laplace" => Ok(JumpDensityFamily::new(JumpFamilyId::Laplace)),
        other => Err(CliError::Usage(format!(
            "unknown jump family '{other}' (gaussian or laplace)"
        ))),
    }
}

fn write_out(path: Option<String>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(&p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn cmd_simulate(mut opts: Opts) -> CliResult<()> {
    let t_len: f64 = opts
        .take_parsed("t")?
        .ok_or_else(|| CliError::Usage("simulate needs --t".into()))?;
    let h: f64 = opts
        .take_parsed("h")?
        .ok_or_else(|| CliError::Usage("simulate needs --h".into()))?;
    let seed: u64 = opts.take_parsed("seed")?.unwrap_or(1);
    let substeps: usize = opts.take_parsed("substeps")?.unwrap_or(16);
    let burn_in: f64 = opts.take_parsed("burn-in")?.unwrap_or(50.0);
    let (model, params, lambda0) = builtin_true_model();
    let lambda: f64 = opts.take_parsed("lambda")?.unwrap_or(lambda0);
    let output = opts.take("output");
    opts.finish()?;

    let n_obs = (t_len / h).round() as usize;
    if n_obs == 0 || (t_len / h - n_obs as f64).abs() > 1e-9 {
        return Err(CliError::Usage(format!(
            "--t / --h must be a whole number of steps, got {t_len} / {h}"
        )));
    }
    let cfg = PathConfig::new(n_obs, h, seed)
        .map_err(|e| CliError::Usage(e.to_string()))?
        .with_substeps(substeps)
        .with_burn_in(burn_in);
    let path = simulate_path(&model, &params, lambda, &cfg)?;
    eprintln!(
        "simulated T = {t_len}, h = {h}, {} jumps in window",
        path.jump_times.len()
    );
    write_out(output, &path.observations.to_csv())
}

fn candidate_from(drift: u32, diffusion: u32, jump: &str) -> CliResult<ModelSpec> {
    let d = match drift {
        1 => FamilyId::Drift1,
        2 => FamilyId::Drift2,
        3 => FamilyId::Drift3,
        other => return Err(CliError::Usage(format!("--drift must be 1..3, got {other}"))),
    };
    let s = match diffusion {
        1 => FamilyId::Diffusion1,
        2 => FamilyId::Diffusion2,
        other => {
            return Err(CliError::Usage(format!(
                "--diffusion must be 1 or 2, got {other}"
            )))
        }
    };
    let dfam = CoefficientFamily::new(d);
    let sfam = CoefficientFamily::new(s);
    ModelSpec::new(
        dfam,
        default_drift_box(dfam.param_dim()),
        sfam,
        default_diffusion_box(sfam.param_dim()),
        jump_family(jump)?,
        default_jump_box(),
        DEFAULT_LAMBDA_BOUNDS,
    )
    .map_err(|e| CliError::Failure(e.to_string()))
}

fn load_observations(opts: &mut Opts) -> CliResult<Observations> {
    let input = opts
        .take("input")
        .ok_or_else(|| CliError::Usage("needs --input FILE".into()))?;
    let text = std::fs::read_to_string(&input)
        .map_err(|e| CliError::Failure(format!("cannot read '{input}': {e}")))?;
    Ok(Observations::from_csv(&text)?)
}

fn threshold_from(opts: &mut Opts) -> CliResult<ThresholdRule> {
    match opts.take_parsed::<f64>("rho")? {
        None => Ok(ThresholdRule::default()),
        Some(r) => ThresholdRule::new(r).map_err(|e| CliError::Usage(e.to_string())),
    }
}

fn cmd_fit(mut opts: Opts) -> CliResult<()> {
    let obs = load_observations(&mut opts)?;
    let rule = threshold_from(&mut opts)?;
    let drift: u32 = opts.take_parsed("drift")?.unwrap_or(3);
    let diffusion: u32 = opts.take_parsed("diffusion")?.unwrap_or(2);
    let jump = opts.take("jump").unwrap_or_else(|| "laplace".into());
    let output = opts.take("output");
    opts.finish()?;

    let model = candidate_from(drift, diffusion, &jump)?;
    let mut result = fit(&model, &obs, &rule, &FitOptions::default())?;
    stamp_pic(&mut result, &model);

    let join = |v: &[f64]| v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(",");
    let mut out = String::new();
    out.push_str(&format!("drift_params={}\n", join(&result.drift_params)));
    out.push_str(&format!("diff_params={}\n", join(&result.diff_params)));
    out.push_str(&format!("jump_params={}\n", join(&result.jump_params)));
    out.push_str(&format!("lambda_hat={}\n", fmt17(result.lambda_hat)));
    out.push_str(&format!("h1={}\n", fmt17(result.h1_value)));
    out.push_str(&format!("h2={}\n", fmt17(result.h2_value)));
    out.push_str(&format!("pic={}\n", fmt17(result.pic.unwrap())));
    out.push_str(&format!("converged={}\n", result.converged));
    out.push_str(&format!("n_detected_jumps={}\n", result.n_detected_jumps));
    write_out(output, &out)
}

fn cmd_select(mut opts: Opts) -> CliResult<()> {
    let obs = load_observations(&mut opts)?;
    let rule = threshold_from(&mut opts)?;
    let output = opts.take("output");
    opts.finish()?;

    let candidates = builtin_candidates();
    let outcome = select(&candidates, &obs, &rule, &FitOptions::default())?;
    let mut out = String::new();
    out.push_str(&format!("chosen_index={}\n", outcome.chosen_index));
    out.push_str(&format!(
        "chosen_label={}\n",
        candidates[outcome.chosen_index].label()
    ));
    out.push_str(&format!("ties_broken={}\n", outcome.ties_broken));
    for (i, (c, pic)) in candidates.iter().zip(&outcome.pic_values).enumerate() {
        out.push_str(&format!("pic_{i}[{}]={}\n", c.label(), fmt17(*pic)));
    }
    for (i, msg) in &outcome.failures {
        eprintln!("candidate {i} failed: {msg}");
    }
    write_out(output, &out)
}

fn cmd_reproduce(mut opts: Opts) -> CliResult<()> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = opts.take("config") {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Failure(format!("cannot read '{path}': {e}")))?;
        cfg.apply_config_text(&text)
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(s) = opts.take("scenarios") {
        cfg.scenarios = parse_scenarios(&s).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(n) = opts.take_parsed("n-rep")? {
        cfg.n_rep = n;
    }
    if let Some(r) = opts.take_parsed("rho")? {
        cfg.rho = r;
    }
    if let Some(s) = opts.take_parsed("seed")? {
        cfg.seed = s;
    }
    if let Some(c) = opts.take("candidates") {
        cfg.candidate_set = c;
    }
    if let Some(o) = opts.take("output") {
        cfg.output_path = Some(o);
    }
    cfg.joint = opts.take("joint").is_some() || cfg.joint;
    let format = match opts.take("format").as_deref() {
        None | Some("csv") => TableFormat::Csv,
        Some("markdown") => TableFormat::Markdown,
        Some(other) => {
            return Err(CliError::Usage(format!(
                "unknown format '{other}' (csv or markdown)"
            )))
        }
    };
    opts.finish()?;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let tables = run_experiment(&cfg)?;
    for t in &tables {
        if t.degraded {
            eprintln!(
                "warning: scenario T = {}, h = {} degraded ({} / {} stage failures)",
                t.t_len(),
                t.h(),
                t.dd_failures.max(t.jump_failures),
                t.n_rep
            );
        }
    }
    write_out(cfg.output_path.clone(), &emit_tables(&tables, format))
}

fn cmd_certify_density(mut opts: Opts) -> CliResult<()> {
    let ks = opts.take("k").unwrap_or_else(|| "1,2".into());
    let ks: Vec<u32> = ks
        .split(',')
        .map(|p| {
            p.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad value '{p}' in --k")))
        })
        .collect::<CliResult<_>>()?;
    let h_values = parse_list(
        &opts.take("h").unwrap_or_else(|| "0.1,0.02,0.01".into()),
        "h",
    )?;
    let u: f64 = opts.take_parsed("u")?.unwrap_or(0.5);
    let zeta: f64 = opts.take_parsed("zeta")?.unwrap_or(0.9);
    let diff_const: f64 = opts.take_parsed("diff-const")?.unwrap_or(1.0);
    let lambda: f64 = opts.take_parsed("lambda")?.unwrap_or(1.0);
    let jump = opts.take("jump").unwrap_or_else(|| "laplace".into());
    let loc: f64 = opts.take_parsed("loc")?.unwrap_or(0.0);
    let scale: f64 = opts.take_parsed("scale")?.unwrap_or(2.0);
    let output = opts.take("output");
    opts.finish()?;

    let model = ConstCoeffModel::new(diff_const, lambda, jump_family(&jump)?, vec![loc, scale])?;
    let mut out = String::from("k,h,empirical_C,max_violation\n");
    let mut all_pass = true;
    for &k in &ks {
        let cert = certify_ktesti_bound(&model, k, &h_values, u, zeta)?;
        for line in cert.to_csv().lines().skip(1) {
            out.push_str(line);
            out.push('\n');
        }
        let verdict = if cert.passes() { "pass" } else { "FAIL" };
        all_pass &= cert.passes();
        eprintln!(
            "k = {k}: empirical_C = {:.4}, stability ratio = {:.3}, {verdict}",
            cert.empirical_c,
            cert.stability_ratio()
        );
    }
    write_out(output, &out)?;
    if !all_pass {
        return Err(CliError::Failure("a certificate failed".into()));
    }
    Ok(())
}

fn cmd_check_lemma(mut opts: Opts) -> CliResult<()> {
    let u_values = parse_list(&opts.take("u").unwrap_or_else(|| "0.5,1,2".into()), "u")?;
    let a_values = parse_list(
        &opts.take("a").unwrap_or_else(|| "0.1,0.01,0.001".into()),
        "a",
    )?;
    let z_max: f64 = opts.take_parsed("z-max")?.unwrap_or(20.0);
    let z_step: f64 = opts.take_parsed("z-step")?.unwrap_or(0.5);
    let output = opts.take("output");
    opts.finish()?;

    if !(z_max > 0.0 && z_step > 0.0) {
        return Err(CliError::Usage("--z-max and --z-step must be positive".into()));
    }
    let n = (2.0 * z_max / z_step).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| -z_max + i as f64 * z_step).collect();
    let mut out = String::from("u,a,max_ratio\n");
    let mut overall = f64::MIN;
    for &u in &u_values {
        let report = convolution_lemma_check(&a_values, u, &grid)?;
        for (a, m) in &report.per_a_max {
            out.push_str(&format!("{u},{a},{m:.10e}\n"));
        }
        overall = overall.max(report.max_ratio);
    }
    eprintln!("max ratio over the sweep: {overall:.4}");
    write_out(output, &out)
}

fn dispatch(verb: &str, opts: Opts) -> CliResult<()> {
    match verb {
        "simulate" => cmd_simulate(opts),
        "fit" => cmd_fit(opts),
        "select" => cmd_select(opts),
        "reproduce" => cmd_reproduce(opts),
        "certify-density" => cmd_certify_density(opts),
        "check-lemma" => cmd_check_lemma(opts),
        other => Err(CliError::Usage(format!("unknown verb '{other}'"))),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (verb, mut opts) = match Opts::parse(&args) {
        Ok(v) => v,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(1);
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    if opts.take("help").is_some() || verb.is_none() {
        print!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    if let Some(threads) = opts.take("threads") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not set thread count: {e}");
                }
            }
            _ => {
                eprintln!("error: bad value for --threads: '{threads}'\n\n{USAGE}");
                return ExitCode::from(1);
            }
        }
    }
    match dispatch(verb.as_deref().unwrap(), opts) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            ExitCode::from(1)
        }
        Err(CliError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
