//! End-to-end checks of the binary: argument handling, exit codes, the
//! simulate -> fit -> select round trip, and reproduce determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jdpic"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("jdpic-cli-test-{}-{name}", std::process::id()));
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for key in [
        "simulate",
        "fit",
        "select",
        "reproduce",
        "certify-density",
        "check-lemma",
        "--threads",
        "scenarios",
    ] {
        assert!(text.contains(key), "usage text lacks {key}");
    }
}

#[test]
fn unknown_verb_and_flag_are_usage_errors() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("USAGE"));

    let out = run(&["simulate", "--t", "1", "--h", "0.05", "--bogus", "3"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn missing_input_is_a_failure() {
    let out = run(&["fit", "--input", "/nonexistent/path.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_fit_select_round_trip() {
    let path = tmp("path.csv");
    let out = run(&[
        "simulate",
        "--t",
        "30",
        "--h",
        "0.05",
        "--seed",
        "7",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,x\n"));
    assert_eq!(text.lines().count(), 602); // header + 601 observations

    // fit accepts the CSV untouched and reports the fixed key set
    let out = run(&["fit", "--input", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout).to_string();
    for key in [
        "drift_params=",
        "diff_params=",
        "jump_params=",
        "lambda_hat=",
        "h1=",
        "h2=",
        "pic=",
        "converged=",
        "n_detected_jumps=",
    ] {
        assert!(report.contains(key), "fit output lacks {key}:\n{report}");
    }
    assert!(report.contains("converged=true"));

    // select also consumes it directly
    let out = run(&["select", "--input", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(report.contains("chosen_index="));
    assert!(report.contains("chosen_label="));

    std::fs::remove_file(&path).ok();
}

#[test]
fn reproduce_is_byte_deterministic() {
    let out_a = tmp("rep-a.csv");
    let out_b = tmp("rep-b.csv");
    for out_path in [&out_a, &out_b] {
        let out = run(&[
            "reproduce",
            "--scenarios",
            "10:0.05",
            "--n-rep",
            "3",
            "--seed",
            "1",
            "--output",
            out_path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("T,h,drift,diffusion,count\n"));
    assert!(text.contains("T,h,jump,count\n"));
    std::fs::remove_file(&out_a).ok();
    std::fs::remove_file(&out_b).ok();
}

#[test]
fn reproduce_config_file_with_cli_override() {
    let cfg = tmp("exp.conf");
    let out_path = tmp("rep-c.md");
    std::fs::write(
        &cfg,
        "scenarios = 10:0.05\nn_rep = 5\nseed = 3\nrho = 0.4\ncandidates = section3\n",
    )
    .unwrap();
    // CLI overrides n_rep down to 2
    let out = run(&[
        "reproduce",
        "--config",
        cfg.to_str().unwrap(),
        "--n-rep",
        "2",
        "--format",
        "markdown",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.contains("| Diffusion 1 | Diffusion 2 |"));
    // counts sum to the overridden replication total
    let counts: u32 = text
        .lines()
        .filter(|l| l.starts_with("| ") && l.contains("Drift"))
        .flat_map(|l| {
            l.split('|')
                .rev()
                .skip(1) // trailing empty cell after the final pipe
                .take(2)
                .filter_map(|c| c.trim().trim_matches('*').parse::<u32>().ok())
                .collect::<Vec<_>>()
        })
        .sum();
    assert_eq!(counts, 2);
    // unknown config keys are rejected
    std::fs::write(&cfg, "replications = 5\n").unwrap();
    let out = run(&["reproduce", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_file(&cfg).ok();
    std::fs::remove_file(&out_path).ok();
}

#[test]
fn reproduce_joint_adds_third_block() {
    let out = run(&[
        "reproduce",
        "--scenarios",
        "10:0.05",
        "--n-rep",
        "2",
        "--seed",
        "9",
        "--joint",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("T,h,drift,diffusion,jump,count"));
}

#[test]
fn certify_density_and_lemma_run() {
    let out = run(&["certify-density", "--k", "1", "--h", "0.1,0.01", "--threads", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(csv.starts_with("k,h,empirical_C,max_violation\n"));
    assert_eq!(csv.lines().count(), 3);

    // an inadmissible tail exponent is a numerical failure, not a crash
    let out = run(&["certify-density", "--k", "1", "--h", "0.1", "--u", "0.9"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["check-lemma", "--u", "1", "--a", "0.01", "--z-max", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.starts_with("u,a,max_ratio\n"));
}
