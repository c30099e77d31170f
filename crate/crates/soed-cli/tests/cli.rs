//! End-to-end tests of the binary: flag handling, output files, exit codes,
//! and byte-level reproducibility. All runs use deliberately tiny workloads.

use std::path::Path;
use std::process::{Command, Output};

fn soed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soed"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name))
        .unwrap_or_else(|e| panic!("missing {name} in {}: {e}", dir.display()))
}

fn tiny_lg_solve(out: &Path, extra: &[&str]) -> Output {
    let out_str = out.to_str().unwrap();
    let mut args = vec![
        "solve",
        "--problem",
        "lg",
        "--L",
        "1",
        "--points",
        "30",
        "--kw-iterations",
        "4",
        "--kw-samples",
        "8",
        "--seed",
        "5",
        "--out",
        out_str,
    ];
    args.extend_from_slice(extra);
    soed(&args)
}

#[test]
fn solve_writes_policy_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_lg_solve(dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let policy = read(dir.path(), "policy.txt");
    assert!(policy.starts_with("soed-policy v1\nkind lookahead\nproblem lg\nrepr analytical\n"));
    assert!(policy.contains("value 1 1 "));
    let points = read(dir.path(), "regression_points.csv");
    assert!(points.starts_with("update,stage,s,u,z,target,intermediate\n"));
    // one stage of 30 points for L=1, N=2
    assert_eq!(points.lines().count(), 31);
    let residuals = read(dir.path(), "residuals.csv");
    assert_eq!(residuals.lines().count(), 2);
    assert!(read(dir.path(), "config.txt").contains("[problem]\nid = lg\n"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(a.path(), &[]).status.success());
    assert!(tiny_lg_solve(b.path(), &[]).status.success());
    for name in ["policy.txt", "regression_points.csv", "residuals.csv", "iterations.csv"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn rerunning_from_the_config_echo_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(first.path(), &[]).status.success());
    let echo = first.path().join("config.txt");

    let second = tempfile::tempdir().unwrap();
    let out = soed(&[
        "solve",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(first.path(), "policy.txt"), read(second.path(), "policy.txt"));
    assert_eq!(read(first.path(), "config.txt"), read(second.path(), "config.txt"));
}

#[test]
fn assess_scores_a_solved_policy_and_a_baseline() {
    let solve_dir = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(solve_dir.path(), &[]).status.success());
    let policy = solve_dir.path().join("policy.txt");

    let assess_dir = tempfile::tempdir().unwrap();
    let out = soed(&[
        "assess",
        "--problem",
        "lg",
        "--policy",
        policy.to_str().unwrap(),
        "--trajectories",
        "25",
        "--framework",
        "grid(60)",
        "--kw-iterations",
        "4",
        "--kw-samples",
        "8",
        "--seed",
        "9",
        "--out",
        assess_dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(assess_dir.path(), "report.csv");
    assert!(report.starts_with("spec,policy,requested,completed,degenerate,mean,se,qualified_fraction\n"));
    assert!(report.lines().nth(1).unwrap().contains(",soed,25,"));
    assert_eq!(read(assess_dir.path(), "trajectories.csv").lines().count(), 26);
    assert_eq!(read(assess_dir.path(), "histogram.csv").lines().count(), 41);
    assert!(read(assess_dir.path(), "scatter.csv").starts_with("d0,d1\n"));

    let baseline_dir = tempfile::tempdir().unwrap();
    let out = soed(&[
        "assess",
        "--problem",
        "lg",
        "--baseline",
        "exploration",
        "--trajectories",
        "25",
        "--framework",
        "grid(60)",
        "--seed",
        "9",
        "--out",
        baseline_dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(baseline_dir.path(), "report.csv");
    assert!(report.lines().nth(1).unwrap().starts_with("exploration,exploration,25,"));
}

#[test]
fn assess_worker_count_does_not_change_output_bytes() {
    let solve_dir = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(solve_dir.path(), &[]).status.success());
    let policy = solve_dir.path().join("policy.txt");
    let run = |workers: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = soed(&[
            "assess",
            "--problem",
            "lg",
            "--policy",
            policy.to_str().unwrap(),
            "--trajectories",
            "20",
            "--framework",
            "grid(60)",
            "--kw-iterations",
            "4",
            "--kw-samples",
            "8",
            "--seed",
            "3",
            "--workers",
            workers,
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        read(dir.path(), "trajectories.csv")
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn compare_writes_one_row_per_spec_and_pairwise_differences() {
    let solve_dir = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(solve_dir.path(), &[]).status.success());
    let policy = solve_dir.path().join("policy.txt");
    let spec = format!("{}@1", policy.to_str().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let out = soed(&[
        "compare",
        "--problem",
        "lg",
        "--spec",
        &spec,
        "--spec",
        "exploration",
        "--trajectories",
        "20",
        "--framework",
        "grid(60)",
        "--kw-iterations",
        "4",
        "--kw-samples",
        "8",
        "--seed",
        "2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let comparison = read(dir.path(), "comparison.csv");
    assert_eq!(comparison.lines().count(), 3);
    assert!(comparison.contains("policy@1,soed,"));
    assert!(comparison.contains("exploration,exploration,"));
    let differences = read(dir.path(), "differences.csv");
    assert_eq!(differences.lines().count(), 2);
    assert!(differences.lines().nth(1).unwrap().starts_with("policy@1,exploration,"));
}

#[test]
fn lg_exact_exports_the_closed_form_solution() {
    let dir = tempfile::tempdir().unwrap();
    let out = soed(&[
        "lg-exact",
        "--problem",
        "lg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let exact = read(dir.path(), "exact.txt");
    let field = |name: &str| -> f64 {
        exact
            .lines()
            .find_map(|l| l.strip_prefix(name))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!((field("u_star") - 0.7832887).abs() < 1e-6);
    assert!((field("locus_radius_sq") - 0.4554631).abs() < 1e-6);
    let surface = read(dir.path(), "surface.csv");
    assert!(surface.starts_with("d0,d1,expected_total_reward\n"));
    assert_eq!(surface.lines().count(), 1 + 59 * 59);
}

#[test]
fn config_errors_exit_with_code_two() {
    let cases: Vec<Vec<&str>> = vec![
        vec!["solve", "--problem", "nope"],
        vec!["solve", "--problem", "plume-case1", "--repr", "analytical"],
        vec!["solve", "--problem", "lg", "--repr", "grid(3)"],
        vec!["assess", "--problem", "lg"],
        vec!["assess", "--problem", "lg", "--baseline", "median"],
        vec!["lg-exact", "--problem", "plume-case1"],
        vec!["solve"],
    ];
    for args in cases {
        let out = soed(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "args {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn policy_problem_mismatch_is_a_config_error() {
    let solve_dir = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(solve_dir.path(), &[]).status.success());
    let policy = solve_dir.path().join("policy.txt");
    let out = soed(&[
        "assess",
        "--problem",
        "plume-case1",
        "--policy",
        policy.to_str().unwrap(),
        "--trajectories",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("policy file is for problem lg"));
}

#[test]
fn assess_rejects_out_of_range_policy_update() {
    let solve_dir = tempfile::tempdir().unwrap();
    assert!(tiny_lg_solve(solve_dir.path(), &[]).status.success());
    let policy = solve_dir.path().join("policy.txt");
    let out = soed(&[
        "assess",
        "--problem",
        "lg",
        "--policy",
        policy.to_str().unwrap(),
        "--update",
        "7",
        "--trajectories",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}
