//! The four subcommands. Every command writes its effective configuration
//! (config.txt) plus documented CSV/text outputs into the output directory,
//! and is a pure function of that configuration: rerunning with the echoed
//! config reproduces every output byte. Progress and timing go to stderr
//! only, never into output files.

use crate::config::RunConfig;
use crate::policy_file::{PolicyFile, PolicyKind};
use crate::CliError;
use soed::{
    assess, batch_optimize, derive_seed, lg_exact_solution, lg_expected_total_reward, solve,
    AssessReport, AssessSettings, LinearGaussian, LinearValue, Policy, ProblemId, Repr, Solution,
    SolveSettings,
};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

fn solve_settings(cfg: &RunConfig) -> SolveSettings {
    SolveSettings {
        updates: cfg.updates,
        points_per_stage: cfg.points,
        explore: cfg.explore,
        exploit_frac: cfg.exploit_frac,
        kw: cfg.kw,
        repr: cfg.repr,
        seed: cfg.seed,
        workers: cfg.workers,
    }
}

fn assess_settings(cfg: &RunConfig, native: Repr) -> AssessSettings {
    AssessSettings {
        trajectories: cfg.trajectories,
        repr: native,
        framework: cfg.framework,
        explore: cfg.explore,
        kw: cfg.kw,
        seed: cfg.seed,
        workers: cfg.workers,
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let problem = cfg.problem.build();
    let t0 = Instant::now();
    let solution = solve(problem.as_ref(), &solve_settings(cfg))?;
    eprintln!(
        "solved {} in {:.1?}: {} updates, {} regression points",
        cfg.problem.as_str(),
        t0.elapsed(),
        solution.by_update.len(),
        solution.regression_points.len()
    );
    for report in &solution.reports {
        let worst = report
            .fits
            .iter()
            .map(|f| f.residual_rms)
            .fold(0.0_f64, f64::max);
        eprintln!(
            "  update {}: {} explore + {} exploit trajectories, {} optimizer fallbacks, worst residual rms {:.3e}",
            report.update, report.explore_trajectories, report.exploit_trajectories, report.fallbacks, worst
        );
    }

    write_file(out, "config.txt", &cfg.echo())?;
    let policy = PolicyFile::from_solution(cfg.problem, cfg.repr, problem.horizon(), &solution);
    write_file(out, "policy.txt", &policy.render())?;
    write_file(out, "regression_points.csv", &regression_points_csv(&solution))?;
    write_file(out, "residuals.csv", &residuals_csv(&solution))?;
    write_file(out, "iterations.csv", &iterations_csv(&solution))?;
    Ok(())
}

fn regression_points_csv(solution: &Solution) -> String {
    let mut s = String::from("update,stage,s,u,z,target,intermediate\n");
    for r in &solution.regression_points {
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.update,
            r.stage,
            r.s,
            r.u,
            r.z,
            r.target,
            r.intermediate as u8
        );
    }
    s
}

fn residuals_csv(solution: &Solution) -> String {
    let mut s = String::from("update,stage,visited,intermediates,dropped,residual_rms\n");
    for report in &solution.reports {
        for f in &report.fits {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.16e}",
                report.update, f.stage, f.visited, f.intermediates, f.dropped, f.residual_rms
            );
        }
    }
    s
}

fn iterations_csv(solution: &Solution) -> String {
    let mut s = String::from("update,explore_trajectories,exploit_trajectories,fallbacks\n");
    for r in &solution.reports {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.update, r.explore_trajectories, r.exploit_trajectories, r.fallbacks
        );
    }
    s
}

/// What to assess: a persisted policy file or a named baseline.
pub enum AssessSource {
    Policy { path: PathBuf, update: Option<usize> },
    Baseline(BaselineKind),
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    Greedy,
    Batch,
    Exploration,
}

impl BaselineKind {
    pub fn parse(s: &str) -> Result<BaselineKind, CliError> {
        match s {
            "greedy" => Ok(BaselineKind::Greedy),
            "batch" => Ok(BaselineKind::Batch),
            "exploration" => Ok(BaselineKind::Exploration),
            other => Err(CliError::Config(format!(
                "unknown baseline '{other}' (expected greedy, batch, exploration)"
            ))),
        }
    }
}

/// Plan the open-loop design the batch baseline executes. Deterministic in
/// the run seed; kept in one place so assess and compare agree.
fn plan_batch(cfg: &RunConfig) -> Result<(Vec<f64>, f64), CliError> {
    let problem = cfg.problem.build();
    let seed = derive_seed(cfg.seed, &[100]);
    Ok(batch_optimize(problem.as_ref(), cfg.repr, &cfg.kw, seed)?)
}

/// Values and native representation resolved from an assess source. The
/// value slices live in `owned_*`, borrowed by the returned policy.
struct ResolvedPolicy {
    native: Repr,
    values: Option<Vec<LinearValue>>,
    batch: Option<Vec<f64>>,
    baseline: Option<BaselineKind>,
    label: String,
}

impl ResolvedPolicy {
    fn as_policy(&self) -> Policy<'_> {
        if let Some(values) = &self.values {
            Policy::Lookahead(values)
        } else if let Some(designs) = &self.batch {
            Policy::Batch(designs)
        } else {
            match self.baseline.unwrap() {
                BaselineKind::Greedy => Policy::Greedy,
                BaselineKind::Exploration => Policy::Explore,
                BaselineKind::Batch => unreachable!("batch designs resolved at planning time"),
            }
        }
    }
}

fn resolve(cfg: &RunConfig, source: &AssessSource) -> Result<ResolvedPolicy, CliError> {
    match source {
        AssessSource::Policy { path, update } => {
            let file = PolicyFile::parse(&read_to_string(path)?)?;
            if file.problem != cfg.problem {
                return Err(CliError::Config(format!(
                    "policy file is for problem {}, run is configured for {}",
                    file.problem.as_str(),
                    cfg.problem.as_str()
                )));
            }
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "policy".into());
            match file.kind {
                PolicyKind::Lookahead { by_update, .. } => {
                    let l = update.unwrap_or(by_update.len());
                    if l < 1 || l > by_update.len() {
                        return Err(CliError::Config(format!(
                            "policy update {l} out of range (file has {})",
                            by_update.len()
                        )));
                    }
                    Ok(ResolvedPolicy {
                        native: file.repr,
                        values: Some(by_update[l - 1].clone()),
                        batch: None,
                        baseline: None,
                        label: format!("{label}@{l}"),
                    })
                }
                PolicyKind::Batch { designs } => Ok(ResolvedPolicy {
                    native: file.repr,
                    values: None,
                    batch: Some(designs),
                    baseline: None,
                    label,
                }),
            }
        }
        AssessSource::Baseline(kind) => {
            let (batch, label) = match kind {
                BaselineKind::Batch => {
                    let t0 = Instant::now();
                    let (designs, planned) = plan_batch(cfg)?;
                    eprintln!(
                        "planned batch design in {:.1?}: {:?} (planned value {:.4})",
                        t0.elapsed(),
                        designs,
                        planned
                    );
                    (Some(designs), "batch")
                }
                BaselineKind::Greedy => (None, "greedy"),
                BaselineKind::Exploration => (None, "exploration"),
            };
            Ok(ResolvedPolicy {
                native: cfg.repr,
                values: None,
                batch,
                baseline: Some(*kind),
                label: label.into(),
            })
        }
    }
}

fn run_assessment(cfg: &RunConfig, resolved: &ResolvedPolicy) -> Result<AssessReport, CliError> {
    let problem = cfg.problem.build();
    let settings = assess_settings(cfg, resolved.native);
    let t0 = Instant::now();
    let report = assess(problem.as_ref(), resolved.as_policy(), &settings)?;
    eprintln!(
        "assessed {} ({}) in {:.1?}: mean {:.4} +/- {:.4}, qualified {:.3}, degenerate {}",
        resolved.label,
        report.policy,
        t0.elapsed(),
        report.mean,
        report.se,
        report.qualified_fraction,
        report.degenerate
    );
    Ok(report)
}

pub fn cmd_assess(cfg: &RunConfig, source: &AssessSource, out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let resolved = resolve(cfg, source)?;
    let report = run_assessment(cfg, &resolved)?;

    write_file(out, "config.txt", &cfg.echo())?;
    if let Some(designs) = &resolved.batch {
        let file = PolicyFile {
            problem: cfg.problem,
            repr: resolved.native,
            kind: PolicyKind::Batch {
                designs: designs.clone(),
            },
        };
        write_file(out, "batch_policy.txt", &file.render())?;
    }
    write_file(out, "report.csv", &report_csv(&resolved.label, &report))?;
    write_file(out, "trajectories.csv", &trajectories_csv(&report))?;
    write_file(out, "histogram.csv", &histogram_csv(&report))?;
    write_file(out, "scatter.csv", &scatter_csv(&report))?;
    Ok(())
}

fn report_csv(label: &str, report: &AssessReport) -> String {
    let mut s = String::from("spec,policy,requested,completed,degenerate,mean,se,qualified_fraction\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{},{:.16e},{:.16e},{:.16e}",
        label,
        report.policy,
        report.requested,
        report.completed,
        report.degenerate,
        report.mean,
        report.se,
        report.qualified_fraction
    );
    s
}

fn trajectories_csv(report: &AssessReport) -> String {
    let horizon = report
        .trajectories
        .first()
        .map(|t| t.designs.len())
        .unwrap_or(0);
    let mut s = String::from("index,theta");
    for k in 0..horizon {
        let _ = write!(s, ",d{k}");
    }
    for k in 0..horizon {
        let _ = write!(s, ",y{k}");
    }
    s.push_str(",total_reward,qualified\n");
    for (i, t) in report.trajectories.iter().enumerate() {
        let _ = write!(s, "{i},{:.16e}", t.theta);
        for d in &t.designs {
            let _ = write!(s, ",{d:.16e}");
        }
        for y in &t.observations {
            let _ = write!(s, ",{y:.16e}");
        }
        let _ = writeln!(s, ",{:.16e},{}", t.total_reward, t.qualified as u8);
    }
    s
}

fn histogram_csv(report: &AssessReport) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    let h = &report.histogram;
    for i in 0..h.counts.len() {
        let _ = writeln!(s, "{:.16e},{:.16e},{}", h.edges[i], h.edges[i + 1], h.counts[i]);
    }
    s
}

fn scatter_csv(report: &AssessReport) -> String {
    let horizon = report
        .trajectories
        .first()
        .map(|t| t.designs.len())
        .unwrap_or(0);
    let mut s = String::new();
    for k in 0..horizon {
        if k > 0 {
            s.push(',');
        }
        let _ = write!(s, "d{k}");
    }
    s.push('\n');
    for t in &report.trajectories {
        for (k, d) in t.designs.iter().enumerate() {
            if k > 0 {
                s.push(',');
            }
            let _ = write!(s, "{d:.16e}");
        }
        s.push('\n');
    }
    s
}

/// A compare spec: a baseline name or a policy file path, optionally with
/// `@l` selecting which policy update to execute.
pub fn parse_spec(raw: &str) -> Result<AssessSource, CliError> {
    if let Ok(kind) = BaselineKind::parse(raw) {
        return Ok(AssessSource::Baseline(kind));
    }
    if let Some((path, l)) = raw.rsplit_once('@') {
        if let Ok(update) = l.parse::<usize>() {
            return Ok(AssessSource::Policy {
                path: PathBuf::from(path),
                update: Some(update),
            });
        }
    }
    Ok(AssessSource::Policy {
        path: PathBuf::from(raw),
        update: None,
    })
}

pub fn cmd_compare(cfg: &RunConfig, specs: &[String], out: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    if specs.is_empty() {
        return Err(CliError::Config("compare needs at least one --spec".into()));
    }
    let mut rows: Vec<(String, AssessReport)> = Vec::new();
    for raw in specs {
        let source = parse_spec(raw)?;
        let resolved = resolve(cfg, &source)?;
        let report = run_assessment(cfg, &resolved)?;
        rows.push((resolved.label.clone(), report));
    }

    let mut comparison = String::from("spec,policy,mean,se,qualified_fraction,completed,degenerate\n");
    for (label, r) in &rows {
        let _ = writeln!(
            comparison,
            "{},{},{:.16e},{:.16e},{:.16e},{},{}",
            label, r.policy, r.mean, r.se, r.qualified_fraction, r.completed, r.degenerate
        );
    }
    let mut differences = String::from("spec_a,spec_b,diff,combined_se\n");
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            let (la, ra) = &rows[i];
            let (lb, rb) = &rows[j];
            let diff = ra.mean - rb.mean;
            let combined = (ra.se * ra.se + rb.se * rb.se).sqrt();
            let _ = writeln!(differences, "{la},{lb},{diff:.16e},{combined:.16e}");
        }
    }

    write_file(out, "config.txt", &cfg.echo())?;
    write_file(out, "comparison.csv", &comparison)?;
    write_file(out, "differences.csv", &differences)?;
    Ok(())
}

pub fn cmd_lg_exact(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.problem != ProblemId::Lg {
        return Err(CliError::Config(format!(
            "lg-exact only applies to --problem lg, got {}",
            cfg.problem.as_str()
        )));
    }
    let p = LinearGaussian::new();
    let exact = lg_exact_solution(&p);
    let mut text = String::new();
    let _ = writeln!(text, "v_star {:.16e}", exact.v_star);
    let _ = writeln!(text, "u_star {:.16e}", exact.u_star);
    let _ = writeln!(text, "locus_radius_sq {:.16e}", exact.locus_radius_sq);

    // Expected-total-reward surface over the design box, 0.05 step.
    let mut surface = String::from("d0,d1,expected_total_reward\n");
    let steps = 58;
    for i in 0..=steps {
        let d0 = p.design_lo + 0.05 * i as f64;
        for j in 0..=steps {
            let d1 = p.design_lo + 0.05 * j as f64;
            let _ = writeln!(
                surface,
                "{:.16e},{:.16e},{:.16e}",
                d0,
                d1,
                lg_expected_total_reward(&p, d0, d1)
            );
        }
    }

    write_file(out, "config.txt", &cfg.echo())?;
    write_file(out, "exact.txt", &text)?;
    write_file(out, "surface.csv", &surface)?;
    eprintln!(
        "lg exact: v* {:.7}, U* {:.7}, locus radius^2 {:.7}",
        exact.v_star, exact.u_star, exact.locus_radius_sq
    );
    Ok(())
}
