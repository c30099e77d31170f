//! Policy assessment: simulate trajectories under a policy's native belief
//! representation, then re-score every trajectory under one common inference
//! framework so different policies are compared on equal footing. Also hosts
//! the closed-form solution of the linear-Gaussian benchmark.

use crate::belief::{kl_gaussian, Belief};
use crate::error::{Error, Result};
use crate::optimize::KwSettings;
use crate::problem::{LinearGaussian, Problem};
use crate::rng::derive_seed;
use crate::solver::{simulate, ExploreMeasure, Policy, Repr, SimSpec};
use rayon::prelude::*;

pub const HISTOGRAM_BINS: usize = 40;

#[derive(Clone, Copy, Debug)]
pub struct AssessSettings {
    pub trajectories: usize,
    /// Representation the policy runs on.
    pub repr: Repr,
    /// Common framework that re-scores every trajectory.
    pub framework: Repr,
    pub explore: ExploreMeasure,
    pub kw: KwSettings,
    pub seed: u64,
    pub workers: usize,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub theta: f64,
    pub designs: Vec<f64>,
    pub observations: Vec<f64>,
    /// Total reward under the common framework's inference.
    pub total_reward: f64,
    /// Whether the framework's re-inference unlocked the better sensor tier
    /// at any stage, judged on the belief variance before that stage.
    pub qualified: bool,
}

#[derive(Clone, Debug)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(values: &[f64], bins: usize) -> Histogram {
    let bins = bins.max(1);
    if values.is_empty() {
        return Histogram {
            edges: vec![0.0; bins + 1],
            counts: vec![0; bins],
        };
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let edges: Vec<f64> = (0..=bins)
        .map(|i| lo + span * i as f64 / bins as f64)
        .collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let i = (((v - lo) / span * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    Histogram { edges, counts }
}

#[derive(Clone, Debug)]
pub struct AssessReport {
    pub policy: String,
    pub requested: usize,
    pub completed: usize,
    /// Trajectories excluded because inference degenerated; they are counted,
    /// never resampled, so the estimate stays unbiased.
    pub degenerate: usize,
    pub mean: f64,
    pub se: f64,
    pub qualified_fraction: f64,
    pub trajectories: Vec<TrajectoryRecord>,
    pub histogram: Histogram,
}

/// Re-runs inference for one executed campaign under the framework belief,
/// resolving the sensor tier from the framework's own variance at each stage.
fn replay(
    problem: &dyn Problem,
    framework_prior: &Belief,
    designs: &[f64],
    observations: &[f64],
) -> Result<(f64, bool)> {
    let mut belief = framework_prior.clone();
    let mut position = problem.initial_physical().unwrap_or(0.0);
    let mut total = 0.0;
    let mut qualified = false;
    for (k, (&d, &y)) in designs.iter().zip(observations.iter()).enumerate() {
        let pre_var = belief.var();
        if problem.qualified_at(pre_var) {
            qualified = true;
        }
        let obs = problem.make_obs(k, position, d, pre_var);
        total += problem.stage_reward(d);
        belief = belief.update(problem, &obs, y)?;
        position = obs.z_next;
    }
    let (pm, pv) = problem.prior();
    let kl = kl_gaussian(belief.mean(), belief.var(), pm, pv);
    total += problem.terminal_reward(kl, belief.var());
    Ok((total, qualified))
}

pub fn assess(problem: &dyn Problem, policy: Policy, settings: &AssessSettings) -> Result<AssessReport> {
    if settings.trajectories == 0 {
        return Err(Error::Config("assessment needs at least one trajectory".into()));
    }
    let native_prior = settings.repr.prior(problem)?;
    let framework_prior = settings.framework.prior(problem)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<Option<TrajectoryRecord>> = pool.install(|| {
        (0..settings.trajectories)
            .into_par_iter()
            .map(|t| {
                let spec = SimSpec {
                    problem,
                    prior: &native_prior,
                    policy,
                    explore: settings.explore,
                    kw: settings.kw,
                    collect_states: false,
                    seed: derive_seed(settings.seed, &[t as u64]),
                };
                let native = match simulate(&spec) {
                    Ok(o) => o,
                    Err(Error::DegeneratePosterior) => return Ok(None),
                    Err(e) => return Err(e),
                };
                match replay(problem, &framework_prior, &native.designs, &native.observations) {
                    Ok((total, qualified)) => Ok(Some(TrajectoryRecord {
                        theta: native.theta,
                        designs: native.designs,
                        observations: native.observations,
                        total_reward: total,
                        qualified,
                    })),
                    Err(Error::DegeneratePosterior) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut trajectories = Vec::with_capacity(settings.trajectories);
    let mut degenerate = 0usize;
    for r in results {
        match r {
            Some(rec) => trajectories.push(rec),
            None => degenerate += 1,
        }
    }
    let completed = trajectories.len();
    if completed == 0 {
        return Err(Error::Numerical(
            "every assessment trajectory degenerated".into(),
        ));
    }
    let rewards: Vec<f64> = trajectories.iter().map(|t| t.total_reward).collect();
    let mean = rewards.iter().sum::<f64>() / completed as f64;
    let var = if completed > 1 {
        rewards.iter().map(|&r| (r - mean) * (r - mean)).sum::<f64>() / (completed - 1) as f64
    } else {
        0.0
    };
    let se = (var / completed as f64).sqrt();
    let qualified = trajectories.iter().filter(|t| t.qualified).count();
    Ok(AssessReport {
        policy: policy.label().to_string(),
        requested: settings.trajectories,
        completed,
        degenerate,
        mean,
        se,
        qualified_fraction: qualified as f64 / completed as f64,
        histogram: histogram(&rewards, HISTOGRAM_BINS),
        trajectories,
    })
}

/// Closed-form optimum of the linear-Gaussian benchmark.
#[derive(Clone, Copy, Debug)]
pub struct LgExact {
    /// Optimal final posterior variance.
    pub v_star: f64,
    /// Expected total reward of the optimal policy.
    pub u_star: f64,
    /// d_0² + d_1² on the locus of optimal design pairs.
    pub locus_radius_sq: f64,
}

/// The expected terminal reward depends on the designs only through the final
/// variance v: f(v) = 0.5·ln(σ0²/v) − p·(ln v − ln σT²)², maximized where
/// ln v* = ln σT² − 1/(4p). The locus follows from the precision identity
/// 1/v = 1/σ0² + (d_0² + d_1²)/σε².
pub fn lg_exact_solution(p: &LinearGaussian) -> LgExact {
    let ln_v = p.target_var.ln() - 0.25 / p.variance_penalty;
    let v_star = ln_v.exp();
    let u_star = 0.5 * (p.prior_var.ln() - ln_v)
        - p.variance_penalty * (ln_v - p.target_var.ln()) * (ln_v - p.target_var.ln());
    LgExact {
        v_star,
        u_star,
        locus_radius_sq: p.noise * (1.0 / v_star - 1.0 / p.prior_var),
    }
}

/// Expected total reward of the fixed pair (d0, d1), averaging over the prior
/// and both observations. E[KL] collapses to 0.5·ln(σ0²/v2).
pub fn lg_expected_total_reward(p: &LinearGaussian, d0: f64, d1: f64) -> f64 {
    let v2 = 1.0 / (1.0 / p.prior_var + (d0 * d0 + d1 * d1) / p.noise);
    0.5 * (p.prior_var / v2).ln()
        - p.variance_penalty * (v2.ln() - p.target_var.ln()) * (v2.ln() - p.target_var.ln())
}

/// Expected terminal reward one step ahead from the interim belief N(s1, v1)
/// under design d1: the posterior variance v2 is deterministic and
/// E[m2²] = s1² + v1 − v2, so E[KL] needs no sampling.
pub fn lg_stage1_expected(p: &LinearGaussian, s1: f64, v1: f64, d1: f64) -> f64 {
    let v2 = 1.0 / (1.0 / v1 + d1 * d1 / p.noise);
    0.5 * ((p.prior_var / v2).ln() + (s1 * s1 + v1) / p.prior_var - 1.0)
        - p.variance_penalty * (v2.ln() - p.target_var.ln()) * (v2.ln() - p.target_var.ln())
}

/// Optimal final design given the interim variance v1: reach v* exactly when
/// feasible, otherwise press the nearest box bound.
pub fn lg_optimal_stage1(p: &LinearGaussian, v1: f64) -> f64 {
    let exact = lg_exact_solution(p);
    let d_sq = p.noise * (1.0 / exact.v_star - 1.0 / v1);
    d_sq.max(0.0).sqrt().clamp(p.design_lo, p.design_hi)
}
