//! Trajectory simulation, backward induction with regression, and the outer
//! policy-update loop.

use crate::belief::{kl_gaussian, Belief, GaussianBelief, GridBelief};
use crate::error::{Error, Result};
use crate::lookahead::{Continuation, Lookahead};
use crate::optimize::{maximize, KwOutcome, KwSettings};
use crate::problem::{project_design, Problem};
use crate::rng::{derive_seed, rng_for};
use crate::value::{fit_linear_value, FeatureBasis, LinearValue};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Retries allowed when a solver-side trajectory hits a degenerate posterior;
/// each retry reruns the trajectory under a fresh derived seed so regression
/// point counts stay exact.
const RESAMPLE_ATTEMPTS: u64 = 20;

/// Belief representation used to run a policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Repr {
    Analytical,
    Grid { nodes: usize },
}

impl Repr {
    /// Builds the prior belief in this representation.
    pub fn prior(&self, problem: &dyn Problem) -> Result<Belief> {
        let (pm, pv) = problem.prior();
        match *self {
            Repr::Analytical => {
                if !problem.supports_analytical() {
                    return Err(Error::Config(format!(
                        "problem '{}' has no analytical belief representation",
                        problem.name()
                    )));
                }
                Ok(Belief::Gaussian(GaussianBelief { mean: pm, var: pv }))
            }
            Repr::Grid { nodes } => {
                if nodes < 10 {
                    return Err(Error::Config(format!(
                        "grid representation needs at least 10 nodes, got {nodes}"
                    )));
                }
                Ok(Belief::Grid(GridBelief::from_gaussian(pm, pv, nodes)?))
            }
        }
    }

    pub fn parse(s: &str) -> Result<Repr> {
        if s == "analytical" {
            return Ok(Repr::Analytical);
        }
        if let Some(inner) = s.strip_prefix("grid(").and_then(|r| r.strip_suffix(')')) {
            let nodes: usize = inner
                .parse()
                .map_err(|_| Error::Config(format!("bad grid node count '{inner}'")))?;
            return Ok(Repr::Grid { nodes });
        }
        Err(Error::Config(format!(
            "unknown representation '{s}' (expected analytical or grid(m))"
        )))
    }
}

impl std::fmt::Display for Repr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Repr::Analytical => write!(f, "analytical"),
            Repr::Grid { nodes } => write!(f, "grid({nodes})"),
        }
    }
}

/// Design measure used for exploration trajectories and as the fallback when
/// a design optimization fails.
#[derive(Clone, Copy, Debug)]
pub struct ExploreMeasure {
    pub mean: f64,
    pub var: f64,
}

impl ExploreMeasure {
    pub fn draw(&self, problem: &dyn Problem, rng: &mut ChaCha12Rng) -> f64 {
        let xi: f64 = rng.sample(StandardNormal);
        project_design(problem, self.mean + self.var.max(0.0).sqrt() * xi)
    }
}

/// How designs are chosen along a simulated trajectory.
#[derive(Clone, Copy)]
pub enum Policy<'a> {
    /// One-step lookahead against fitted value functions; `values[k]`
    /// approximates the value of the stage-(k+1) state, and the last stage
    /// uses the terminal reward directly.
    Lookahead(&'a [LinearValue]),
    /// Maximize expected stage reward plus incremental information gain.
    Greedy,
    /// Fixed open-loop design vector, one entry per stage.
    Batch(&'a [f64]),
    /// Draw every design from the exploration measure.
    Explore,
}

impl<'a> Policy<'a> {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::Lookahead(_) => "soed",
            Policy::Greedy => "greedy",
            Policy::Batch(_) => "batch",
            Policy::Explore => "exploration",
        }
    }
}

/// A state visited at an interior stage, kept as a regression point.
#[derive(Clone)]
pub struct StagePoint {
    pub stage: usize,
    pub belief: Belief,
    pub position: f64,
    pub intermediate: bool,
}

impl StagePoint {
    /// Regression features: posterior mean, posterior log-variance, position.
    pub fn features(&self) -> (f64, f64, f64) {
        (self.belief.mean(), self.belief.log_var(), self.position)
    }
}

pub struct SimSpec<'a> {
    pub problem: &'a dyn Problem,
    pub prior: &'a Belief,
    pub policy: Policy<'a>,
    pub explore: ExploreMeasure,
    pub kw: KwSettings,
    /// Collect interior states (and optimizer intermediates) for regression.
    pub collect_states: bool,
    pub seed: u64,
}

pub struct SimOutcome {
    pub theta: f64,
    pub designs: Vec<f64>,
    pub observations: Vec<f64>,
    pub noise_vars: Vec<f64>,
    /// Total reward evaluated with the native belief representation.
    pub total_reward: f64,
    /// Whether any stage unlocked the problem's better sensor tier, judged on
    /// the native belief variance before that stage's update.
    pub qualified: bool,
    pub states: Vec<StagePoint>,
    pub intermediates: Vec<StagePoint>,
    /// Design optimizations that failed and fell back to the exploration measure.
    pub fallbacks: usize,
}

fn policy_design(
    problem: &dyn Problem,
    belief: &Belief,
    position: f64,
    k: usize,
    policy: &Policy,
    explore: &ExploreMeasure,
    kw: &KwSettings,
    kw_seed: u64,
    rng: &mut ChaCha12Rng,
    fallbacks: &mut usize,
) -> (f64, Option<KwOutcome>) {
    let horizon = problem.horizon();
    let continuation = match policy {
        Policy::Lookahead(values) => {
            if k + 1 == horizon {
                Continuation::Terminal
            } else {
                Continuation::Value(&values[k])
            }
        }
        Policy::Greedy => Continuation::GainOver {
            mean: belief.mean(),
            var: belief.var(),
        },
        Policy::Batch(ds) => return (project_design(problem, ds[k]), None),
        Policy::Explore => return (explore.draw(problem, rng), None),
    };
    let look = Lookahead {
        problem,
        belief,
        position,
        stage: k,
        continuation,
    };
    let (lo, hi) = problem.design_box();
    match maximize(&look, lo, hi, kw, kw_seed) {
        Ok(out) => (out.design, Some(out)),
        Err(_) => {
            *fallbacks += 1;
            (explore.draw(problem, rng), None)
        }
    }
}

/// Runs one trajectory from the prior. Deterministic given `spec.seed`.
pub fn simulate(spec: &SimSpec) -> Result<SimOutcome> {
    let problem = spec.problem;
    let horizon = problem.horizon();
    if let Policy::Lookahead(values) = spec.policy {
        if values.len() + 1 != horizon {
            return Err(Error::Config(format!(
                "policy carries {} value functions but horizon {} needs {}",
                values.len(),
                horizon,
                horizon - 1
            )));
        }
    }
    if let Policy::Batch(ds) = spec.policy {
        if ds.len() != horizon {
            return Err(Error::Config(format!(
                "batch design has {} entries but horizon is {}",
                ds.len(),
                horizon
            )));
        }
    }
    let mut rng = rng_for(spec.seed, &[0]);
    let (prior_mean, prior_var) = problem.prior();
    let theta = prior_mean + prior_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    let mut belief = spec.prior.clone();
    let mut position = problem.initial_physical().unwrap_or(0.0);
    let mut total = 0.0;
    let mut qualified = false;
    let mut fallbacks = 0usize;
    let mut designs = Vec::with_capacity(horizon);
    let mut observations = Vec::with_capacity(horizon);
    let mut noise_vars = Vec::with_capacity(horizon);
    let mut states = Vec::new();
    let mut intermediates = Vec::new();
    for k in 0..horizon {
        let pre_var = belief.var();
        if problem.qualified_at(pre_var) {
            qualified = true;
        }
        let kw_seed = derive_seed(spec.seed, &[1, k as u64]);
        let (design, outcome) = policy_design(
            problem,
            &belief,
            position,
            k,
            &spec.policy,
            &spec.explore,
            &spec.kw,
            kw_seed,
            &mut rng,
            &mut fallbacks,
        );
        // Harvest one extra regression state per optimized stage from the
        // strongest restart endpoint that was not chosen.
        if spec.collect_states && k + 1 < horizon {
            if let Some(out) = &outcome {
                let mut alt = None;
                for ri in 0..3 {
                    if ri == out.chosen {
                        continue;
                    }
                    if alt.map_or(true, |a: usize| out.values[ri] > out.values[a]) {
                        alt = Some(ri);
                    }
                }
                if let Some(ai) = alt {
                    let d_alt = out.endpoints[ai];
                    let obs_alt = problem.make_obs(k, position, d_alt, pre_var);
                    let y_alt = problem.predict(theta, &obs_alt)
                        + obs_alt.noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
                    if let Ok(b_alt) = belief.update(problem, &obs_alt, y_alt) {
                        intermediates.push(StagePoint {
                            stage: k + 1,
                            belief: b_alt,
                            position: obs_alt.z_next,
                            intermediate: true,
                        });
                    }
                }
            }
        }
        let obs = problem.make_obs(k, position, design, pre_var);
        let y = problem.predict(theta, &obs)
            + obs.noise_var.sqrt() * rng.sample::<f64, _>(StandardNormal);
        total += problem.stage_reward(design);
        belief = belief.update(problem, &obs, y)?;
        position = obs.z_next;
        designs.push(design);
        observations.push(y);
        noise_vars.push(obs.noise_var);
        if spec.collect_states && k + 1 < horizon {
            states.push(StagePoint {
                stage: k + 1,
                belief: belief.clone(),
                position,
                intermediate: false,
            });
        }
    }
    let kl = kl_gaussian(belief.mean(), belief.var(), prior_mean, prior_var);
    total += problem.terminal_reward(kl, belief.var());
    Ok(SimOutcome {
        theta,
        designs,
        observations,
        noise_vars,
        total_reward: total,
        qualified,
        states,
        intermediates,
        fallbacks,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct StageFit {
    pub stage: usize,
    /// Trajectory-visited regression points.
    pub visited: usize,
    /// Optimizer-intermediate points added to the pool.
    pub intermediates: usize,
    /// Points dropped because their target optimization failed.
    pub dropped: usize,
    pub residual_rms: f64,
}

#[derive(Clone, Debug)]
pub struct RegressionRecord {
    pub update: usize,
    pub stage: usize,
    pub s: f64,
    pub u: f64,
    pub z: f64,
    pub target: f64,
    pub intermediate: bool,
}

#[derive(Clone, Debug)]
pub struct IterationReport {
    pub update: usize,
    pub explore_trajectories: usize,
    pub exploit_trajectories: usize,
    /// Policy-side optimizer failures that fell back to exploration draws.
    pub fallbacks: usize,
    pub fits: Vec<StageFit>,
}

pub struct Solution {
    pub basis: FeatureBasis,
    /// Value functions per policy update: `by_update[l-1][k-1]` approximates
    /// the value of a stage-k state after update l.
    pub by_update: Vec<Vec<LinearValue>>,
    pub reports: Vec<IterationReport>,
    pub regression_points: Vec<RegressionRecord>,
}

impl Solution {
    pub fn final_values(&self) -> &[LinearValue] {
        self.by_update.last().expect("at least one policy update")
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveSettings {
    /// Policy updates L.
    pub updates: usize,
    /// Regression trajectories per update (visited points per stage).
    pub points_per_stage: usize,
    pub explore: ExploreMeasure,
    /// Share of trajectories driven by the previous policy from the second
    /// update onward; the first update is pure exploration.
    pub exploit_frac: f64,
    pub kw: KwSettings,
    pub repr: Repr,
    pub seed: u64,
    /// Worker threads; 0 means one per available core. The result is
    /// identical for any worker count.
    pub workers: usize,
}

fn validate(settings: &SolveSettings, basis: FeatureBasis) -> Result<()> {
    if settings.updates == 0 {
        return Err(Error::Config("need at least one policy update".into()));
    }
    if settings.points_per_stage < basis.len() {
        return Err(Error::Config(format!(
            "{} regression points cannot fit {} coefficients",
            settings.points_per_stage,
            basis.len()
        )));
    }
    if !(0.0..=1.0).contains(&settings.exploit_frac) {
        return Err(Error::Config("exploitation fraction must lie in [0,1]".into()));
    }
    if settings.explore.var < 0.0 || !settings.explore.var.is_finite() {
        return Err(Error::Config("exploration variance must be finite and non-negative".into()));
    }
    Ok(())
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs the full policy-update loop: simulate regression trajectories
/// (exploration first, mixed with exploitation from the second update),
/// then fit value functions by backward induction over optimized targets.
pub fn solve(problem: &dyn Problem, settings: &SolveSettings) -> Result<Solution> {
    let basis = FeatureBasis {
        physical: problem.initial_physical().is_some(),
    };
    validate(settings, basis)?;
    let horizon = problem.horizon();
    let prior = settings.repr.prior(problem)?;
    let points = settings.points_per_stage;
    let pool = thread_pool(settings.workers)?;
    let mut by_update: Vec<Vec<LinearValue>> = Vec::with_capacity(settings.updates);
    let mut reports = Vec::with_capacity(settings.updates);
    let mut regression_points = Vec::new();
    for l in 1..=settings.updates {
        let prev = by_update.last();
        let exploit_count = if prev.is_none() {
            0
        } else {
            ((settings.exploit_frac * points as f64).round() as usize).min(points)
        };
        let outcomes: Vec<SimOutcome> = pool.install(|| {
            (0..points)
                .into_par_iter()
                .map(|q| {
                    let policy = if q < exploit_count {
                        Policy::Lookahead(prev.expect("exploitation requires a previous policy"))
                    } else {
                        Policy::Explore
                    };
                    let mut last_err = None;
                    for attempt in 0..RESAMPLE_ATTEMPTS {
                        let spec = SimSpec {
                            problem,
                            prior: &prior,
                            policy,
                            explore: settings.explore,
                            kw: settings.kw,
                            collect_states: true,
                            seed: derive_seed(settings.seed, &[l as u64, 1, q as u64, attempt]),
                        };
                        match simulate(&spec) {
                            Ok(o) => return Ok(o),
                            Err(Error::DegeneratePosterior) => {
                                last_err = Some(Error::DegeneratePosterior);
                            }
                            Err(e) => return Err(e),
                        }
                    }
                    Err(last_err.unwrap_or(Error::DegeneratePosterior))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let fallbacks: usize = outcomes.iter().map(|o| o.fallbacks).sum();

        // Pool regression states per interior stage: every visited state,
        // then optimizer intermediates up to twice the visited count.
        let mut pools: Vec<Vec<StagePoint>> = vec![Vec::new(); horizon];
        for o in &outcomes {
            for st in &o.states {
                pools[st.stage].push(st.clone());
            }
        }
        let mut inter_counts = vec![0usize; horizon];
        for o in &outcomes {
            for st in &o.intermediates {
                if pools[st.stage].len() < 2 * points {
                    inter_counts[st.stage] += 1;
                    pools[st.stage].push(st.clone());
                }
            }
        }

        let mut slots: Vec<Option<LinearValue>> = vec![None; horizon.saturating_sub(1)];
        let mut fits = Vec::with_capacity(horizon.saturating_sub(1));
        for k in (1..horizon).rev() {
            let stage_pool = &pools[k];
            let targets: Vec<Option<(f64, f64, f64, f64)>> = pool.install(|| {
                (0..stage_pool.len())
                    .into_par_iter()
                    .map(|i| {
                        let pt = &stage_pool[i];
                        let continuation = if k + 1 == horizon {
                            Continuation::Terminal
                        } else {
                            Continuation::Value(slots[k].as_ref().expect("fitted by backward order"))
                        };
                        let look = Lookahead {
                            problem,
                            belief: &pt.belief,
                            position: pt.position,
                            stage: k,
                            continuation,
                        };
                        let (lo, hi) = problem.design_box();
                        let kw_seed = derive_seed(settings.seed, &[l as u64, 2, k as u64, i as u64]);
                        match maximize(&look, lo, hi, &settings.kw, kw_seed) {
                            Ok(out) => {
                                let (s, u, z) = pt.features();
                                Some((s, u, z, out.value))
                            }
                            Err(_) => None,
                        }
                    })
                    .collect()
            });
            let mut states = Vec::with_capacity(stage_pool.len());
            let mut ys = Vec::with_capacity(stage_pool.len());
            let mut dropped = 0usize;
            for (i, t) in targets.iter().enumerate() {
                match t {
                    Some((s, u, z, target)) => {
                        states.push((*s, *u, *z));
                        ys.push(*target);
                        regression_points.push(RegressionRecord {
                            update: l,
                            stage: k,
                            s: *s,
                            u: *u,
                            z: *z,
                            target: *target,
                            intermediate: stage_pool[i].intermediate,
                        });
                    }
                    None => dropped += 1,
                }
            }
            let (value, diag) = fit_linear_value(basis, &states, &ys).map_err(|e| {
                Error::Numerical(format!("update {l}, stage {k}: {e}"))
            })?;
            fits.push(StageFit {
                stage: k,
                visited: stage_pool.len() - inter_counts[k],
                intermediates: inter_counts[k],
                dropped,
                residual_rms: diag.residual_rms,
            });
            slots[k - 1] = Some(value);
        }
        fits.reverse();
        by_update.push(
            slots
                .into_iter()
                .map(|s| s.expect("every interior stage fitted"))
                .collect(),
        );
        reports.push(IterationReport {
            update: l,
            explore_trajectories: points - exploit_count,
            exploit_trajectories: exploit_count,
            fallbacks,
            fits,
        });
    }
    Ok(Solution {
        basis,
        by_update,
        reports,
        regression_points,
    })
}
