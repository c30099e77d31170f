//! Sequential optimal experimental design by approximate dynamic programming.
//!
//! The library plans adaptive measurement campaigns for a scalar unknown:
//! a finite-horizon dynamic program over a belief state (the posterior of the
//! unknown) plus optional physical state, solved approximately by fitting
//! linear value functions over moment features via backward induction on
//! simulated trajectories, with designs chosen through one-step lookahead and
//! a Kiefer-Wolfowitz stochastic optimizer. Greedy, open-loop, and random
//! baselines share the same simulation and assessment machinery, and every
//! run is a deterministic function of its seed regardless of worker count.

pub mod assess;
pub mod baseline;
pub mod belief;
pub mod error;
pub mod lookahead;
pub mod optimize;
pub mod problem;
pub mod rng;
pub mod solver;
pub mod value;

pub use assess::{
    assess, histogram, lg_exact_solution, lg_expected_total_reward, lg_optimal_stage1,
    lg_stage1_expected, AssessReport, AssessSettings, Histogram, LgExact, TrajectoryRecord,
};
pub use baseline::{batch_optimize, batch_plan_value, BATCH_SWEEPS};
pub use belief::{kl_gaussian, Belief, GaussianBelief, GridBelief, VAR_FLOOR};
pub use error::{Error, Result};
pub use lookahead::{Continuation, Lookahead};
pub use optimize::{maximize, KwOutcome, KwSettings, StochasticObjective};
pub use problem::{project_design, LinearGaussian, NoiseTier, Obs, Plume, Problem, ProblemId};
pub use rng::{derive_seed, rng_for};
pub use solver::{
    simulate, solve, ExploreMeasure, IterationReport, Policy, RegressionRecord, Repr, SimOutcome,
    SimSpec, Solution, SolveSettings, StageFit, StagePoint,
};
pub use value::{fit_linear_value, FeatureBasis, FitDiagnostics, LinearValue};
