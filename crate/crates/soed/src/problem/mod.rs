//! Experiment-design problem definitions.
//!
//! A problem fixes the horizon, the design box, the Gaussian prior on the
//! scalar unknown θ, an observation model `y = predict(θ) + ε` with additive
//! Gaussian noise whose variance may depend on the current belief, and the
//! stage/terminal rewards.

mod linear_gaussian;
mod plume;

pub use linear_gaussian::LinearGaussian;
pub use plume::{NoiseTier, Plume};

use crate::error::{Error, Result};

/// Context of a single observation: stage, design, the physical position the
/// measurement is taken from, and the tier-resolved noise variance.
#[derive(Clone, Copy, Debug)]
pub struct Obs {
    pub k: usize,
    pub d: f64,
    pub z_next: f64,
    pub noise_var: f64,
}

pub trait Problem: Sync {
    fn name(&self) -> &'static str;

    /// Number of experiments N.
    fn horizon(&self) -> usize;

    /// Design bounds, identical at every stage.
    fn design_box(&self) -> (f64, f64);

    /// Prior mean and variance of θ.
    fn prior(&self) -> (f64, f64);

    /// Initial physical state, if the problem tracks one.
    fn initial_physical(&self) -> Option<f64>;

    /// Observation noise variance given the current belief variance.
    fn noise_var(&self, belief_var: f64) -> f64;

    /// Noiseless observation for parameter `theta` under `obs`.
    fn predict(&self, theta: f64, obs: &Obs) -> f64;

    /// If `predict(θ) = c·θ`, the coefficient `c`; enables the conjugate
    /// Gaussian belief.
    fn linear_coeff(&self, _obs: &Obs) -> Option<f64> {
        None
    }

    fn supports_analytical(&self) -> bool {
        false
    }

    /// Deterministic per-experiment reward (costs enter negatively).
    fn stage_reward(&self, d: f64) -> f64;

    /// Terminal reward from the final belief; `kl` is the divergence of the
    /// final posterior from the prior under the moment-matched Gaussians.
    fn terminal_reward(&self, kl: f64, post_var: f64) -> f64;

    /// Whether the noise variance actually varies with the belief.
    fn tiered(&self) -> bool {
        false
    }

    /// True when the belief has concentrated enough to unlock a better
    /// sensor than the one available under the prior.
    fn qualified_at(&self, belief_var: f64) -> bool {
        self.tiered() && self.noise_var(belief_var) < self.noise_var(self.prior().1)
    }

    /// Assembles the observation context for applying design `d` at stage
    /// `k` from physical position `z` with the given belief variance.
    fn make_obs(&self, k: usize, z: f64, d: f64, belief_var: f64) -> Obs {
        let z_next = if self.initial_physical().is_some() {
            z + d
        } else {
            0.0
        };
        Obs {
            k,
            d,
            z_next,
            noise_var: self.noise_var(belief_var),
        }
    }
}

/// Clamps a proposed design into the box.
pub fn project_design(problem: &dyn Problem, d: f64) -> f64 {
    let (lo, hi) = problem.design_box();
    d.clamp(lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemId {
    Lg,
    PlumeCase1,
    PlumeCase2,
    PlumeCase3,
}

impl ProblemId {
    pub fn parse(s: &str) -> Result<ProblemId> {
        match s {
            "lg" => Ok(ProblemId::Lg),
            "plume-case1" => Ok(ProblemId::PlumeCase1),
            "plume-case2" => Ok(ProblemId::PlumeCase2),
            "plume-case3" => Ok(ProblemId::PlumeCase3),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected lg, plume-case1, plume-case2, plume-case3)"
            ))),
        }
    }

    pub fn build(self) -> Box<dyn Problem> {
        match self {
            ProblemId::Lg => Box::new(LinearGaussian::new()),
            ProblemId::PlumeCase1 => Box::new(Plume::case1()),
            ProblemId::PlumeCase2 => Box::new(Plume::case2()),
            ProblemId::PlumeCase3 => Box::new(Plume::case3()),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::Lg => "lg",
            ProblemId::PlumeCase1 => "plume-case1",
            ProblemId::PlumeCase2 => "plume-case2",
            ProblemId::PlumeCase3 => "plume-case3",
        }
    }
}
