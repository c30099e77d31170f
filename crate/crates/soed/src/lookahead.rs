//! One-step lookahead objective: the expected immediate reward of a design
//! plus a continuation term evaluated at the next belief state.
//!
//! Only the next belief's first two moments enter any continuation, so the
//! grid path stays on the current nodes (no regrid) and the Gaussian path is
//! closed-form per sample.

use crate::belief::{kl_gaussian, Belief, VAR_FLOOR};
use crate::error::{Error, Result};
use crate::optimize::StochasticObjective;
use crate::problem::Problem;
use crate::value::LinearValue;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy)]
pub enum Continuation<'a> {
    /// Next stage is the horizon: apply the problem's terminal reward.
    Terminal,
    /// Evaluate a fitted value function at the next state's features.
    Value(&'a LinearValue),
    /// Information gained over the given reference moments (greedy designs).
    GainOver { mean: f64, var: f64 },
}

pub struct Lookahead<'a> {
    pub problem: &'a dyn Problem,
    pub belief: &'a Belief,
    pub position: f64,
    pub stage: usize,
    pub continuation: Continuation<'a>,
}

impl<'a> Lookahead<'a> {
    fn continuation_reward(&self, m1: f64, v1: f64, z_next: f64) -> f64 {
        match self.continuation {
            Continuation::Terminal => {
                let (pm, pv) = self.problem.prior();
                let kl = kl_gaussian(m1, v1, pm, pv);
                self.problem.terminal_reward(kl, v1)
            }
            Continuation::Value(value) => value.eval(m1, v1.max(VAR_FLOOR).ln(), z_next),
            Continuation::GainOver { mean, var } => kl_gaussian(m1, v1, mean, var),
        }
    }
}

impl<'a> StochasticObjective for Lookahead<'a> {
    fn estimate(&self, d: f64, n: usize, rng: &mut ChaCha12Rng) -> Result<(f64, f64)> {
        let obs = self
            .problem
            .make_obs(self.stage, self.position, d, self.belief.var());
        let stage_reward = self.problem.stage_reward(d);
        let noise_sd = obs.noise_var.sqrt();
        let mut mean = 0.0;
        let mut m2 = 0.0;
        match self.belief {
            Belief::Gaussian(b) => {
                let coeff = self.problem.linear_coeff(&obs).ok_or_else(|| {
                    Error::Config(format!(
                        "analytical belief requires a linear observation model; problem '{}' has none",
                        self.problem.name()
                    ))
                })?;
                let prec1 = 1.0 / b.var + coeff * coeff / obs.noise_var;
                let v1 = 1.0 / prec1;
                for i in 0..n {
                    let theta = b.mean + b.var.max(VAR_FLOOR).sqrt() * rng.sample::<f64, _>(StandardNormal);
                    let y = self.problem.predict(theta, &obs) + noise_sd * rng.sample::<f64, _>(StandardNormal);
                    let m1 = v1 * (b.mean / b.var + coeff * y / obs.noise_var);
                    let r = stage_reward + self.continuation_reward(m1, v1, obs.z_next);
                    let delta = r - mean;
                    mean += delta / (i + 1) as f64;
                    m2 += delta * (r - mean);
                }
            }
            Belief::Grid(g) => {
                let pred: Vec<f64> = g.nodes().iter().map(|&x| self.problem.predict(x, &obs)).collect();
                let mut scratch = Vec::with_capacity(g.len());
                for i in 0..n {
                    let theta = g.sample(rng.gen::<f64>());
                    let y = self.problem.predict(theta, &obs) + noise_sd * rng.sample::<f64, _>(StandardNormal);
                    let (m1, v1) = g.posterior_moments(&pred, y, obs.noise_var, &mut scratch);
                    let r = stage_reward + self.continuation_reward(m1, v1, obs.z_next);
                    let delta = r - mean;
                    mean += delta / (i + 1) as f64;
                    m2 += delta * (r - mean);
                }
            }
        }
        let se = if n > 1 {
            (m2 / (n as f64 * (n - 1) as f64)).sqrt()
        } else {
            0.0
        };
        if !mean.is_finite() {
            return Err(Error::Numerical(format!(
                "lookahead objective diverged at design {d}"
            )));
        }
        Ok((mean, se))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{GaussianBelief, GridBelief};
    use crate::problem::LinearGaussian;
    use crate::rng::rng_for;

    /// Closed-form expectation of the terminal reward one step ahead for the
    /// linear-Gaussian problem: with belief N(s,v) and design d the posterior
    /// variance is deterministic and E[m1²] = s² + v − v1.
    fn lg_terminal_lookahead(s: f64, v: f64, d: f64) -> f64 {
        let p = LinearGaussian::new();
        let v1 = 1.0 / (1.0 / v + d * d / p.noise);
        0.5 * ((p.prior_var / v1).ln() + (s * s + v) / p.prior_var - 1.0)
            - p.variance_penalty * ((v1.ln() - p.target_var.ln()).powi(2))
    }

    #[test]
    fn gaussian_path_matches_closed_form() {
        let p = LinearGaussian::new();
        let belief = Belief::Gaussian(GaussianBelief { mean: 1.2, var: 2.5 });
        let look = Lookahead {
            problem: &p,
            belief: &belief,
            position: 0.0,
            stage: 1,
            continuation: Continuation::Terminal,
        };
        let mut rng = rng_for(42, &[0]);
        let (est, se) = look.estimate(0.8, 40_000, &mut rng).unwrap();
        let truth = lg_terminal_lookahead(1.2, 2.5, 0.8);
        assert!((truth - (-0.235_613_8)).abs() < 1e-6);
        assert!(
            (est - truth).abs() < 4.0 * se + 1e-3,
            "estimate {est} vs closed form {truth} (se {se})"
        );
    }

    #[test]
    fn grid_path_agrees_with_gaussian_path() {
        let p = LinearGaussian::new();
        let grid = GridBelief::from_gaussian(1.2, 2.5, 200).unwrap();
        let belief = Belief::Grid(grid);
        let look = Lookahead {
            problem: &p,
            belief: &belief,
            position: 0.0,
            stage: 1,
            continuation: Continuation::Terminal,
        };
        let mut rng = rng_for(43, &[0]);
        let (est, se) = look.estimate(0.8, 40_000, &mut rng).unwrap();
        let truth = lg_terminal_lookahead(1.2, 2.5, 0.8);
        assert!(
            (est - truth).abs() < 4.0 * se + 0.01,
            "estimate {est} vs closed form {truth} (se {se})"
        );
    }

    #[test]
    fn expected_incremental_gain_is_half_log_variance_ratio() {
        // For a conjugate update the expected KL of posterior over prior
        // moments reduces to 0.5·ln(v0/v1).
        let p = LinearGaussian::new();
        let belief = Belief::Gaussian(GaussianBelief { mean: 0.0, var: 9.0 });
        let look = Lookahead {
            problem: &p,
            belief: &belief,
            position: 0.0,
            stage: 0,
            continuation: Continuation::GainOver { mean: 0.0, var: 9.0 },
        };
        let mut rng = rng_for(44, &[0]);
        let (est, se) = look.estimate(1.0, 40_000, &mut rng).unwrap();
        let v1 = 1.0 / (1.0 / 9.0 + 1.0);
        let truth = 0.5 * (9.0_f64 / v1).ln();
        assert!((truth - 1.151_292_5).abs() < 1e-6);
        assert!(
            (est - truth).abs() < 4.0 * se + 1e-3,
            "estimate {est} vs {truth} (se {se})"
        );
    }

    #[test]
    fn zero_value_continuation_reduces_to_stage_reward() {
        use crate::value::{FeatureBasis, LinearValue};
        let p = LinearGaussian::new();
        let belief = Belief::Gaussian(GaussianBelief { mean: 0.0, var: 9.0 });
        let zero = LinearValue::zero(FeatureBasis { physical: false });
        let look = Lookahead {
            problem: &p,
            belief: &belief,
            position: 0.0,
            stage: 0,
            continuation: Continuation::Value(&zero),
        };
        let mut rng = rng_for(45, &[0]);
        let (est, _) = look.estimate(1.7, 200, &mut rng).unwrap();
        assert_eq!(est, 0.0);
    }
}
