//! Belief-state representations: an exact Gaussian for conjugate problems and
//! an adaptive density grid for everything else.

mod grid;

pub use grid::GridBelief;

use crate::error::{Error, Result};
use crate::problem::{Obs, Problem};
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Floor applied to variances before logs or divisions.
pub const VAR_FLOOR: f64 = 1e-12;

/// KL divergence between the Gaussians matching the two moment pairs.
///
/// Non-Gaussian beliefs are compared through their first two moments
/// everywhere in this crate, so this is the single divergence used for
/// terminal rewards and greedy gains.
pub fn kl_gaussian(mean1: f64, var1: f64, mean0: f64, var0: f64) -> f64 {
    let v1 = var1.max(VAR_FLOOR);
    let v0 = var0.max(VAR_FLOOR);
    0.5 * ((v0 / v1).ln() + v1 / v0 + (mean1 - mean0) * (mean1 - mean0) / v0 - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: f64,
    pub var: f64,
}

impl GaussianBelief {
    /// Conjugate update for a linear observation `y = coeff·θ + ε`,
    /// ε ~ N(0, noise_var). The posterior variance does not depend on y.
    pub fn update(&self, coeff: f64, y: f64, noise_var: f64) -> GaussianBelief {
        let prec = 1.0 / self.var + coeff * coeff / noise_var;
        let var = 1.0 / prec;
        let mean = var * (self.mean / self.var + coeff * y / noise_var);
        GaussianBelief { mean, var }
    }
}

#[derive(Clone, Debug)]
pub enum Belief {
    Gaussian(GaussianBelief),
    Grid(GridBelief),
}

impl Belief {
    pub fn mean(&self) -> f64 {
        match self {
            Belief::Gaussian(b) => b.mean,
            Belief::Grid(g) => g.mean(),
        }
    }

    pub fn var(&self) -> f64 {
        match self {
            Belief::Gaussian(b) => b.var,
            Belief::Grid(g) => g.var(),
        }
    }

    pub fn log_var(&self) -> f64 {
        self.var().max(VAR_FLOOR).ln()
    }

    /// Draws θ from the belief distribution.
    pub fn sample_theta(&self, rng: &mut ChaCha12Rng) -> f64 {
        match self {
            Belief::Gaussian(b) => {
                let xi: f64 = rng.sample(StandardNormal);
                b.mean + b.var.max(VAR_FLOOR).sqrt() * xi
            }
            Belief::Grid(g) => g.sample(rng.gen::<f64>()),
        }
    }

    /// Conditions the belief on observation `y` taken under `obs`.
    pub fn update(&self, problem: &dyn Problem, obs: &Obs, y: f64) -> Result<Belief> {
        match self {
            Belief::Gaussian(b) => {
                let coeff = problem.linear_coeff(obs).ok_or_else(|| {
                    Error::Config(format!(
                        "analytical belief requires a linear observation model; problem '{}' has none",
                        problem.name()
                    ))
                })?;
                Ok(Belief::Gaussian(b.update(coeff, y, obs.noise_var)))
            }
            Belief::Grid(g) => {
                let inv2 = 0.5 / obs.noise_var;
                let next = g.update(|theta| {
                    let r = y - problem.predict(theta, obs);
                    -r * r * inv2
                })?;
                Ok(Belief::Grid(next))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kl_known_values() {
        assert!((kl_gaussian(0.0, 0.9, 0.0, 9.0) - 0.701_292_5).abs() < 1e-6);
        assert!((kl_gaussian(1.0, 4.0, 0.0, 4.0) - 0.125).abs() < 1e-12);
        assert_eq!(kl_gaussian(2.0, 3.0, 2.0, 3.0), 0.0);
    }

    #[test]
    fn conjugate_update_matches_precision_form() {
        // prior N(0,9), y = θ·1 + ε with σ² = 1, y = 2 → posterior N(1.8, 0.9)
        let b = GaussianBelief { mean: 0.0, var: 9.0 };
        let p = b.update(1.0, 2.0, 1.0);
        assert!((p.mean - 1.8).abs() < 1e-12);
        assert!((p.var - 0.9).abs() < 1e-12);
    }
}
