use super::{Obs, Problem};

/// Scalar linear-Gaussian benchmark: `y = θ·d + ε`, conjugate posterior, two
/// experiments, no physical state. The terminal reward is the information
/// gain penalized for missing a target posterior variance, which makes the
/// optimal design split measurement effort across both stages.
#[derive(Clone, Debug)]
pub struct LinearGaussian {
    pub horizon: usize,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub noise: f64,
    pub design_lo: f64,
    pub design_hi: f64,
    /// Posterior variance the terminal reward is anchored to.
    pub target_var: f64,
    /// Weight of the squared log-variance miss in the terminal reward.
    pub variance_penalty: f64,
}

impl LinearGaussian {
    pub fn new() -> LinearGaussian {
        LinearGaussian {
            horizon: 2,
            prior_mean: 0.0,
            prior_var: 9.0,
            noise: 1.0,
            design_lo: 0.1,
            design_hi: 3.0,
            target_var: 2.0,
            variance_penalty: 2.0,
        }
    }
}

impl Default for LinearGaussian {
    fn default() -> Self {
        LinearGaussian::new()
    }
}

impl Problem for LinearGaussian {
    fn name(&self) -> &'static str {
        "lg"
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn design_box(&self) -> (f64, f64) {
        (self.design_lo, self.design_hi)
    }

    fn prior(&self) -> (f64, f64) {
        (self.prior_mean, self.prior_var)
    }

    fn initial_physical(&self) -> Option<f64> {
        None
    }

    fn noise_var(&self, _belief_var: f64) -> f64 {
        self.noise
    }

    fn predict(&self, theta: f64, obs: &Obs) -> f64 {
        theta * obs.d
    }

    fn linear_coeff(&self, obs: &Obs) -> Option<f64> {
        Some(obs.d)
    }

    fn supports_analytical(&self) -> bool {
        true
    }

    fn stage_reward(&self, _d: f64) -> f64 {
        0.0
    }

    fn terminal_reward(&self, kl: f64, post_var: f64) -> f64 {
        let miss = post_var.max(crate::belief::VAR_FLOOR).ln() - self.target_var.ln();
        kl - self.variance_penalty * miss * miss
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::kl_gaussian;

    #[test]
    fn observation_model_is_linear_in_theta() {
        let p = LinearGaussian::new();
        let obs = p.make_obs(0, 0.0, 1.7, p.prior_var);
        assert_eq!(p.predict(2.0, &obs), 3.4);
        assert_eq!(p.linear_coeff(&obs), Some(1.7));
        assert_eq!(obs.noise_var, 1.0);
        assert_eq!(obs.z_next, 0.0, "no physical state to move");
    }

    #[test]
    fn terminal_reward_hand_values() {
        let p = LinearGaussian::new();
        // final posterior N(0,2): on-target variance, reward is the KL alone
        let kl = kl_gaussian(0.0, 2.0, 0.0, 9.0);
        assert!((p.terminal_reward(kl, 2.0) - 0.363_149_8).abs() < 1e-6);
        // untouched prior: zero gain, full variance penalty
        assert!((p.terminal_reward(0.0, 9.0) - (-4.524_497_6)).abs() < 1e-6);
        // matched variance with zero gain loses nothing
        assert_eq!(p.terminal_reward(0.0, 2.0), 0.0);
    }
}
