use super::{Obs, Problem};

/// Observation noise schedule with an optional precision upgrade: the better
/// sensor unlocks once the belief variance drops below the threshold.
#[derive(Clone, Copy, Debug)]
pub struct NoiseTier {
    pub coarse: f64,
    pub precise: f64,
    pub threshold: Option<f64>,
}

impl NoiseTier {
    pub fn fixed(var: f64) -> NoiseTier {
        NoiseTier {
            coarse: var,
            precise: var,
            threshold: None,
        }
    }

    fn variance(&self, belief_var: f64) -> f64 {
        match self.threshold {
            Some(t) if belief_var < t => self.precise,
            _ => self.coarse,
        }
    }
}

/// Contaminant source localization: a sensor vehicle measures the
/// concentration of a diffusing plume released at unknown position θ and
/// drifting with the wind. The vehicle pays for movement, and the design is
/// its per-stage displacement. The plume concentration at position z and
/// time t is a Gaussian bump of total strength `source_strength` centered at
/// θ plus the accumulated wind displacement, with squared width
/// `1.2 + 4·diffusion·t`. Observation k happens at time t = k+1.
#[derive(Clone, Debug)]
pub struct Plume {
    pub horizon: usize,
    pub wind_velocity: f64,
    pub noise: NoiseTier,
    pub prior_mean: f64,
    pub prior_var: f64,
    pub design_lo: f64,
    pub design_hi: f64,
    pub initial_position: f64,
    pub source_strength: f64,
    pub diffusion: f64,
    pub base_cost: f64,
    pub movement_cost: f64,
}

impl Plume {
    fn common(horizon: usize, wind_velocity: f64, noise: NoiseTier) -> Plume {
        Plume {
            horizon,
            wind_velocity,
            noise,
            prior_mean: 0.0,
            prior_var: 4.0,
            design_lo: -3.0,
            design_hi: 3.0,
            initial_position: 5.5,
            source_strength: 30.0,
            diffusion: 0.1,
            base_cost: 0.1,
            movement_cost: 0.1,
        }
    }

    /// Two experiments, wind velocity 10, a single coarse sensor.
    pub fn case1() -> Plume {
        Plume::common(2, 10.0, NoiseTier::fixed(4.0))
    }

    /// Case 1 plus a precise sensor that unlocks below belief variance 3.
    pub fn case2() -> Plume {
        Plume::common(
            2,
            10.0,
            NoiseTier {
                coarse: 4.0,
                precise: 0.25,
                threshold: Some(3.0),
            },
        )
    }

    /// Four experiments, slower wind, tighter qualification threshold.
    pub fn case3() -> Plume {
        Plume::common(
            4,
            5.0,
            NoiseTier {
                coarse: 4.0,
                precise: 0.25,
                threshold: Some(2.5),
            },
        )
    }

    /// Wind displacement accumulated by the time of observation `k`.
    fn drift(&self, k: usize) -> f64 {
        self.wind_velocity * k as f64
    }
}

impl Problem for Plume {
    fn name(&self) -> &'static str {
        "plume"
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
        Some(self.initial_position)
    }

    fn noise_var(&self, belief_var: f64) -> f64 {
        self.noise.variance(belief_var)
    }

    fn predict(&self, theta: f64, obs: &Obs) -> f64 {
        let t = (obs.k + 1) as f64;
        let spread = 1.2 + 4.0 * self.diffusion * t;
        let amp = self.source_strength / (2.0 * std::f64::consts::PI * spread).sqrt();
        let offset = theta + self.drift(obs.k) - obs.z_next;
        amp * (-offset * offset / (2.0 * spread)).exp()
    }

    fn stage_reward(&self, d: f64) -> f64 {
        -self.base_cost - self.movement_cost * d * d
    }

    fn terminal_reward(&self, kl: f64, _post_var: f64) -> f64 {
        kl
    }

    fn tiered(&self) -> bool {
        self.noise.threshold.is_some()
    }
}
