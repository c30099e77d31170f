//! Kiefer-Wolfowitz stochastic ascent over a scalar design interval.
//!
//! Finite-difference gradients with common random numbers, a decaying
//! gain sequence calibrated from the first gradient estimate, iterate
//! averaging over the tail, and multistart with a common-sample playoff.

use crate::error::Result;
use crate::rng::rng_for;
use rand_chacha::ChaCha12Rng;

/// A noisy objective; `estimate` returns a Monte Carlo mean and its
/// standard error using `n` samples drawn from `rng`.
pub trait StochasticObjective {
    fn estimate(&self, d: f64, n: usize, rng: &mut ChaCha12Rng) -> Result<(f64, f64)>;
}

const ALPHA: f64 = 0.602;
const GAMMA: f64 = 0.101;
const A_OFFSET: f64 = 10.0;
/// Upper bound on the gain scale, as a fraction of the interval width.
const GAIN_FRAC: f64 = 0.5;
/// Finite-difference half-width, as a fraction of the interval width.
const PERTURB_FRAC: f64 = 0.1;
/// Per-iteration step clip, as a fraction of the interval width.
const CLIP_FRAC: f64 = 0.2;
/// Desired magnitude of the first step, as a fraction of the interval width.
const CALIB_FRAC: f64 = 0.1;
/// Seed tag reserved for the playoff stream (restarts use 0, 1, 2).
const PLAYOFF_TAG: u64 = 3;

#[derive(Clone, Copy, Debug)]
pub struct KwSettings {
    pub iterations: usize,
    pub mc_samples: usize,
}

impl Default for KwSettings {
    fn default() -> Self {
        KwSettings {
            iterations: 50,
            mc_samples: 100,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct KwOutcome {
    /// Winning design after the playoff.
    pub design: f64,
    /// Playoff objective estimate at the winning design.
    pub value: f64,
    /// Standard error of that estimate.
    pub se: f64,
    /// Tail-averaged endpoint of each restart.
    pub endpoints: [f64; 3],
    /// Playoff objective estimate of each endpoint.
    pub values: [f64; 3],
    /// Index of the winning restart.
    pub chosen: usize,
}

fn clamp(d: f64, lo: f64, hi: f64) -> f64 {
    d.max(lo).min(hi)
}

/// Restart initial points: quarter points and the midpoint of the interval.
pub fn restart_points(lo: f64, hi: f64) -> [f64; 3] {
    let w = hi - lo;
    [lo + 0.25 * w, lo + 0.5 * w, hi - 0.25 * w]
}

/// Maximize the objective over [lo, hi]. Deterministic given `seed`.
pub fn maximize<O: StochasticObjective>(
    objective: &O,
    lo: f64,
    hi: f64,
    settings: &KwSettings,
    seed: u64,
) -> Result<KwOutcome> {
    assert!(hi > lo, "empty design interval");
    let w = hi - lo;
    let c_scale = PERTURB_FRAC * w;
    let clip = CLIP_FRAC * w;
    let iters = settings.iterations.max(1);
    let mc = settings.mc_samples.max(2);

    let starts = restart_points(lo, hi);
    let mut endpoints = [0.0_f64; 3];
    for (ri, &start) in starts.iter().enumerate() {
        let mut d = start;
        let mut a_scale = GAIN_FRAC * w;
        let mut tail_sum = 0.0;
        let mut tail_count = 0usize;
        let tail_start = iters - iters / 2;
        for it in 0..iters {
            let k = (it + 1) as f64;
            let c_k = c_scale / k.powf(GAMMA);
            let d_plus = clamp(d + c_k, lo, hi);
            let d_minus = clamp(d - c_k, lo, hi);
            let base = rng_for(seed, &[ri as u64, it as u64]);
            let mut rng_plus = base.clone();
            let mut rng_minus = base;
            let (f_plus, _) = objective.estimate(d_plus, mc, &mut rng_plus)?;
            let (f_minus, _) = objective.estimate(d_minus, mc, &mut rng_minus)?;
            let g = (f_plus - f_minus) / (d_plus - d_minus).max(f64::MIN_POSITIVE);
            if it == 0 {
                let g_mag = g.abs();
                if g_mag > 1e-12 {
                    let calibrated = CALIB_FRAC * w * (A_OFFSET + 1.0).powf(ALPHA) / g_mag;
                    a_scale = a_scale.min(calibrated);
                }
            }
            let a_k = a_scale / (A_OFFSET + k).powf(ALPHA);
            let step = (a_k * g).max(-clip).min(clip);
            d = clamp(d + step, lo, hi);
            if it + 1 > tail_start {
                tail_sum += d;
                tail_count += 1;
            }
        }
        endpoints[ri] = if tail_count > 0 {
            tail_sum / tail_count as f64
        } else {
            d
        };
    }

    // Playoff: re-estimate every endpoint on one common sample stream so the
    // comparison noise cancels across candidates.
    let playoff_base = rng_for(seed, &[PLAYOFF_TAG, 0]);
    let playoff_n = 4 * mc;
    let mut values = [0.0_f64; 3];
    let mut errs = [0.0_f64; 3];
    for ri in 0..3 {
        let mut rng = playoff_base.clone();
        let (v, e) = objective.estimate(endpoints[ri], playoff_n, &mut rng)?;
        values[ri] = v;
        errs[ri] = e;
    }
    let mut chosen = 0;
    for ri in 1..3 {
        if values[ri] > values[chosen] {
            chosen = ri;
        }
    }
    Ok(KwOutcome {
        design: endpoints[chosen],
        value: values[chosen],
        se: errs[chosen],
        endpoints,
        values,
        chosen,
    })
}
