//! Linear value-function approximation over polynomial features of the
//! belief moments and, when present, the physical state.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative ridge factor for the rank-deficient fallback:
/// λ = RIDGE_REL · trace(XᵀX)/p.
const RIDGE_REL: f64 = 1e-8;
/// Singular values below RANK_REL_TOL · s_max mark the batch rank-deficient.
const RANK_REL_TOL: f64 = 1e-10;

/// Polynomials up to total degree two in the posterior mean `s`, the
/// posterior log-variance `u`, and (optionally) the physical state `z`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureBasis {
    pub physical: bool,
}

impl FeatureBasis {
    pub const MAX_LEN: usize = 10;

    pub fn len(&self) -> usize {
        if self.physical {
            10
        } else {
            6
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Feature names in coefficient order.
    pub fn names(&self) -> &'static [&'static str] {
        if self.physical {
            &["1", "s", "u", "z", "s2", "u2", "z2", "su", "sz", "uz"]
        } else {
            &["1", "s", "u", "s2", "u2", "su"]
        }
    }

    pub fn eval_into(&self, s: f64, u: f64, z: f64, out: &mut [f64]) {
        out[0] = 1.0;
        out[1] = s;
        out[2] = u;
        if self.physical {
            out[3] = z;
            out[4] = s * s;
            out[5] = u * u;
            out[6] = z * z;
            out[7] = s * u;
            out[8] = s * z;
            out[9] = u * z;
        } else {
            out[3] = s * s;
            out[4] = u * u;
            out[5] = s * u;
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearValue {
    pub basis: FeatureBasis,
    pub coef: Vec<f64>,
}

impl LinearValue {
    pub fn zero(basis: FeatureBasis) -> LinearValue {
        LinearValue {
            basis,
            coef: vec![0.0; basis.len()],
        }
    }

    pub fn eval(&self, s: f64, u: f64, z: f64) -> f64 {
        let c = &self.coef;
        if self.basis.physical {
            c[0] + c[1] * s
                + c[2] * u
                + c[3] * z
                + c[4] * s * s
                + c[5] * u * u
                + c[6] * z * z
                + c[7] * s * u
                + c[8] * s * z
                + c[9] * u * z
        } else {
            c[0] + c[1] * s + c[2] * u + c[3] * s * s + c[4] * u * u + c[5] * s * u
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FitDiagnostics {
    pub residual_rms: f64,
    pub points: usize,
}

/// Least-squares fit of targets over the basis. Columns are standardized
/// internally for conditioning and a small relative ridge is added; both are
/// folded back so the returned coefficients apply to the raw features.
pub fn fit_linear_value(
    basis: FeatureBasis,
    states: &[(f64, f64, f64)],
    targets: &[f64],
) -> Result<(LinearValue, FitDiagnostics)> {
    let n = states.len();
    let p = basis.len();
    if n != targets.len() {
        return Err(Error::Config("state/target length mismatch".into()));
    }
    if n < p {
        return Err(Error::Numerical(format!(
            "{n} regression points cannot identify {p} coefficients"
        )));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numerical("non-finite regression target".into()));
    }
    let mut row = [0.0_f64; FeatureBasis::MAX_LEN];
    let mut x = DMatrix::zeros(n, p);
    for (i, &(s, u, z)) in states.iter().enumerate() {
        basis.eval_into(s, u, z, &mut row);
        for j in 0..p {
            x[(i, j)] = row[j];
        }
    }
    let mut mu = vec![0.0; p];
    let mut sd = vec![1.0; p];
    for j in 1..p {
        let col = x.column(j);
        let m = col.mean();
        let v = col.iter().map(|&a| (a - m) * (a - m)).sum::<f64>() / n as f64;
        let s = v.sqrt();
        mu[j] = m;
        sd[j] = if s > 0.0 { s } else { 1.0 };
        for i in 0..n {
            x[(i, j)] = (x[(i, j)] - m) / sd[j];
        }
    }
    let t = DVector::from_column_slice(targets);
    let svd = x.clone().svd(true, true);
    let u_t = svd.u.as_ref().expect("svd with u requested");
    let v_t = svd.v_t.as_ref().expect("svd with v_t requested");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank_tol = s_max * RANK_REL_TOL;
    let full_rank = svd.singular_values.iter().all(|&s| s > rank_tol);
    // Full-rank batches get the plain least-squares solution so in-span
    // targets are reproduced exactly; the ridge only breaks ties when the
    // regression points are collinear.
    let lambda = if full_rank {
        0.0
    } else {
        let trace = svd.singular_values.iter().map(|&s| s * s).sum::<f64>();
        RIDGE_REL * trace / p as f64
    };
    let uty = u_t.transpose() * &t;
    let mut shrunk = DVector::zeros(svd.singular_values.len());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        shrunk[i] = if s > rank_tol || lambda > 0.0 {
            s / (s * s + lambda) * uty[i]
        } else {
            0.0
        };
    }
    let r_std = v_t.transpose() * shrunk;
    let mut coef = vec![0.0; p];
    let mut intercept_shift = 0.0;
    for j in 1..p {
        coef[j] = r_std[j] / sd[j];
        intercept_shift += r_std[j] * mu[j] / sd[j];
    }
    coef[0] = r_std[0] - intercept_shift;
    if coef.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("regression produced non-finite coefficients".into()));
    }
    let value = LinearValue { basis, coef };
    let mut ss = 0.0;
    for (i, &(s, u, z)) in states.iter().enumerate() {
        let r = value.eval(s, u, z) - targets[i];
        ss += r * r;
    }
    let diagnostics = FitDiagnostics {
        residual_rms: (ss / n as f64).sqrt(),
        points: n,
    };
    Ok((value, diagnostics))
}
