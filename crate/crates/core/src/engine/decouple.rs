//! Variational-Bayes projection of a weighted joint sample back onto one
//! Normal-Gamma per series.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::sampling::SeriesDraws;
use crate::dlm::DlmState;
use crate::error::{Error, Result};
use crate::special::{digamma, trigamma};

pub const DOF_BRACKET: (f64, f64) = (1e-2, 1e6);

#[derive(Debug, Clone, PartialEq)]
pub struct Decoupled {
    pub state: DlmState,
    /// `|f(n)|` at the returned dof; NaN when the solve fell back.
    pub residual: f64,
    /// True when the root was not bracketed and `prev_n` was kept.
    pub fallback: bool,
    /// Effective rank `d` of the weighted spread.
    pub d: f64,
}

/// Weighted moments `E[λ]`, `E[log λ]`, `m`, `V`.
struct Moments {
    e_lambda: f64,
    e_log_lambda: f64,
    m: DVector<f64>,
    v: DMatrix<f64>,
}

fn moments(draws: &SeriesDraws, weights: &[f64]) -> Moments {
    let p = draws.theta.nrows();
    let mut e_lambda = 0.0;
    let mut e_log_lambda = 0.0;
    let mut lt = DVector::zeros(p);
    for (k, (&w, &lam)) in weights.iter().zip(&draws.lambda).enumerate() {
        if w == 0.0 {
            continue;
        }
        e_lambda += w * lam;
        e_log_lambda += w * lam.ln();
        lt.axpy(w * lam, &draws.theta.column(k), 1.0);
    }
    let m = lt / e_lambda;
    let mut v = DMatrix::zeros(p, p);
    let mut dev = DVector::zeros(p);
    for (k, (&w, &lam)) in weights.iter().zip(&draws.lambda).enumerate() {
        if w == 0.0 {
            continue;
        }
        dev.copy_from(&draws.theta.column(k));
        dev -= &m;
        v.ger(w * lam, &dev, &dev, 1.0);
    }
    crate::linalg::symmetrize(&mut v);
    Moments {
        e_lambda,
        e_log_lambda,
        m,
        v,
    }
}

/// `E[λ (θ−m)ᵀ V⁺ (θ−m)] = tr(V⁺ V)`, the numerical rank of `V`.
fn spread_rank(v: &DMatrix<f64>) -> f64 {
    if v.nrows() == 0 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(v.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    eig.eigenvalues.iter().filter(|&&e| e > 1e-12 * max).count() as f64
}

/// `log(n + p − d) − ψ(n/2) − (p − d)/n − log(2 E[λ]) + E[log λ]`.
pub fn dof_equation(n: f64, p_minus_d: f64, e_lambda: f64, e_log_lambda: f64) -> f64 {
    (n + p_minus_d).ln() - digamma(n / 2.0) - p_minus_d / n - (2.0 * e_lambda).ln() + e_log_lambda
}

fn dof_derivative(n: f64, p_minus_d: f64) -> f64 {
    1.0 / (n + p_minus_d) - 0.5 * trigamma(n / 2.0) + p_minus_d / (n * n)
}

/// Root of [`dof_equation`] in [`DOF_BRACKET`]: bisection, then Newton
/// polish. `None` when the bracket holds no sign change.
pub fn solve_dof(p_minus_d: f64, e_lambda: f64, e_log_lambda: f64) -> Option<(f64, f64)> {
    let f = |n: f64| dof_equation(n, p_minus_d, e_lambda, e_log_lambda);
    let (mut lo, mut hi) = DOF_BRACKET;
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return None;
    }
    let increasing = fhi > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-10 * mid.max(1.0) {
            break;
        }
    }
    let mut n = 0.5 * (lo + hi);
    let mut best = (n, f(n).abs());
    for _ in 0..8 {
        let step = f(n) / dof_derivative(n, p_minus_d);
        let next = n - step;
        if !(next > DOF_BRACKET.0 && next < DOF_BRACKET.1) {
            break;
        }
        n = next;
        let r = f(n).abs();
        if r < best.1 {
            best = (n, r);
        }
        if r < 1e-14 {
            break;
        }
    }
    Some(best)
}

/// Project weighted draws of one series onto `NG(m, C, n, s)`.
pub fn vb_decouple(draws: &SeriesDraws, weights: &[f64], prev_n: f64) -> Result<Decoupled> {
    if draws.n_draws() != weights.len() || weights.is_empty() {
        return Err(Error::Data("draw and weight counts differ".into()));
    }
    project(moments(draws, weights), prev_n)
}

/// [`vb_decouple`] with the weighted moments estimated as the exact moments
/// of `reference` (the distribution the draws came from) plus the
/// weighted-minus-uniform difference over the same draws. Uniform weights
/// return `reference` up to root-solver precision.
pub fn vb_decouple_anchored(draws: &SeriesDraws, weights: &[f64], reference: &DlmState) -> Result<Decoupled> {
    let n_mc = weights.len();
    if draws.n_draws() != n_mc || n_mc == 0 {
        return Err(Error::Data("draw and weight counts differ".into()));
    }
    if reference.dim() != draws.theta.nrows() {
        return Err(Error::Data("reference state and draws differ in dimension".into()));
    }
    let w = moments(draws, weights);
    let u = moments(draws, &vec![1.0 / n_mc as f64; n_mc]);
    let (n0, s0) = (reference.n, reference.s);
    let mut v = &reference.c / s0 + (w.v - u.v);
    crate::linalg::symmetrize(&mut v);
    crate::linalg::repair_psd(&mut v);
    let mo = Moments {
        e_lambda: 1.0 / s0 + (w.e_lambda - u.e_lambda),
        e_log_lambda: digamma(n0 / 2.0) - (n0 * s0 / 2.0).ln() + (w.e_log_lambda - u.e_log_lambda),
        m: &reference.m + (w.m - u.m),
        v,
    };
    project(mo, n0)
}

fn project(mo: Moments, prev_n: f64) -> Result<Decoupled> {
    if !(mo.e_lambda > 0.0 && mo.e_lambda.is_finite()) {
        return Err(Error::Numerical(format!("E[λ] = {} in decoupling", mo.e_lambda)));
    }
    let p = mo.m.len() as f64;
    let d = spread_rank(&mo.v);
    let (n, residual, fallback) = match solve_dof(p - d, mo.e_lambda, mo.e_log_lambda) {
        Some((n, r)) => (n, r, false),
        None => {
            log::warn!("decoupling dof root not bracketed; keeping n = {prev_n}");
            (prev_n, f64::NAN, true)
        }
    };
    let s = (n + p - d) / (n * mo.e_lambda);
    let c = mo.v * s;
    Ok(Decoupled {
        state: DlmState { m: mo.m, c, n, s },
        residual,
        fallback,
        d,
    })
}
