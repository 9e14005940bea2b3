//! Importance weights `α ∝ |det(I − Γ)|` that rejoin independently sampled
//! series into the simultaneous model.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::sampling::SampleBatch;
use crate::error::{Error, Result};
use crate::linalg::{dense_determinant, SparseLuPattern, SparseLuWork};

/// Sparsity of Γ: `rows[j]` holds `(parent series, coefficient index in j's
/// state)` pairs. The diagonal is structurally zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GammaMatrix {
    pub rows: Vec<Vec<(usize, usize)>>,
}

impl GammaMatrix {
    pub fn empty(m: usize) -> Self {
        GammaMatrix { rows: vec![Vec::new(); m] }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    /// Series appearing as a child or a parent.
    pub fn involved(&self) -> Vec<bool> {
        let mut v = vec![false; self.dim()];
        for (j, row) in self.rows.iter().enumerate() {
            if !row.is_empty() {
                v[j] = true;
            }
            for &(k, _) in row {
                v[k] = true;
            }
        }
        v
    }

    pub fn pattern(&self) -> SparseLuPattern {
        let cols: Vec<Vec<usize>> = self.rows.iter().map(|r| r.iter().map(|&(k, _)| k).collect()).collect();
        SparseLuPattern::new(self.dim(), &cols)
    }

    /// Visit row `j` of `I − Γ` for draw `draw`.
    pub fn visit_row(&self, batch: &SampleBatch, draw: usize, j: usize, visit: &mut dyn FnMut(usize, f64)) {
        visit(j, 1.0);
        for &(k, idx) in &self.rows[j] {
            visit(k, -batch.series[j].theta[(idx, draw)]);
        }
    }

    /// Dense `I − Γ` for one draw.
    pub fn dense_i_minus_gamma(&self, batch: &SampleBatch, draw: usize) -> DMatrix<f64> {
        let m = self.dim();
        let mut a = DMatrix::identity(m, m);
        for j in 0..m {
            self.visit_row(batch, draw, j, &mut |k, v| {
                if k != j {
                    a[(j, k)] += v;
                }
            });
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recoupling {
    pub weights: Vec<f64>,
    /// `Σ α log(N α)` of the untempered weights.
    pub entropy: f64,
    /// Effective sample size `1 / Σ α²` of the returned weights.
    pub ess: f64,
    /// Exponent applied to the raw weights; 1 when no tempering was needed.
    pub tempering: f64,
    /// Draws whose sparse factorization needed the pivoting fallback.
    pub dense_fallbacks: usize,
}

/// Entropy `Σ α log(N α)` with `0 log 0 = 0`.
pub fn weight_entropy(weights: &[f64]) -> f64 {
    let n = weights.len() as f64;
    weights.iter().filter(|&&w| w > 0.0).map(|&w| w * (n * w).ln()).sum()
}

pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Normalize log-weights; returns `(weights, entropy)` with the entropy
/// evaluated in log space so uniform inputs give exactly 0.
fn normalize_log(log_w: &[f64]) -> (Vec<f64>, f64) {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = log_w.iter().map(|l| l - max).collect();
    let total: f64 = shifted.iter().map(|l| l.exp()).sum();
    let lse = total.ln();
    let ln_n = (log_w.len() as f64).ln();
    let weights: Vec<f64> = shifted.iter().map(|l| l.exp() / total).collect();
    let entropy = weights
        .iter()
        .zip(&shifted)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, l)| w * (l - lse + ln_n))
        .sum::<f64>()
        .max(0.0);
    (weights, entropy)
}

/// Importance weights for the batch under `Γ`, tempered to reach `ess_floor`.
pub fn recouple_weights(batch: &SampleBatch, gamma: &GammaMatrix, ess_floor: f64) -> Result<Recoupling> {
    let n = batch.n_draws();
    if gamma.is_empty() {
        return Ok(Recoupling {
            weights: vec![1.0 / n as f64; n],
            entropy: 0.0,
            ess: n as f64,
            tempering: 1.0,
            dense_fallbacks: 0,
        });
    }
    let pattern = gamma.pattern();
    let m = gamma.dim();
    let dets: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map_init(SparseLuWork::default, |work, draw| {
            let sparse = pattern.determinant(work, |j, visit| gamma.visit_row(batch, draw, j, visit));
            match sparse {
                Some(d) => (d, false),
                None => (dense_determinant(gamma.dense_i_minus_gamma(batch, draw)), true),
            }
        })
        .collect();
    let dense_fallbacks = dets.iter().filter(|d| d.1).count();
    let log_w: Vec<f64> = dets.iter().map(|(d, _)| d.abs().ln()).collect();
    if log_w.iter().all(|l| *l == f64::NEG_INFINITY || l.is_nan()) {
        return Err(Error::Degenerate(format!("all {n} recoupling determinants are zero ({m} series)")));
    }
    let log_w: Vec<f64> = log_w.into_iter().map(|l| if l.is_nan() { f64::NEG_INFINITY } else { l }).collect();
    let (weights, entropy) = normalize_log(&log_w);
    let (weights, tempering) = temper_to_ess(&log_w, weights, ess_floor);
    Ok(Recoupling {
        ess: effective_sample_size(&weights),
        weights,
        entropy,
        tempering,
        dense_fallbacks,
    })
}

/// Raise weights to the largest power `τ ≤ 1` giving ESS ≥ `floor`.
fn temper_to_ess(log_w: &[f64], weights: Vec<f64>, floor: f64) -> (Vec<f64>, f64) {
    let floor = floor.min(log_w.len() as f64);
    if effective_sample_size(&weights) >= floor {
        return (weights, 1.0);
    }
    let at = |tau: f64| {
        let scaled: Vec<f64> = log_w.iter().map(|l| if l.is_finite() { tau * l } else { *l }).collect();
        normalize_log(&scaled).0
    };
    // ESS is monotone decreasing in τ; τ = 0 gives uniform over finite draws
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if effective_sample_size(&at(mid)) >= floor {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (at(lo), lo)
}
