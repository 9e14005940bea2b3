//! Monte-Carlo draws from independent Normal-Gamma distributions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::dlm::{DlmState, NormalGammaView};
use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::rng::{stream, Phase};

/// Draws of one series: `theta` is `p × N`, one column per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDraws {
    pub theta: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

impl SeriesDraws {
    pub fn n_draws(&self) -> usize {
        self.lambda.len()
    }
}

/// Joint draws across series with importance weights on the simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub series: Vec<SeriesDraws>,
    pub weights: Vec<f64>,
}

impl SampleBatch {
    pub fn n_draws(&self) -> usize {
        self.weights.len()
    }
}

/// `λ ~ Gamma(n/2, rate n s/2)`, `θ | λ ~ N(m, C/(s λ))`.
pub fn sample_normal_gamma<R: Rng + ?Sized>(view: NormalGammaView<'_>, n_mc: usize, rng: &mut R) -> Result<SeriesDraws> {
    if !(view.dof > 0.0 && view.s > 0.0) {
        return Err(Error::Numerical(format!("invalid Normal-Gamma (n = {}, s = {})", view.dof, view.s)));
    }
    let p = view.mean.len();
    let l = psd_factor(view.scale)?;
    let gamma = Gamma::new(view.dof / 2.0, 2.0 / (view.dof * view.s))
        .map_err(|e| Error::Numerical(format!("gamma sampler: {e}")))?;
    let mut theta = DMatrix::zeros(p, n_mc);
    let mut lambda = Vec::with_capacity(n_mc);
    let mut z = nalgebra::DVector::zeros(p);
    for k in 0..n_mc {
        let lam: f64 = gamma.sample(rng).max(f64::MIN_POSITIVE);
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        let scale = 1.0 / (view.s * lam).sqrt();
        let mut col = theta.column_mut(k);
        col.copy_from(view.mean);
        col.gemv(scale, &l, &z, 1.0);
        lambda.push(lam);
    }
    Ok(SeriesDraws { theta, lambda })
}

/// Independent posterior draws for the listed series, uniform weights.
/// Series not listed get an empty draw set.
pub fn sample_posteriors(states: &[DlmState], which: &[bool], n_mc: usize, seed: u64, day: u64) -> Result<SampleBatch> {
    if n_mc < 2 {
        return Err(Error::config("engine.n_mc", "at least 2 draws are required"));
    }
    let series = states
        .par_iter()
        .enumerate()
        .map(|(j, st)| {
            if !which[j] {
                return Ok(SeriesDraws {
                    theta: DMatrix::zeros(st.dim(), 0),
                    lambda: Vec::new(),
                });
            }
            let mut rng = stream(seed, day, Phase::Posterior, j);
            sample_normal_gamma(st.view(), n_mc, &mut rng)
                .map_err(|e| Error::Numerical(format!("series {j}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        series,
        weights: vec![1.0 / n_mc as f64; n_mc],
    })
}
