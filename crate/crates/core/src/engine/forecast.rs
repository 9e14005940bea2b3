//! One-step joint forecasts `y = (I − Γ)⁻¹ (μ + ν)` from prior draws, and
//! feature roll-forward for multi-step paths.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::recouple::GammaMatrix;
use super::sampling::{sample_normal_gamma, SampleBatch, SeriesDraws};
use crate::dlm::{forecast_one, PriorState};
use crate::error::{Error, Result};
use crate::linalg::SparseLuWork;
use crate::rng::{stream, Phase};
use crate::stats::{mean, quantile_sorted, sorted};

/// Largest tolerated share of draws with a singular `I − Γ`.
pub const MAX_REJECTION_SHARE: f64 = 0.10;

/// Predictive summary of one series on one day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveSummary {
    pub mean: f64,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    /// Student-t closed form rather than pooled draws.
    pub analytic: bool,
}

impl PredictiveSummary {
    pub fn analytic(prior: &PriorState, f: &DVector<f64>, mass: f64) -> Result<Self> {
        let fc = forecast_one(prior, f)?;
        let (lo, hi) = fc.interval(mass);
        Ok(PredictiveSummary {
            mean: fc.mean,
            median: fc.mean,
            lo,
            hi,
            analytic: true,
        })
    }

    pub fn from_draws(values: &[f64], mass: f64) -> Self {
        let s = sorted(values);
        let tail = 0.5 * (1.0 - mass);
        PredictiveSummary {
            mean: mean(values),
            median: quantile_sorted(&s, 0.5),
            lo: quantile_sorted(&s, tail),
            hi: quantile_sorted(&s, 1.0 - tail),
            analytic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointForecast {
    pub series: Vec<PredictiveSummary>,
    /// Draws with a singular `I − Γ`, dropped from the pool.
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastSettings {
    pub n_mc: usize,
    pub mass: f64,
    pub seed: u64,
}

/// Joint forecast for one day.
///
/// `endo[j]` is series j's endogenous regression vector; its parent
/// coefficients follow at the indices recorded in `gamma`. Series with an
/// empty Γ row use the closed-form Student-t predictive.
pub fn joint_forecast(
    priors: &[PriorState],
    endo: &[DVector<f64>],
    gamma: &GammaMatrix,
    settings: &ForecastSettings,
    day: u64,
) -> Result<JointForecast> {
    let m = priors.len();
    if endo.len() != m || gamma.dim() != m {
        return Err(Error::Data(format!(
            "{} priors, {} feature vectors, Γ of dimension {}",
            m,
            endo.len(),
            gamma.dim()
        )));
    }
    let mut out: Vec<Option<PredictiveSummary>> = vec![None; m];
    for j in 0..m {
        if gamma.rows[j].is_empty() {
            let p = priors[j].dim();
            if endo[j].len() != p {
                return Err(Error::Data(format!(
                    "series {j}: {} features for a state of dimension {p}",
                    endo[j].len()
                )));
            }
            out[j] = Some(PredictiveSummary::analytic(&priors[j], &endo[j], settings.mass)?);
        }
    }
    if gamma.is_empty() {
        return Ok(JointForecast {
            series: out.into_iter().map(|s| s.expect("filled")).collect(),
            rejected: 0,
        });
    }

    let n = settings.n_mc;
    let involved = gamma.involved();
    // per involved series: prior draws and μ + ν per draw
    let drawn: Vec<(SeriesDraws, Vec<f64>)> = (0..m)
        .into_par_iter()
        .map(|j| {
            if !involved[j] {
                return Ok((
                    SeriesDraws {
                        theta: DMatrix::zeros(priors[j].dim(), 0),
                        lambda: Vec::new(),
                    },
                    Vec::new(),
                ));
            }
            let mut rng = stream(settings.seed, day, Phase::Forecast, j);
            let draws = sample_normal_gamma(priors[j].view(), n, &mut rng)
                .map_err(|e| Error::Numerical(format!("series {j}: {e}")))?;
            let k = endo[j].len();
            if k > priors[j].dim() {
                return Err(Error::Data(format!("series {j}: too many endogenous features")));
            }
            let rhs: Vec<f64> = (0..n)
                .map(|d| {
                    let mu = draws.theta.view((0, d), (k, 1)).dot(&endo[j]);
                    let z: f64 = StandardNormal.sample(&mut rng);
                    mu + z / draws.lambda[d].sqrt()
                })
                .collect();
            Ok((draws, rhs))
        })
        .collect::<Result<Vec<_>>>()?;
    let (series_draws, rhs): (Vec<SeriesDraws>, Vec<Vec<f64>>) = drawn.into_iter().unzip();
    let batch = SampleBatch {
        series: series_draws,
        weights: vec![1.0 / n as f64; n],
    };
    let pattern = gamma.pattern();
    let solved: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map_init(SparseLuWork::default, |work, d| {
            let mut y: Vec<f64> = (0..m).map(|j| if involved[j] { rhs[j][d] } else { 0.0 }).collect();
            let ok = pattern
                .solve(work, |j, visit| gamma.visit_row(&batch, d, j, visit), &mut y)
                .is_some();
            if ok && y.iter().all(|v| v.is_finite()) {
                return Some(y);
            }
            let a = gamma.dense_i_minus_gamma(&batch, d);
            let lu = a.lu();
            if lu.determinant().abs() < 1e-12 {
                return None;
            }
            let b = DVector::from_fn(m, |j, _| if involved[j] { rhs[j][d] } else { 0.0 });
            lu.solve(&b)
                .map(|x| x.iter().copied().collect::<Vec<f64>>())
                .filter(|x| x.iter().all(|v| v.is_finite()))
        })
        .collect();
    let rejected = solved.iter().filter(|s| s.is_none()).count();
    if rejected as f64 > MAX_REJECTION_SHARE * n as f64 {
        return Err(Error::Degenerate(format!("{rejected} of {n} forecast draws have singular I − Γ")));
    }
    let accepted: Vec<&Vec<f64>> = solved.iter().flatten().collect();
    for j in 0..m {
        if out[j].is_none() {
            let values: Vec<f64> = accepted.iter().map(|y| y[j]).collect();
            out[j] = Some(PredictiveSummary::from_draws(&values, settings.mass));
        }
    }
    Ok(JointForecast {
        series: out.into_iter().map(|s| s.expect("filled")).collect(),
        rejected,
    })
}

/// Rolls endogenous regression vectors forward using predicted targets.
pub trait FeatureUpdater {
    /// Regression vectors for the next horizon given each series' predicted
    /// (standardized) target at the current one.
    fn advance(&mut self, predicted: &[f64]) -> Result<Vec<DVector<f64>>>;
}

/// Features `(1, mean of the last w₁ targets, mean of the last w₂, …)`:
/// the HAR cascade for windows `(1, 5, 20)` and the lagged-target model for
/// `(1)`. Closed under prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeUpdater {
    pub windows: Vec<usize>,
    /// Most recent value last.
    pub history: Vec<Vec<f64>>,
}

impl CascadeUpdater {
    pub fn new(windows: Vec<usize>, history: Vec<Vec<f64>>) -> Self {
        CascadeUpdater { windows, history }
    }

    pub fn features(&self) -> Vec<DVector<f64>> {
        self.history.iter().map(|h| cascade_features(h, &self.windows)).collect()
    }
}

/// `(1, mean(h[−w₁..]), mean(h[−w₂..]), …)`; short histories average what
/// exists, empty ones give 0.
pub fn cascade_features(history: &[f64], windows: &[usize]) -> DVector<f64> {
    let mut v = DVector::zeros(1 + windows.len());
    v[0] = 1.0;
    for (i, &w) in windows.iter().enumerate() {
        let take = w.min(history.len());
        if take > 0 {
            v[i + 1] = history[history.len() - take..].iter().sum::<f64>() / take as f64;
        }
    }
    v
}

impl FeatureUpdater for CascadeUpdater {
    fn advance(&mut self, predicted: &[f64]) -> Result<Vec<DVector<f64>>> {
        if predicted.len() != self.history.len() {
            return Err(Error::Data("prediction count differs from series count".into()));
        }
        let keep = self.windows.iter().copied().max().unwrap_or(1);
        for (h, &y) in self.history.iter_mut().zip(predicted) {
            h.push(y);
            if h.len() > keep {
                h.drain(..h.len() - keep);
            }
        }
        Ok(self.features())
    }
}

/// Updater for features that depend on unobserved price paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct PricePathUpdater;

impl FeatureUpdater for PricePathUpdater {
    fn advance(&mut self, _predicted: &[f64]) -> Result<Vec<DVector<f64>>> {
        Err(Error::Unsupported(
            "exponentially weighted RV and leverage features need future prices; \
             use a cascade layout for multi-step forecasts"
                .into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior(a: &[f64], var: f64, dof: f64) -> PriorState {
        let p = a.len();
        PriorState {
            a: DVector::from_row_slice(a),
            big_r: DMatrix::identity(p, p) * var,
            r: dof,
            s: 1.0,
        }
    }

    #[test]
    fn no_parents_is_closed_form() {
        let pr = vec![prior(&[1.0, 0.5], 0.1, 10.0), prior(&[-1.0], 0.2, 5.0)];
        let x = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![1.0])];
        let s = ForecastSettings { n_mc: 100, mass: 0.9, seed: 1 };
        let f = joint_forecast(&pr, &x, &GammaMatrix::empty(2), &s, 0).unwrap();
        for j in 0..2 {
            let want = PredictiveSummary::analytic(&pr[j], &x[j], 0.9).unwrap();
            assert_eq!(f.series[j], want);
        }
        assert_eq!(f.series[0].mean, 2.0);
    }

    #[test]
    fn single_edge_mean_matches_hand_inverse() {
        // y₁ = μ₁ + 0.5 y₂ + ν₁, y₂ = μ₂ + ν₂
        let mut p1 = prior(&[1.0, 0.5], 0.0, 50.0);
        p1.s = 1e-6;
        let mut p2 = prior(&[3.0], 0.0, 50.0);
        p2.s = 1e-6;
        let g = GammaMatrix {
            rows: vec![vec![(1, 1)], vec![]],
        };
        let x = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![1.0])];
        let s = ForecastSettings { n_mc: 400, mass: 0.9, seed: 2 };
        let f = joint_forecast(&[p1, p2], &x, &g, &s, 0).unwrap();
        assert!((f.series[0].mean - (1.0 + 0.5 * 3.0)).abs() < 1e-2);
        assert!(!f.series[0].analytic && f.series[1].analytic);
        assert_eq!(f.series[1].mean, 3.0);
    }

    #[test]
    fn cascade_updater_rolls_means() {
        let mut u = CascadeUpdater::new(vec![1, 2], vec![vec![1.0, 3.0]]);
        assert_eq!(u.features()[0].as_slice(), &[1.0, 3.0, 2.0]);
        let next = u.advance(&[5.0]).unwrap();
        assert_eq!(next[0].as_slice(), &[1.0, 5.0, 4.0]);
        assert!(matches!(PricePathUpdater.advance(&[0.0]), Err(Error::Unsupported(_))));
    }
}
