//! Forecast-quality metrics, interval coverage tables and comparator
//! forecasts.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::special::normal_half_width;
use crate::stats::{mean, median, std_dev};

/// Shortest series accepted by [`point_metrics`].
pub const MIN_POINTS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMetrics {
    /// Median absolute deviation `median |pred − obs|`.
    pub mad: f64,
    pub rmse: f64,
    /// `None` when the predictions have zero variance.
    pub r2: Option<f64>,
    /// Slope of observed on predicted; `None` when the predictions have
    /// zero variance.
    pub mz: Option<f64>,
    pub n: usize,
}

/// Metrics of aligned predictions and observations; pairs with either side
/// missing are skipped.
pub fn point_metrics(pred: &[Option<f64>], obs: &[Option<f64>]) -> Result<PointMetrics> {
    if pred.len() != obs.len() {
        return Err(Error::Data(format!("{} predictions for {} observations", pred.len(), obs.len())));
    }
    let (p, o): (Vec<f64>, Vec<f64>) = pred
        .iter()
        .zip(obs)
        .filter_map(|(p, o)| Some(((*p)?, (*o)?)))
        .unzip();
    let n = p.len();
    if n < MIN_POINTS {
        return Err(Error::NotReady {
            needed: MIN_POINTS,
            available: n,
        });
    }
    let err: Vec<f64> = p.iter().zip(&o).map(|(p, o)| (p - o).abs()).collect();
    let rmse = (err.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let (mp, mo) = (mean(&p), mean(&o));
    let sxx: f64 = p.iter().map(|x| (x - mp).powi(2)).sum();
    let sxy: f64 = p.iter().zip(&o).map(|(x, y)| (x - mp) * (y - mo)).sum();
    let syy: f64 = o.iter().map(|y| (y - mo).powi(2)).sum();
    let degenerate = sxx <= f64::EPSILON * p.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
    let (mz, r2) = if degenerate {
        (None, None)
    } else {
        let slope = sxy / sxx;
        let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
        (Some(slope), Some(r2))
    };
    Ok(PointMetrics {
        mad: median(&err),
        rmse,
        r2,
        mz,
        n,
    })
}

/// Day filter on the move series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoveFilter {
    /// `|move|` at or above the threshold.
    Abs,
    /// `move` at or above the threshold.
    Positive,
}

impl MoveFilter {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveFilter::Abs => "abs",
            MoveFilter::Positive => "positive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lo <= y && y <= self.hi
    }

    /// Scale both sides about `center` by `k`.
    pub fn scaled(&self, center: f64, k: f64) -> Interval {
        Interval {
            lo: center - k * (center - self.lo),
            hi: center + k * (self.hi - center),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRow {
    pub filter: MoveFilter,
    pub threshold: f64,
    /// Mean `|move|` (abs filter) or mean `move` (positive filter) of the
    /// retained days.
    pub mean_move: f64,
    pub mean_width: f64,
    /// Percentage of retained observations inside their interval.
    pub pct_inside: f64,
    pub count: usize,
}

/// Coverage on days whose move passes `filter` at `threshold`. `None` when
/// no day qualifies.
pub fn ci_coverage(
    intervals: &[Option<Interval>],
    observed: &[Option<f64>],
    moves: &[Option<f64>],
    filter: MoveFilter,
    threshold: f64,
) -> Result<Option<CoverageRow>> {
    if intervals.len() != observed.len() || moves.len() != observed.len() {
        return Err(Error::Data("intervals, observations and moves are not aligned".into()));
    }
    let mut moved = Vec::new();
    let mut widths = Vec::new();
    let mut inside = 0usize;
    for ((iv, y), mv) in intervals.iter().zip(observed).zip(moves) {
        let (Some(iv), Some(y), Some(mv)) = (iv, y, mv) else {
            continue;
        };
        let keep = match filter {
            MoveFilter::Abs => mv.abs() >= threshold,
            MoveFilter::Positive => *mv >= threshold,
        };
        if !keep {
            continue;
        }
        moved.push(match filter {
            MoveFilter::Abs => mv.abs(),
            MoveFilter::Positive => *mv,
        });
        widths.push(iv.width());
        if iv.contains(*y) {
            inside += 1;
        }
    }
    if moved.is_empty() {
        log::info!("no day passes the {} filter at {threshold}; row omitted", filter.as_str());
        return Ok(None);
    }
    Ok(Some(CoverageRow {
        filter,
        threshold,
        mean_move: mean(&moved),
        mean_width: mean(&widths),
        pct_inside: 100.0 * inside as f64 / moved.len() as f64,
        count: moved.len(),
    }))
}

/// Multiplier `k` giving `mean width = target` when every interval is
/// scaled by `k` about its centre.
pub fn calibrate_multiplier(intervals: &[Option<Interval>], target_width: f64) -> Result<f64> {
    let w: Vec<f64> = intervals.iter().flatten().map(Interval::width).collect();
    let m = mean(&w);
    if !(m > 0.0 && m.is_finite()) || !(target_width > 0.0) {
        return Err(Error::Degenerate(format!(
            "cannot scale intervals of mean width {m} to {target_width}"
        )));
    }
    Ok(target_width / m)
}

/// Intervals scaled about the point forecasts.
pub fn rescale_intervals(intervals: &[Option<Interval>], centers: &[Option<f64>], k: f64) -> Vec<Option<Interval>> {
    intervals
        .iter()
        .zip(centers)
        .map(|(iv, c)| Some(iv.as_ref()?.scaled((*c)?, k)))
        .collect()
}

/// One model's point forecasts and intervals for one series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastStream {
    pub mean: Vec<Option<f64>>,
    pub interval: Vec<Option<Interval>>,
}

/// `pred_t = obs_{t−1}` with the rolling residual interval.
pub fn persistence_baseline(obs: &[Option<f64>], window: usize, mass: f64) -> ForecastStream {
    let mean: Vec<Option<f64>> = (0..obs.len()).map(|t| if t > 0 { obs[t - 1] } else { None }).collect();
    let interval = rolling_residual_interval(&mean, obs, window, mass);
    ForecastStream { mean, interval }
}

/// `pred_t ± z·sd` where `sd` is the standard deviation of the last
/// `window` residuals observed strictly before `t`.
pub fn rolling_residual_interval(
    pred: &[Option<f64>],
    obs: &[Option<f64>],
    window: usize,
    mass: f64,
) -> Vec<Option<Interval>> {
    let z = normal_half_width(mass);
    let mut past: Vec<f64> = Vec::new();
    let mut out = Vec::with_capacity(pred.len());
    for t in 0..pred.len() {
        let iv = match pred[t] {
            Some(p) if past.len() >= window.max(2) => {
                let sd = std_dev(&past[past.len() - window.max(2)..]);
                Some(Interval {
                    lo: p - z * sd,
                    hi: p + z * sd,
                })
            }
            _ => None,
        };
        out.push(iv);
        if let (Some(p), Some(o)) = (pred[t], obs[t]) {
            past.push(o - p);
        }
    }
    out
}

/// Expanding-window least squares of `target_t` on `x_t`, refitted each
/// day on all earlier pairs, with the rolling residual interval. Nearly
/// singular designs get a `ridge` diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct HarFit {
    pub stream: ForecastStream,
    /// Coefficients fitted on every pair, for inspection.
    pub coefficients: Option<DVector<f64>>,
    pub ridge_days: usize,
}

pub const HAR_RIDGE: f64 = 1e-8;

fn solve_normal(xtx: &DMatrix<f64>, xty: &DVector<f64>) -> (Option<DVector<f64>>, bool) {
    if let Some(ch) = xtx.clone().cholesky() {
        let b = ch.solve(xty);
        if b.iter().all(|v| v.is_finite()) {
            let scale = xtx.diagonal().amax().max(f64::MIN_POSITIVE);
            let min_pivot = ch.l().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            if min_pivot > 1e-12 * scale {
                return (Some(b), false);
            }
        }
    }
    let p = xtx.nrows();
    let ridged = xtx + DMatrix::identity(p, p) * HAR_RIDGE * xtx.diagonal().amax().max(1.0);
    (ridged.cholesky().map(|c| c.solve(xty)), true)
}

pub fn har_baseline(x: &[Option<DVector<f64>>], obs: &[Option<f64>], window: usize, mass: f64) -> Result<HarFit> {
    if x.len() != obs.len() {
        return Err(Error::Data("features and targets are not aligned".into()));
    }
    let Some(p) = x.iter().flatten().map(|v| v.len()).next() else {
        return Ok(HarFit {
            stream: ForecastStream {
                mean: vec![None; obs.len()],
                interval: vec![None; obs.len()],
            },
            coefficients: None,
            ridge_days: 0,
        });
    };
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    let mut seen = 0usize;
    let mut ridge_days = 0;
    let mut mean_out = Vec::with_capacity(obs.len());
    for t in 0..obs.len() {
        let pred = match &x[t] {
            Some(f) if seen > p => {
                let (b, ridged) = solve_normal(&xtx, &xty);
                if ridged {
                    ridge_days += 1;
                }
                b.map(|b| b.dot(f))
            }
            _ => None,
        };
        mean_out.push(pred);
        if let (Some(f), Some(y)) = (&x[t], obs[t]) {
            if f.len() != p {
                return Err(Error::Data(format!("day {t}: {} features, expected {p}", f.len())));
            }
            xtx.ger(1.0, f, f, 1.0);
            xty.axpy(y, f, 1.0);
            seen += 1;
        }
    }
    if ridge_days > 0 {
        log::warn!("least-squares design was near singular on {ridge_days} days; ridge {HAR_RIDGE} applied");
    }
    let coefficients = if seen > p { solve_normal(&xtx, &xty).0 } else { None };
    let interval = rolling_residual_interval(&mean_out, obs, window, mass);
    Ok(HarFit {
        stream: ForecastStream {
            mean: mean_out,
            interval,
        },
        coefficients,
        ridge_days,
    })
}

/// Cross-sectional summary of one model.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub median_mad: f64,
    pub median_rmse: f64,
    pub median_r2: Option<f64>,
    pub median_mz: Option<f64>,
    pub series: usize,
    pub ci_table: Vec<CoverageRow>,
}

impl EvalReport {
    /// Medians over the per-series metrics; series shorter than
    /// [`MIN_POINTS`] are left out.
    pub fn from_series(model: &str, per_series: &[PointMetrics], ci_table: Vec<CoverageRow>) -> Result<Self> {
        if per_series.is_empty() {
            return Err(Error::NotReady {
                needed: 1,
                available: 0,
            });
        }
        let pick = |f: &dyn Fn(&PointMetrics) -> Option<f64>| -> Option<f64> {
            let v: Vec<f64> = per_series.iter().filter_map(f).collect();
            (!v.is_empty()).then(|| median(&v))
        };
        Ok(EvalReport {
            model: model.to_string(),
            median_mad: pick(&|m| Some(m.mad)).expect("non-empty"),
            median_rmse: pick(&|m| Some(m.rmse)).expect("non-empty"),
            median_r2: pick(&|m| m.r2),
            median_mz: pick(&|m| m.mz),
            series: per_series.len(),
            ci_table,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn some(v: &[f64]) -> Vec<Option<f64>> {
        v.iter().copied().map(Some).collect()
    }

    #[test]
    fn perfect_and_biased_forecasts() {
        let obs: Vec<f64> = (0..50).map(|t| (t as f64 * 0.3).sin()).collect();
        let m = point_metrics(&some(&obs), &some(&obs)).unwrap();
        assert_eq!((m.mad, m.rmse), (0.0, 0.0));
        assert!((m.r2.unwrap() - 1.0).abs() < 1e-12 && (m.mz.unwrap() - 1.0).abs() < 1e-12);
        let biased: Vec<f64> = obs.iter().map(|o| o + 1.0).collect();
        let b = point_metrics(&some(&biased), &some(&obs)).unwrap();
        assert!((b.mad - 1.0).abs() < 1e-12 && (b.rmse - 1.0).abs() < 1e-12);
        assert!((b.mz.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_predictions_have_no_slope() {
        let obs: Vec<f64> = (0..40).map(|t| t as f64).collect();
        let m = point_metrics(&some(&[3.0; 40]), &some(&obs)).unwrap();
        assert_eq!((m.mz, m.r2), (None, None));
        assert!(matches!(
            point_metrics(&some(&[1.0; 10]), &some(&[1.0; 10])),
            Err(Error::NotReady { .. })
        ));
    }

    #[test]
    fn matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..200).map(|_| rng.sample(StandardNormal)).collect();
        let o: Vec<f64> = p.iter().map(|x: &f64| 0.7 * x + 0.2 + 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
        let m = point_metrics(&some(&p), &some(&o)).unwrap();
        // [1 p] β = o by normal equations
        let x = DMatrix::from_fn(200, 2, |i, j| if j == 0 { 1.0 } else { p[i] });
        let y = DVector::from_vec(o.clone());
        let beta = (x.transpose() * &x).try_inverse().unwrap() * x.transpose() * &y;
        let fit = &x * &beta;
        let ybar = o.iter().sum::<f64>() / 200.0;
        let ss_res: f64 = (&y - &fit).norm_squared();
        let ss_tot: f64 = o.iter().map(|v| (v - ybar).powi(2)).sum();
        assert!((m.mz.unwrap() - beta[1]).abs() < 1e-10);
        assert!((m.r2.unwrap() - (1.0 - ss_res / ss_tot)).abs() < 1e-10);
        let mse: f64 = p.iter().zip(&o).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 200.0;
        assert!((m.rmse - mse.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coverage_extremes_and_filters() {
        let obs = some(&[0.0, 1.0, -2.0, 3.0]);
        let moves = some(&[0.1, -0.5, 1.0, 2.0]);
        let wide = vec![Some(Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY }); 4];
        let r = ci_coverage(&wide, &obs, &moves, MoveFilter::Abs, 0.0).unwrap().unwrap();
        assert_eq!((r.pct_inside, r.count), (100.0, 4));
        let point: Vec<Option<Interval>> = [0.5, 1.5, -1.0, 2.0].iter().map(|&c| Some(Interval { lo: c, hi: c })).collect();
        let r = ci_coverage(&point, &obs, &moves, MoveFilter::Abs, 0.0).unwrap().unwrap();
        assert_eq!(r.pct_inside, 0.0);
        let pos = ci_coverage(&wide, &obs, &moves, MoveFilter::Positive, 0.5).unwrap().unwrap();
        assert_eq!(pos.count, 2);
        assert!((pos.mean_move - 1.5).abs() < 1e-15);
        let abs = ci_coverage(&wide, &obs, &moves, MoveFilter::Abs, 0.5).unwrap().unwrap();
        assert_eq!(abs.count, 3);
        assert!(ci_coverage(&wide, &obs, &moves, MoveFilter::Abs, 10.0).unwrap().is_none());
    }

    proptest! {
        #[test]
        fn coverage_is_monotone_in_width(
            data in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, 0.0f64..2.0), 1..60),
            k in 1.0f64..3.0,
        ) {
            let obs: Vec<Option<f64>> = data.iter().map(|d| Some(d.0)).collect();
            let centers: Vec<Option<f64>> = data.iter().map(|d| Some(d.1)).collect();
            let ivs: Vec<Option<Interval>> = data.iter().map(|d| Some(Interval { lo: d.1 - d.2, hi: d.1 + d.2 })).collect();
            let wider = rescale_intervals(&ivs, &centers, k);
            let moves = vec![Some(1.0); data.len()];
            let a = ci_coverage(&ivs, &obs, &moves, MoveFilter::Abs, 0.0).unwrap().unwrap();
            let b = ci_coverage(&wider, &obs, &moves, MoveFilter::Abs, 0.0).unwrap().unwrap();
            prop_assert!(b.pct_inside >= a.pct_inside);
        }

        #[test]
        fn report_ignores_series_order(
            vals in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..12),
            seed in 0u64..1000,
        ) {
            let ms: Vec<PointMetrics> = vals.iter().map(|v| PointMetrics { mad: v.0, rmse: v.1, r2: Some(v.2), mz: None, n: 30 }).collect();
            let mut shuffled = ms.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            prop_assert_eq!(EvalReport::from_series("m", &ms, vec![]).unwrap(), EvalReport::from_series("m", &shuffled, vec![]).unwrap());
        }
    }

    #[test]
    fn calibration_hits_target_width() {
        let ivs: Vec<Option<Interval>> = (1..20).map(|i| Some(Interval { lo: -(i as f64), hi: 0.5 * i as f64 })).collect();
        let centers = vec![Some(0.0); 19];
        let k = calibrate_multiplier(&ivs, 3.0).unwrap();
        let scaled = rescale_intervals(&ivs, &centers, k);
        let w = mean(&scaled.iter().flatten().map(Interval::width).collect::<Vec<_>>());
        assert!((w / 3.0 - 1.0).abs() < 0.01);
        assert!(calibrate_multiplier(&[Some(Interval { lo: 1.0, hi: 1.0 })], 1.0).is_err());
    }

    #[test]
    fn persistence_is_lagged_observation() {
        let obs = some(&(0..100).map(|t| t as f64 * 0.5).collect::<Vec<_>>());
        let s = persistence_baseline(&obs, 30, 0.9);
        assert_eq!(s.mean[0], None);
        for t in 1..100 {
            assert_eq!(s.mean[t], obs[t - 1]);
        }
        assert!(s.interval[30].is_none() && s.interval[31].is_some());
    }

    #[test]
    fn rolling_interval_uses_past_only() {
        let pred = some(&[0.0; 40]);
        let mut obs = some(&(0..40).map(|t| (t % 2) as f64).collect::<Vec<_>>());
        let a = rolling_residual_interval(&pred, &obs, 30, 0.9);
        obs[35] = Some(1e6);
        let b = rolling_residual_interval(&pred, &obs, 30, 0.9);
        assert_eq!(a[..=35], b[..=35]);
        assert_ne!(a[36], b[36]);
    }

    /// Cascade regressors from a long simulated HAR recursion.
    fn har_data(n: usize, beta: [f64; 3], noise: f64, seed: u64) -> (Vec<Option<DVector<f64>>>, Vec<Option<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0.0; n + 20];
        for t in 20..v.len() {
            let w = v[t - 5..t].iter().sum::<f64>() / 5.0;
            let m = v[t - 20..t].iter().sum::<f64>() / 20.0;
            v[t] = 0.05 + beta[0] * v[t - 1] + beta[1] * w + beta[2] * m + noise * rng.sample::<f64, _>(StandardNormal);
        }
        let x = (20..v.len())
            .map(|t| {
                let w = v[t - 5..t].iter().sum::<f64>() / 5.0;
                let m = v[t - 20..t].iter().sum::<f64>() / 20.0;
                Some(DVector::from_vec(vec![1.0, v[t - 1], w, m]))
            })
            .collect();
        (x, v[20..].iter().copied().map(Some).collect())
    }

    #[test]
    fn har_recovers_known_coefficients() {
        let (x, y) = har_data(40_000, [0.4, 0.3, 0.2], 1e-3, 6);
        let fit = har_baseline(&x, &y, 30, 0.9).unwrap();
        let b = fit.coefficients.unwrap();
        for (k, want) in [0.4, 0.3, 0.2].into_iter().enumerate() {
            assert!((b[k + 1] - want).abs() < 0.02, "{b}");
        }
        assert!(fit.stream.mean[..5].iter().all(Option::is_none));
        assert!(fit.stream.mean[100].is_some());
    }

    #[test]
    fn collinear_design_uses_ridge() {
        let x: Vec<Option<DVector<f64>>> = (0..60).map(|t| Some(DVector::from_vec(vec![1.0, t as f64, t as f64]))).collect();
        let y: Vec<Option<f64>> = (0..60).map(|t| Some(2.0 * t as f64)).collect();
        let fit = har_baseline(&x, &y, 30, 0.9).unwrap();
        assert!(fit.ridge_days > 0);
        assert!((fit.stream.mean[59].unwrap() - 118.0).abs() < 1e-3);
    }
}
