use super::{ohlc_features, OhlcFeatures, PriceSeries, RvConfig};
use crate::error::{Error, Result};

/// Realized variances below this are floored before taking logs.
pub const RV_FLOOR: f64 = 1e-12;

/// `lag`-day log-returns; entry `t` is `log p_t − log p_{t−lag}` or `None`
/// when either endpoint is missing or `t < lag`.
pub fn log_returns(series: &PriceSeries, lag: usize) -> Result<Vec<Option<f64>>> {
    if lag == 0 {
        return Err(Error::config("lag", "must be positive"));
    }
    if let Some(p) = series.close.iter().flatten().find(|p| !(**p > 0.0)) {
        return Err(Error::Data(format!("{}: non-positive price {p}", series.id)));
    }
    let logp = series.log_prices();
    Ok((0..logp.len())
        .map(|t| {
            if t < lag {
                return None;
            }
            Some(logp[t]? - logp[t - lag]?)
        })
        .collect())
}

/// Decay used at return scale `s`: ρ^{(L−1)/(L−s)}.
pub fn scale_decay(cfg: &RvConfig, s: usize) -> f64 {
    let l = cfg.window as f64;
    cfg.rho.powf((l - 1.0) / (l - s as f64))
}

/// Kernel weights for the `L − s` overlapping `s`-scale returns in a window
/// of `L` prices, most recent first. Their sum is `1 − ρ^{L−1}` at every scale.
pub fn scale_weights(cfg: &RvConfig, s: usize) -> Vec<f64> {
    let rho_s = scale_decay(cfg, s);
    let n = cfg.window.saturating_sub(s);
    let mut out = Vec::with_capacity(n);
    let mut w = 1.0 - rho_s;
    for _ in 0..n {
        out.push(w);
        w *= rho_s;
    }
    out
}

/// The `s`-scale returns ending at `t, t−1, …` inside the window of `L`
/// prices ending at `t`.
fn window_returns(logp: &[Option<f64>], cfg: &RvConfig, s: usize, t: usize) -> Result<Vec<f64>> {
    let l = cfg.window;
    if t >= logp.len() {
        return Err(Error::Data(format!("index {t} out of range")));
    }
    if t + 1 < l {
        return Err(Error::NotReady {
            needed: l,
            available: t + 1,
        });
    }
    let start = t + 1 - l;
    let window = &logp[start..=t];
    let available = window.iter().filter(|p| p.is_some()).count();
    if available < l {
        return Err(Error::NotReady { needed: l, available });
    }
    Ok((0..l - s)
        .map(|i| {
            let end = t - i;
            logp[end].unwrap() - logp[end - s].unwrap()
        })
        .collect())
}

fn realized_variance_log(logp: &[Option<f64>], cfg: &RvConfig, s: usize, t: usize) -> Result<f64> {
    let r = window_returns(logp, cfg, s, t)?;
    let w = scale_weights(cfg, s);
    let sum: f64 = w.iter().zip(&r).map(|(w, r)| w * r * r).sum();
    Ok(sum / s as f64)
}

/// Exponentially weighted realized variance of `s`-scale log-returns over the
/// `L` prices ending at day `t`.
pub fn realized_variance(series: &PriceSeries, cfg: &RvConfig, s: usize, t: usize) -> Result<f64> {
    if s == 0 || s >= cfg.window {
        return Err(Error::config("scale", "must lie in [1, window)"));
    }
    realized_variance_log(&series.log_prices(), cfg, s, t)
}

fn leverage_log(logp: &[Option<f64>], cfg: &RvConfig, s: usize, t: usize) -> Result<(f64, f64)> {
    let r = window_returns(logp, cfg, s, t)?;
    let w = scale_weights(cfg, s);
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (w, r) in w.iter().zip(&r) {
        if *r > 0.0 {
            pos += w * r;
        } else {
            neg += w * r;
        }
    }
    Ok((pos, neg))
}

/// Kernel-weighted sums of past positive and negative `s`-scale returns.
pub fn leverage(series: &PriceSeries, cfg: &RvConfig, s: usize, t: usize) -> Result<(f64, f64)> {
    leverage_log(&series.log_prices(), cfg, s, t)
}

/// Raw endogenous features of one series at one day.
#[derive(Debug, Clone, PartialEq)]
pub struct EndogenousRaw {
    /// log RV per configured scale.
    pub log_rv: Vec<f64>,
    pub lev_pos: Vec<f64>,
    pub lev_neg: Vec<f64>,
    pub ohlc: Option<OhlcFeatures>,
    /// Set when the price history needed at this day is incomplete; all
    /// values are then zero.
    pub missing: bool,
}

impl EndogenousRaw {
    fn missing(n_scales: usize, with_ohlc: bool) -> Self {
        EndogenousRaw {
            log_rv: vec![0.0; n_scales],
            lev_pos: vec![0.0; n_scales],
            lev_neg: vec![0.0; n_scales],
            ohlc: with_ohlc.then(OhlcFeatures::zero),
            missing: true,
        }
    }
}

pub(crate) fn endogenous_from_log(
    logp: &[Option<f64>],
    series: &PriceSeries,
    cfg: &RvConfig,
    t: usize,
    with_ohlc: bool,
) -> EndogenousRaw {
    let n = cfg.scales.len();
    let mut out = EndogenousRaw {
        log_rv: Vec::with_capacity(n),
        lev_pos: Vec::with_capacity(n),
        lev_neg: Vec::with_capacity(n),
        ohlc: None,
        missing: false,
    };
    for &s in &cfg.scales {
        let rv = match realized_variance_log(logp, cfg, s, t) {
            Ok(v) => v,
            Err(_) => return EndogenousRaw::missing(n, with_ohlc),
        };
        let (pos, neg) = leverage_log(logp, cfg, s, t).expect("window already validated");
        out.log_rv.push(rv.max(RV_FLOOR).ln());
        out.lev_pos.push(pos);
        out.lev_neg.push(neg);
    }
    if with_ohlc {
        let bar_pair = series.bars.as_ref().and_then(|bars| {
            if t == 0 {
                return None;
            }
            Some((bars[t]?, bars[t - 1]?))
        });
        out.ohlc = Some(match bar_pair {
            Some((b, prev)) => ohlc_features(&b, &prev),
            None => OhlcFeatures::zero(),
        });
    }
    out
}

/// Log realized variance at every scale plus leverage (and optionally OHLC)
/// terms at day `t`. Incomplete history yields all-zero values flagged
/// `missing`.
pub fn log_rv_features(series: &PriceSeries, cfg: &RvConfig, t: usize, with_ohlc: bool) -> EndogenousRaw {
    endogenous_from_log(&series.log_prices(), series, cfg, t, with_ohlc)
}

/// Rescaled realized variance for lags `1..=max_lag` at the last day of the
/// series, normalized so the lag-one value is 1.
pub fn variogram(series: &PriceSeries, rho: f64, window: usize, max_lag: usize) -> Result<Vec<f64>> {
    let cfg = RvConfig {
        rho,
        window,
        scales: (1..=max_lag).collect(),
    };
    cfg.validate()?;
    let logp = series.log_prices();
    if logp.is_empty() {
        return Err(Error::NotReady { needed: window, available: 0 });
    }
    let t = logp.len() - 1;
    let raw: Vec<f64> = cfg
        .scales
        .iter()
        .map(|&l| realized_variance_log(&logp, &cfg, l, t))
        .collect::<Result<_>>()?;
    if raw[0] <= 0.0 {
        return Err(Error::Degenerate(format!("{}: lag-one variance is zero", series.id)));
    }
    Ok(raw.iter().map(|v| v / raw[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn walk(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eps = Normal::new(0.0, sigma).unwrap();
        let mut lp = 4.0f64;
        (0..n)
            .map(|_| {
                lp += eps.sample(&mut rng);
                lp.exp()
            })
            .collect()
    }

    #[test]
    fn log_returns_trivial_cases() {
        let s = PriceSeries::from_closes("a", &[100.0, 100.0]).unwrap();
        assert_eq!(log_returns(&s, 1).unwrap()[1], Some(0.0));
        let s = PriceSeries::from_closes("a", &[100.0, 100.0 * std::f64::consts::E]).unwrap();
        assert!((log_returns(&s, 1).unwrap()[1].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn log_returns_match_loop() {
        let p = walk(50, 0.02, 1);
        let s = PriceSeries::from_closes("a", &p).unwrap();
        let r = log_returns(&s, 5).unwrap();
        for t in 0..50 {
            if t < 5 {
                assert!(r[t].is_none());
            } else {
                assert_eq!(r[t].unwrap(), p[t].ln() - p[t - 5].ln());
            }
        }
    }

    #[test]
    fn missing_endpoint_is_flagged() {
        let base = PriceSeries::from_closes("a", &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut close = base.close.clone();
        close[2] = None;
        let s = PriceSeries::new("a", base.dates.clone(), close, None).unwrap();
        let r = log_returns(&s, 1).unwrap();
        assert!(r[2].is_none() && r[3].is_none());
        assert!(r[1].is_some());
    }

    #[test]
    fn non_positive_price_rejected() {
        assert!(PriceSeries::from_closes("a", &[1.0, 0.0]).is_err());
        assert!(PriceSeries::from_closes("a", &[1.0, -3.0]).is_err());
    }

    #[test]
    fn weight_sums_equal_across_scales() {
        let cfg = RvConfig::default();
        let target = 1.0 - cfg.rho.powi(cfg.window as i32 - 1);
        for &s in &[1usize, 2, 5, 10, 20, 39] {
            let sum: f64 = scale_weights(&cfg, s).iter().sum();
            assert!((sum - target).abs() < 1e-12, "s={s}");
        }
        assert_eq!(scale_decay(&cfg, 1), cfg.rho);
    }

    #[test]
    fn constant_prices_give_zero_rv() {
        let s = PriceSeries::from_closes("a", &vec![50.0; 60]).unwrap();
        let cfg = RvConfig::default();
        for &sc in &cfg.scales {
            assert_eq!(realized_variance(&s, &cfg, sc, 59).unwrap(), 0.0);
        }
        let f = log_rv_features(&s, &cfg, 59, false);
        assert!(f.log_rv.iter().all(|v| (*v - RV_FLOOR.ln()).abs() < 1e-12));
        assert!(!f.missing);
    }

    #[test]
    fn rv_matches_direct_summation() {
        let p = walk(400, 0.01, 7);
        let s = PriceSeries::from_closes("a", &p).unwrap();
        let cfg = RvConfig {
            rho: 0.98,
            window: 180,
            scales: vec![1, 5, 20],
        };
        for &sc in &cfg.scales {
            let t = 399;
            let rho_s = 0.98f64.powf(179.0 / (180.0 - sc as f64));
            let mut oracle = 0.0;
            for i in 0..(180 - sc) {
                let r = p[t - i].ln() - p[t - i - sc].ln();
                oracle += (1.0 - rho_s) * rho_s.powi(i as i32) * r * r;
            }
            oracle /= sc as f64;
            let got = realized_variance(&s, &cfg, sc, t).unwrap();
            assert!((got - oracle).abs() < 1e-14 * oracle.max(1e-300) * 100.0, "scale {sc}");
        }
    }

    #[test]
    fn insufficient_history_is_not_ready() {
        let s = PriceSeries::from_closes("a", &walk(30, 0.01, 2)).unwrap();
        let err = realized_variance(&s, &RvConfig::default(), 1, 29).unwrap_err();
        assert!(matches!(err, Error::NotReady { .. }));
        let f = log_rv_features(&s, &RvConfig::default(), 29, false);
        assert!(f.missing);
        assert!(f.log_rv.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rising_prices_have_no_negative_leverage() {
        let p: Vec<f64> = (0..80).map(|i| 10.0 * (1.0 + 0.01 * i as f64)).collect();
        let s = PriceSeries::from_closes("a", &p).unwrap();
        let f = log_rv_features(&s, &RvConfig::default(), 79, false);
        assert!(f.lev_neg.iter().all(|v| *v == 0.0));
        assert!(f.lev_pos.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn leverage_matches_recomputation() {
        let p = walk(120, 0.02, 11);
        let s = PriceSeries::from_closes("a", &p).unwrap();
        let cfg = RvConfig::default();
        let f = log_rv_features(&s, &cfg, 100, false);
        for (k, &sc) in cfg.scales.iter().enumerate() {
            let rho_s = cfg.rho.powf(39.0 / (40.0 - sc as f64));
            let (mut pos, mut neg) = (0.0, 0.0);
            for i in 0..(40 - sc) {
                let r = p[100 - i].ln() - p[100 - i - sc].ln();
                let w = (1.0 - rho_s) * rho_s.powi(i as i32);
                if r > 0.0 {
                    pos += w * r;
                } else {
                    neg += w * r;
                }
            }
            assert!((f.lev_pos[k] - pos).abs() < 1e-13);
            assert!((f.lev_neg[k] - neg).abs() < 1e-13);
            assert!(f.lev_pos[k] >= 0.0 && f.lev_neg[k] <= 0.0);
        }
    }

    #[test]
    fn variogram_of_constant_prices_is_degenerate() {
        let s = PriceSeries::from_closes("a", &vec![10.0; 200]).unwrap();
        assert!(matches!(variogram(&s, 0.98, 180, 5), Err(Error::Degenerate(_))));
        let short = PriceSeries::from_closes("a", &vec![10.0; 20]).unwrap();
        assert!(matches!(variogram(&short, 0.98, 180, 5), Err(Error::NotReady { .. })));
    }

    #[test]
    fn variogram_lag_one_is_unity() {
        let s = PriceSeries::from_closes("a", &walk(300, 0.01, 5)).unwrap();
        let v = variogram(&s, 0.98, 180, 5).unwrap();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], 1.0);
    }
}
