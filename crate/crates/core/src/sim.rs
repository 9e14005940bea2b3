//! Synthetic price panels with known structure.

use chrono::NaiveDate;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{trading_days, Panel, PriceSeries};
use crate::error::{Error, Result};
use crate::rng::{stream, Phase};

const START_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// Independent random walks with constant per-series drift and volatility
    /// drawn uniformly from the ranges.
    Null { drift: (f64, f64), vol: (f64, f64) },
    /// Latent daily log-variance following a HAR cascade
    /// `v' = c + β_d v + β_w v̄₅ + β_m v̄₂₀ + σ ε`, returns `exp(v/2) ε`.
    HarKnown { beta: [f64; 3], mean_log_var: f64, noise: f64 },
    /// Series 0 drives. Its log-variance `h₀` is AR(1); each follower's is
    /// `h_f,t = μ + β_f (h₀,t−lag − μ) + u_f,t` with `u_f` an independent
    /// AR(1) of the same persistence whose shocks are `idiosyncratic` times
    /// the driver's. Returns are `exp(h/2) ε` with independent `ε`.
    FactorDriven {
        loading: (f64, f64),
        lag: usize,
        persistence: f64,
        vol_of_vol: f64,
        mean_log_var: f64,
        idiosyncratic: f64,
    },
}

impl Generator {
    pub fn name(&self) -> &'static str {
        match self {
            Generator::Null { .. } => "null",
            Generator::HarKnown { .. } => "har-known",
            Generator::FactorDriven { .. } => "factor-driven",
        }
    }

    pub fn null() -> Self {
        Generator::Null {
            drift: (-5e-4, 5e-4),
            vol: (0.005, 0.03),
        }
    }

    pub fn har_known() -> Self {
        Generator::HarKnown {
            beta: [0.4, 0.3, 0.2],
            mean_log_var: (1e-4f64).ln(),
            noise: 0.1,
        }
    }

    pub fn factor_driven() -> Self {
        Generator::FactorDriven {
            loading: (0.6, 1.0),
            lag: 1,
            persistence: 0.98,
            vol_of_vol: 0.2,
            mean_log_var: (1e-4f64).ln(),
            idiosyncratic: 1.0,
        }
    }

    /// Parse a generator name into its default parameters.
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "null" | "null-random-walk" => Ok(Self::null()),
            "har-known" | "har" => Ok(Self::har_known()),
            "factor-driven" | "factor" => Ok(Self::factor_driven()),
            other => Err(Error::config("sim.generator", format!("unknown generator `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSpec {
    pub n_series: usize,
    pub n_days: usize,
    pub seed: u64,
    pub generator: Generator,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            n_series: 30,
            n_days: 1500,
            seed: 0,
            generator: Generator::null(),
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 {
            return Err(Error::config("sim.series", "must be at least 1"));
        }
        if self.n_days < 100 {
            return Err(Error::config("sim.days", "must be at least 100"));
        }
        Ok(())
    }
}

/// What the generator actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub generator: &'static str,
    /// Per-series drift and volatility (null generator).
    pub drift: Vec<f64>,
    pub vol: Vec<f64>,
    /// HAR coefficients `(β_d, β_w, β_m)` and intercept.
    pub har_beta: Option<[f64; 3]>,
    pub har_intercept: Option<f64>,
    /// Latent daily log-variance per series and day (HAR and factor
    /// generators).
    pub latent_log_var: Vec<Vec<f64>>,
    pub driver: Option<usize>,
    /// Follower loadings on the driver's lagged log-variance; 0 for the
    /// driver.
    pub loadings: Vec<f64>,
}

impl GroundTruth {
    fn empty(generator: &'static str) -> Self {
        GroundTruth {
            generator,
            drift: Vec::new(),
            vol: Vec::new(),
            har_beta: None,
            har_intercept: None,
            latent_log_var: Vec::new(),
            driver: None,
            loadings: Vec::new(),
        }
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn prices_from_returns(id: String, dates: &[NaiveDate], returns: &[f64]) -> Result<PriceSeries> {
    let mut lp = START_PRICE.ln();
    let close: Vec<Option<f64>> = returns
        .iter()
        .enumerate()
        .map(|(t, r)| {
            if t > 0 {
                lp += r;
            }
            Some(lp.exp())
        })
        .collect();
    PriceSeries::new(id, dates.to_vec(), close, None)
}

/// Series identifiers `S000`, `S001`, …
pub fn series_id(j: usize) -> String {
    format!("S{j:03}")
}

/// Deterministic panel and ground truth for `spec`.
pub fn generate(spec: &SimSpec) -> Result<(Panel, GroundTruth)> {
    spec.validate()?;
    let dates = trading_days(NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date"), spec.n_days);
    let n = spec.n_days;
    let rng_for = |j: usize| stream(spec.seed, 0, Phase::Simulation, j);
    let mut truth = GroundTruth::empty(spec.generator.name());
    let returns: Vec<Vec<f64>> = match &spec.generator {
        Generator::Null { drift, vol } => (0..spec.n_series)
            .map(|j| {
                let mut rng = rng_for(j);
                let mu = uniform(&mut rng, *drift);
                let sigma = uniform(&mut rng, *vol);
                truth.drift.push(mu);
                truth.vol.push(sigma);
                (0..n).map(|_| mu + sigma * normal(&mut rng)).collect()
            })
            .collect(),
        Generator::HarKnown { beta, mean_log_var, noise } => {
            let persistence: f64 = beta.iter().sum();
            if persistence >= 1.0 {
                return Err(Error::config("sim.har_beta", "coefficients must sum below 1"));
            }
            let c = mean_log_var * (1.0 - persistence);
            truth.har_beta = Some(*beta);
            truth.har_intercept = Some(c);
            (0..spec.n_series)
                .map(|j| {
                    let mut rng = rng_for(j);
                    let burn = 200;
                    let mut v = vec![*mean_log_var; 20];
                    for _ in 0..(burn + n) {
                        let k = v.len();
                        let w = v[k - 5..].iter().sum::<f64>() / 5.0;
                        let m = v[k - 20..].iter().sum::<f64>() / 20.0;
                        v.push(c + beta[0] * v[k - 1] + beta[1] * w + beta[2] * m + noise * normal(&mut rng));
                    }
                    let latent = v[v.len() - n..].to_vec();
                    let r = latent.iter().map(|lv| (lv / 2.0).exp() * normal(&mut rng)).collect();
                    truth.latent_log_var.push(latent);
                    r
                })
                .collect()
        }
        Generator::FactorDriven {
            loading,
            lag,
            persistence,
            vol_of_vol,
            mean_log_var,
            idiosyncratic,
        } => {
            if !(persistence.abs() < 1.0) {
                return Err(Error::config("sim.persistence", "must lie in (−1, 1)"));
            }
            if !(*idiosyncratic >= 0.0) {
                return Err(Error::config("sim.idiosyncratic", "must be non-negative"));
            }
            let sd_h = 1.0 / (1.0 - persistence * persistence).sqrt();
            // centred AR(1) path with unit-variance shocks scaled by `vol`
            let ar_path = |rng: &mut ChaCha8Rng, vol: f64| -> Vec<f64> {
                let mut x = vol * sd_h * normal(rng);
                (0..n)
                    .map(|_| {
                        x = persistence * x + vol * normal(rng);
                        x
                    })
                    .collect()
            };
            let mut rng = rng_for(0);
            let h0 = ar_path(&mut rng, *vol_of_vol);
            truth.driver = Some(0);
            truth.loadings.push(0.0);
            let mut all = Vec::with_capacity(spec.n_series);
            let mut log_var = Vec::with_capacity(spec.n_series);
            for j in 0..spec.n_series {
                let mut rng = rng_for(j);
                let h: Vec<f64> = if j == 0 {
                    h0.iter().map(|x| mean_log_var + x).collect()
                } else {
                    let b = uniform(&mut rng, *loading);
                    truth.loadings.push(b);
                    let u = ar_path(&mut rng, idiosyncratic * vol_of_vol);
                    (0..n)
                        .map(|t| {
                            let lead = if t >= *lag { h0[t - lag] } else { 0.0 };
                            mean_log_var + b * lead + u[t]
                        })
                        .collect()
                };
                all.push(h.iter().map(|h| (h / 2.0).exp() * normal(&mut rng)).collect());
                log_var.push(h);
            }
            truth.latent_log_var = log_var;
            all
        }
    };
    let series = returns
        .iter()
        .enumerate()
        .map(|(j, r)| prices_from_returns(series_id(j), &dates, r))
        .collect::<Result<Vec<_>>>()?;
    Ok((Panel::new(dates, series)?, truth))
}
