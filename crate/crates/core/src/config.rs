//! Run configuration as flat `section.key = value` text.
//!
//! Every field has a key; [`RunConfig::to_text`] writes all of them and
//! [`RunConfig::parse`] reads them back exactly. Later assignments win, so
//! command-line overrides are applied with [`RunConfig::set`].

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use chrono::NaiveDate;

use crate::data::RvConfig;
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::signals::{ChangePointConfig, Group};
use crate::sim::{Generator, SimSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    Sim(SimSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalConfig {
    pub groups: Vec<Group>,
    pub lags: Vec<usize>,
    pub threshold: f64,
    /// Lags are selected on days before this date; `None` uses the fixed lag.
    pub cutoff: Option<NaiveDate>,
    pub default_lag: usize,
    pub change_point: ChangePointConfig,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            groups: Group::ALL.to_vec(),
            lags: vec![1, 2, 5, 10, 20],
            threshold: 0.0,
            cutoff: None,
            default_lag: 20,
            change_point: ChangePointConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsConfig {
    /// Residuals behind the comparator intervals.
    pub window: usize,
    /// Quantile levels of `|move|` (and of `move`) defining coverage rows.
    pub thresholds: Vec<f64>,
    /// Common interval width as a multiple of the mean absolute move.
    pub width_ratio: f64,
    /// Also run the engine without parents on `{offset, rv_d}`.
    pub plain: bool,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            window: 30,
            thresholds: vec![0.0, 0.5, 0.75, 0.9],
            width_ratio: 1.98,
            plain: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: DataSource,
    pub rv: RvConfig,
    pub features: FeatureConfig,
    /// `engine.seed` is overwritten by `seed`.
    pub engine: EngineConfig,
    pub signals: SignalConfig,
    pub metrics: MetricsConfig,
    /// Largest return-frequency lag in variogram output.
    pub variogram_max_lag: usize,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::Sim(SimSpec::default()),
            rv: RvConfig::default(),
            features: FeatureConfig::default(),
            engine: EngineConfig::default(),
            signals: SignalConfig::default(),
            metrics: MetricsConfig::default(),
            variogram_max_lag: 20,
            out: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(Error::config(key, format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse_value(key, v)).collect()
}

fn parse_pair(key: &str, value: &str) -> Result<(f64, f64)> {
    match parse_list::<f64>(key, value)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::config(key, "expected two comma-separated numbers")),
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Defaults overridden by the assignments in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `section.key = value`"))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    fn sim_mut(&mut self, key: &str) -> Result<&mut SimSpec> {
        match &mut self.data {
            DataSource::Sim(s) => Ok(s),
            DataSource::Csv(_) => Err(Error::config(key, "only applies to simulated data")),
        }
    }

    /// Assign one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let k = key;
        match key {
            "run.seed" => self.seed = parse_value(k, value)?,
            "run.out" => self.out = PathBuf::from(value),
            "data.source" => {
                self.data = match value {
                    "sim" => DataSource::Sim(SimSpec::default()),
                    "csv" => DataSource::Csv(PathBuf::new()),
                    other => return Err(Error::config(k, format!("expected `sim` or `csv`, got `{other}`"))),
                }
            }
            "data.path" => self.data = DataSource::Csv(PathBuf::from(value)),
            "sim.generator" => self.sim_mut(k)?.generator = Generator::from_name(value)?,
            "sim.series" => self.sim_mut(k)?.n_series = parse_value(k, value)?,
            "sim.days" => self.sim_mut(k)?.n_days = parse_value(k, value)?,
            "sim.drift" | "sim.vol" | "sim.har_beta" | "sim.mean_log_var" | "sim.noise" | "sim.loading"
            | "sim.lag" | "sim.persistence" | "sim.vol_of_vol" | "sim.idiosyncratic" => {
                let gen = &mut self.sim_mut(k)?.generator;
                set_generator(gen, k, value)?
            }
            "rv.rho" => self.rv.rho = parse_value(k, value)?,
            "rv.window" => self.rv.window = parse_value(k, value)?,
            "rv.scales" => self.rv.scales = parse_list(k, value)?,
            "features.har" => self.features.har = parse_bool(k, value)?,
            "features.leverage" => self.features.leverage = parse_bool(k, value)?,
            "features.ohlc" => self.features.ohlc = parse_bool(k, value)?,
            "features.warmup" => self.features.warmup = parse_value(k, value)?,
            "discount.delta_phi" => self.engine.discount.delta_phi = parse_value(k, value)?,
            "discount.delta_gamma" => self.engine.discount.delta_gamma = parse_value(k, value)?,
            "discount.beta_lambda" => self.engine.discount.beta_lambda = parse_value(k, value)?,
            "parents.enabled" => self.engine.parents.enabled = parse_bool(k, value)?,
            "parents.n_core" => self.engine.parents.n_core = parse_value(k, value)?,
            "parents.n_up" => self.engine.parents.n_up = parse_value(k, value)?,
            "parents.n_down" => self.engine.parents.n_down = parse_value(k, value)?,
            "parents.delta_t" => self.engine.parents.delta_t = parse_value(k, value)?,
            "parents.n_max" => self.engine.parents.n_max = parse_value(k, value)?,
            "parents.delta_w" => self.engine.parents.delta_w = parse_value(k, value)?,
            "parents.beta_w" => self.engine.parents.beta_w = parse_value(k, value)?,
            "parents.entry_variance" => self.engine.parents.entry_variance = parse_value(k, value)?,
            "engine.n_mc" => self.engine.n_mc = parse_value(k, value)?,
            "engine.interval_mass" => self.engine.interval_mass = parse_value(k, value)?,
            "engine.ess_floor" => self.engine.ess_floor = parse_value(k, value)?,
            "engine.prior_variance" => self.engine.prior_variance = parse_value(k, value)?,
            "engine.prior_dof" => self.engine.prior_dof = parse_value(k, value)?,
            "engine.prior_scale" => self.engine.prior_scale = parse_value(k, value)?,
            "signals.groups" => {
                self.signals.groups = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| Group::parse(s.trim()))
                    .collect::<Result<_>>()?
            }
            "signals.lags" => self.signals.lags = parse_list(k, value)?,
            "signals.threshold" => self.signals.threshold = parse_value(k, value)?,
            "signals.cutoff" => {
                self.signals.cutoff = match value {
                    "none" | "" => None,
                    d => Some(
                        NaiveDate::parse_from_str(d, "%Y-%m-%d")
                            .map_err(|_| Error::config(k, format!("`{d}` is not a YYYY-MM-DD date")))?,
                    ),
                }
            }
            "signals.default_lag" => self.signals.default_lag = parse_value(k, value)?,
            "signals.deadband_window" => self.signals.change_point.window = parse_value(k, value)?,
            "signals.deadband_fraction" => self.signals.change_point.fraction = parse_value(k, value)?,
            "metrics.window" => self.metrics.window = parse_value(k, value)?,
            "metrics.thresholds" => self.metrics.thresholds = parse_list(k, value)?,
            "metrics.width_ratio" => self.metrics.width_ratio = parse_value(k, value)?,
            "metrics.plain" => self.metrics.plain = parse_bool(k, value)?,
            "variogram.max_lag" => self.variogram_max_lag = parse_value(k, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("run.seed", self.seed.to_string());
        put("run.out", self.out.display().to_string());
        match &self.data {
            DataSource::Csv(p) => {
                put("data.source", "csv".into());
                put("data.path", p.display().to_string());
            }
            DataSource::Sim(sim) => {
                put("data.source", "sim".into());
                put("sim.generator", sim.generator.name().into());
                put("sim.series", sim.n_series.to_string());
                put("sim.days", sim.n_days.to_string());
                match &sim.generator {
                    Generator::Null { drift, vol } => {
                        put("sim.drift", format!("{},{}", drift.0, drift.1));
                        put("sim.vol", format!("{},{}", vol.0, vol.1));
                    }
                    Generator::HarKnown {
                        beta,
                        mean_log_var,
                        noise,
                    } => {
                        put("sim.har_beta", join(beta));
                        put("sim.mean_log_var", mean_log_var.to_string());
                        put("sim.noise", noise.to_string());
                    }
                    Generator::FactorDriven {
                        loading,
                        lag,
                        persistence,
                        vol_of_vol,
                        mean_log_var,
                        idiosyncratic,
                    } => {
                        put("sim.loading", format!("{},{}", loading.0, loading.1));
                        put("sim.lag", lag.to_string());
                        put("sim.persistence", persistence.to_string());
                        put("sim.vol_of_vol", vol_of_vol.to_string());
                        put("sim.mean_log_var", mean_log_var.to_string());
                        put("sim.idiosyncratic", idiosyncratic.to_string());
                    }
                }
            }
        }
        put("rv.rho", self.rv.rho.to_string());
        put("rv.window", self.rv.window.to_string());
        put("rv.scales", join(&self.rv.scales));
        put("features.har", self.features.har.to_string());
        put("features.leverage", self.features.leverage.to_string());
        put("features.ohlc", self.features.ohlc.to_string());
        put("features.warmup", self.features.warmup.to_string());
        let d = &self.engine.discount;
        put("discount.delta_phi", d.delta_phi.to_string());
        put("discount.delta_gamma", d.delta_gamma.to_string());
        put("discount.beta_lambda", d.beta_lambda.to_string());
        let p = &self.engine.parents;
        put("parents.enabled", p.enabled.to_string());
        put("parents.n_core", p.n_core.to_string());
        put("parents.n_up", p.n_up.to_string());
        put("parents.n_down", p.n_down.to_string());
        put("parents.delta_t", p.delta_t.to_string());
        put("parents.n_max", p.n_max.to_string());
        put("parents.delta_w", p.delta_w.to_string());
        put("parents.beta_w", p.beta_w.to_string());
        put("parents.entry_variance", p.entry_variance.to_string());
        let e = &self.engine;
        put("engine.n_mc", e.n_mc.to_string());
        put("engine.interval_mass", e.interval_mass.to_string());
        put("engine.ess_floor", e.ess_floor.to_string());
        put("engine.prior_variance", e.prior_variance.to_string());
        put("engine.prior_dof", e.prior_dof.to_string());
        put("engine.prior_scale", e.prior_scale.to_string());
        let g = &self.signals;
        put(
            "signals.groups",
            g.groups.iter().map(|g| g.as_str()).collect::<Vec<_>>().join(","),
        );
        put("signals.lags", join(&g.lags));
        put("signals.threshold", g.threshold.to_string());
        put(
            "signals.cutoff",
            g.cutoff.map_or("none".into(), |d| d.format("%Y-%m-%d").to_string()),
        );
        put("signals.default_lag", g.default_lag.to_string());
        put("signals.deadband_window", g.change_point.window.to_string());
        put("signals.deadband_fraction", g.change_point.fraction.to_string());
        let m = &self.metrics;
        put("metrics.window", m.window.to_string());
        put("metrics.thresholds", join(&m.thresholds));
        put("metrics.width_ratio", m.width_ratio.to_string());
        put("metrics.plain", m.plain.to_string());
        put("variogram.max_lag", self.variogram_max_lag.to_string());
        s
    }

    /// Simulation spec with the run seed applied, if the source is simulated.
    pub fn sim_spec(&self) -> Option<SimSpec> {
        match &self.data {
            DataSource::Sim(s) => Some(SimSpec { seed: self.seed, ..s.clone() }),
            DataSource::Csv(_) => None,
        }
    }

    /// Engine settings with the run seed applied.
    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            seed: self.seed,
            ..self.engine.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rv.validate()?;
        self.engine_config().validate()?;
        match &self.data {
            DataSource::Sim(_) => self.sim_spec().unwrap().validate()?,
            DataSource::Csv(p) if p.as_os_str().is_empty() => {
                return Err(Error::config("data.path", "a CSV source needs a path"));
            }
            DataSource::Csv(_) => {}
        }
        if self.signals.lags.is_empty() || self.signals.lags.contains(&0) {
            return Err(Error::config("signals.lags", "must be non-empty and positive"));
        }
        if self.signals.default_lag == 0 {
            return Err(Error::config("signals.default_lag", "must be positive"));
        }
        if !(self.signals.threshold >= 0.0) {
            return Err(Error::config("signals.threshold", "must be non-negative"));
        }
        if self.signals.groups.is_empty() {
            return Err(Error::config("signals.groups", "must name at least one group"));
        }
        if self.signals.change_point.window == 0 || !(self.signals.change_point.fraction >= 0.0) {
            return Err(Error::config("signals.deadband_window", "window must be positive, fraction non-negative"));
        }
        if self.variogram_max_lag == 0 || self.rv.window <= self.variogram_max_lag {
            return Err(Error::config("variogram.max_lag", "must be positive and below rv.window"));
        }
        if self.metrics.window < 2 {
            return Err(Error::config("metrics.window", "needs at least 2 residuals"));
        }
        if self.metrics.thresholds.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::config("metrics.thresholds", "quantile levels must lie in [0, 1]"));
        }
        if !(self.metrics.width_ratio > 0.0 && self.metrics.width_ratio < 2.0) {
            return Err(Error::config("metrics.width_ratio", "must lie in (0, 2)"));
        }
        Ok(())
    }
}

fn set_generator(gen: &mut Generator, key: &str, value: &str) -> Result<()> {
    let name = gen.name();
    match (gen, key) {
        (Generator::Null { drift, .. }, "sim.drift") => *drift = parse_pair(key, value)?,
        (Generator::Null { vol, .. }, "sim.vol") => *vol = parse_pair(key, value)?,
        (Generator::HarKnown { beta, .. }, "sim.har_beta") => {
            let v: Vec<f64> = parse_list(key, value)?;
            *beta = v
                .try_into()
                .map_err(|_| Error::config(key, "expected three comma-separated numbers"))?;
        }
        (Generator::HarKnown { mean_log_var, .. }, "sim.mean_log_var")
        | (Generator::FactorDriven { mean_log_var, .. }, "sim.mean_log_var") => *mean_log_var = parse_value(key, value)?,
        (Generator::HarKnown { noise, .. }, "sim.noise") => *noise = parse_value(key, value)?,
        (Generator::FactorDriven { loading, .. }, "sim.loading") => *loading = parse_pair(key, value)?,
        (Generator::FactorDriven { lag, .. }, "sim.lag") => *lag = parse_value(key, value)?,
        (Generator::FactorDriven { persistence, .. }, "sim.persistence") => *persistence = parse_value(key, value)?,
        (Generator::FactorDriven { vol_of_vol, .. }, "sim.vol_of_vol") => *vol_of_vol = parse_value(key, value)?,
        (Generator::FactorDriven { idiosyncratic, .. }, "sim.idiosyncratic") => {
            *idiosyncratic = parse_value(key, value)?
        }
        _ => return Err(Error::config(key, format!("does not apply to the `{name}` generator"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        assert_eq!(c.engine.parents.n_core, 5);
        assert_eq!(c.signals.lags, vec![1, 2, 5, 10, 20]);
    }

    #[test]
    fn errors_name_the_field() {
        let e = RunConfig::parse("parents.n_core = five").unwrap_err();
        assert!(e.to_string().contains("parents.n_core"), "{e}");
        let e = RunConfig::parse("engine.bogus = 1").unwrap_err();
        assert!(e.to_string().contains("engine.bogus"));
        let e = RunConfig::parse("data.path = x.csv\nsim.series = 3").unwrap_err();
        assert!(e.to_string().contains("sim.series"));
        let mut c = RunConfig::default();
        c.set("discount.delta_phi", "1.5").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("delta_phi"));
    }

    #[test]
    fn comments_and_overrides() {
        let c = RunConfig::parse("# experiment\nrun.seed = 4 # trailing\n\nrun.seed = 9\nsignals.cutoff = 2010-01-04\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.signals.cutoff, NaiveDate::from_ymd_opt(2010, 1, 4));
        assert_eq!(c.engine_config().seed, 9);
    }

    fn generator() -> impl Strategy<Value = Generator> {
        prop_oneof![
            (-1e-3f64..1e-3, 1e-3f64..0.05).prop_map(|(a, b)| Generator::Null { drift: (a, a.abs()), vol: (b, 2.0 * b) }),
            (0.0f64..0.5, -12.0f64..-6.0, 0.01f64..0.5).prop_map(|(b, m, n)| Generator::HarKnown {
                beta: [b, b / 2.0, b / 3.0],
                mean_log_var: m,
                noise: n,
            }),
            (0.1f64..1.0, 0usize..3, 0.5f64..0.99, 0.05f64..0.5, 0.0f64..2.0).prop_map(|(l, lag, p, v, i)| {
                Generator::FactorDriven {
                    loading: (l, l + 0.3),
                    lag,
                    persistence: p,
                    vol_of_vol: v,
                    mean_log_var: -9.0,
                    idiosyncratic: i,
                }
            }),
        ]
    }

    proptest! {
        #[test]
        fn any_config_round_trips(
            seed in any::<u64>(),
            gen in generator(),
            csv in any::<bool>(),
            rho in 0.5f64..0.999,
            dphi in 0.8f64..=1.0,
            n_core in 1usize..10,
            enabled in any::<bool>(),
            n_mc in 2usize..5000,
            lags in proptest::collection::vec(1usize..60, 1..6),
            threshold in 0.0f64..8.0,
            cutoff in proptest::option::of(0i64..20_000),
            qs in proptest::collection::vec(0.0f64..=1.0, 0..5),
        ) {
            let mut c = RunConfig::default();
            c.seed = seed;
            c.data = if csv {
                DataSource::Csv(PathBuf::from("prices/eu.csv"))
            } else {
                DataSource::Sim(SimSpec { n_series: 7, n_days: 321, seed: 0, generator: gen })
            };
            c.rv.rho = rho;
            c.engine.discount.delta_phi = dphi;
            c.engine.parents.n_core = n_core;
            c.engine.parents.enabled = enabled;
            c.engine.n_mc = n_mc;
            c.signals.lags = lags;
            c.signals.threshold = threshold;
            c.signals.cutoff = cutoff.map(|d| NaiveDate::from_num_days_from_ce_opt(700_000 + d as i32).unwrap());
            c.metrics.thresholds = qs;
            prop_assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
        }
    }
}
