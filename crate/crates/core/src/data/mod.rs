//! Price ingestion and the per-series feature pipeline.

mod io;
mod ohlc;
mod rv;
mod standardize;

pub use io::{read_long_dump, read_price_csv, write_feature_dump, write_long_dump, write_price_csv, FeatureRecord};
pub use ohlc::{ohlc_features, OhlcFeatures};
pub use rv::{
    leverage, log_returns, log_rv_features, realized_variance, scale_decay, scale_weights,
    variogram, EndogenousRaw, RV_FLOOR,
};
pub use standardize::{ExpandingStats, Standardizer};
pub(crate) use rv::endogenous_from_log;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// One trading day's open/high/low/close.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

/// A single asset's price history on a trading-day grid. Missing days are
/// `None`, never zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub id: String,
    pub dates: Vec<NaiveDate>,
    pub close: Vec<Option<f64>>,
    pub bars: Option<Vec<Option<Bar>>>,
}

impl PriceSeries {
    pub fn new(
        id: impl Into<String>,
        dates: Vec<NaiveDate>,
        close: Vec<Option<f64>>,
        bars: Option<Vec<Option<Bar>>>,
    ) -> Result<Self> {
        let id = id.into();
        if dates.len() != close.len() {
            return Err(Error::Data(format!("{id}: {} dates but {} prices", dates.len(), close.len())));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("{id}: timestamps must be strictly increasing")));
        }
        if let Some((t, p)) = close
            .iter()
            .enumerate()
            .find_map(|(t, p)| p.filter(|v| !(*v > 0.0 && v.is_finite())).map(|v| (t, v)))
        {
            return Err(Error::Data(format!("{id}: non-positive price {p} at index {t}")));
        }
        if let Some(bars) = &bars {
            if bars.len() != close.len() {
                return Err(Error::Data(format!("{id}: OHLC length mismatch")));
            }
            for (t, b) in bars.iter().enumerate() {
                if let Some(b) = b {
                    let ok = [b.open, b.high, b.low, b.close].iter().all(|v| *v > 0.0 && v.is_finite());
                    if !ok {
                        return Err(Error::Data(format!("{id}: non-positive OHLC at index {t}")));
                    }
                    if b.high < b.open.max(b.close) || b.low > b.open.min(b.close) {
                        return Err(Error::Data(format!("{id}: inconsistent OHLC bar at index {t}")));
                    }
                }
            }
        }
        Ok(PriceSeries { id, dates, close, bars })
    }

    /// Convenience constructor over a close-only series with day-index dates.
    pub fn from_closes(id: impl Into<String>, closes: &[f64]) -> Result<Self> {
        let base = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
        let dates = trading_days(base, closes.len());
        Self::new(id, dates, closes.iter().map(|&p| Some(p)).collect(), None)
    }

    pub fn len(&self) -> usize {
        self.close.len()
    }

    pub fn is_empty(&self) -> bool {
        self.close.is_empty()
    }

    /// Log prices with missing days kept as `None`.
    pub fn log_prices(&self) -> Vec<Option<f64>> {
        self.close.iter().map(|p| p.map(f64::ln)).collect()
    }
}

/// A set of series sharing one date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub dates: Vec<NaiveDate>,
    pub series: Vec<PriceSeries>,
}

impl Panel {
    pub fn new(dates: Vec<NaiveDate>, series: Vec<PriceSeries>) -> Result<Self> {
        for s in &series {
            if s.dates != dates {
                return Err(Error::Data(format!("{}: date grid differs from panel", s.id)));
            }
        }
        Ok(Panel { dates, series })
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_series(&self) -> usize {
        self.series.len()
    }

    /// The first `days` trading days of every series.
    pub fn truncated(&self, days: usize) -> Panel {
        let days = days.min(self.dates.len());
        let series = self
            .series
            .iter()
            .map(|s| PriceSeries {
                id: s.id.clone(),
                dates: s.dates[..days].to_vec(),
                close: s.close[..days].to_vec(),
                bars: s.bars.as_ref().map(|b| b[..days].to_vec()),
            })
            .collect();
        Panel {
            dates: self.dates[..days].to_vec(),
            series,
        }
    }
}

/// `n` consecutive weekdays starting at `start` (rolled forward off weekends).
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::{Datelike, Weekday};
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().expect("date in range");
    }
    out
}

/// Return-frequency lags and exponential kernel for realized variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RvConfig {
    pub rho: f64,
    /// Window length in prices.
    pub window: usize,
    pub scales: Vec<usize>,
}

impl Default for RvConfig {
    fn default() -> Self {
        RvConfig {
            rho: 0.98,
            window: 40,
            scales: vec![1, 5, 20],
        }
    }
}

impl RvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::config("rv.rho", "must lie in (0, 1)"));
        }
        if self.scales.is_empty() || self.scales[0] == 0 {
            return Err(Error::config("rv.scales", "must be non-empty and positive"));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("rv.scales", "must be strictly increasing"));
        }
        if self.window <= *self.scales.last().unwrap() {
            return Err(Error::config("rv.window", "must exceed the largest scale"));
        }
        Ok(())
    }

    pub fn scale_name(s: usize) -> String {
        match s {
            1 => "d".into(),
            5 => "w".into(),
            20 => "m".into(),
            other => format!("s{other}"),
        }
    }
}
