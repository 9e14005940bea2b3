//! Daily engine inputs: standardized endogenous regressors built from data
//! through the previous day, and standardized same-day targets.

use chrono::NaiveDate;
use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::{EndogenousRaw, FeatureRecord, Panel, RvConfig, Standardizer};
use crate::engine::{cascade_features, DayInput};
use crate::error::{Error, Result};

/// Coefficient category used for grouping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CoefTag {
    Offset,
    Rv,
    Leverage,
    Ohlc,
    Parent,
}

impl CoefTag {
    /// Category of a coefficient name as emitted in coefficient dumps.
    pub fn of(name: &str) -> Result<Self> {
        if name == "offset" {
            Ok(CoefTag::Offset)
        } else if name.starts_with("rv_") {
            Ok(CoefTag::Rv)
        } else if name.starts_with("lev_") {
            Ok(CoefTag::Leverage)
        } else if name.starts_with("ohlc_") {
            Ok(CoefTag::Ohlc)
        } else if name.starts_with("parent_") {
            Ok(CoefTag::Parent)
        } else {
            Err(Error::UnknownTag(name.to_string()))
        }
    }

    pub fn is_endogenous(self) -> bool {
        self != CoefTag::Parent
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Weekly and monthly scales; without them only the daily RV is used.
    pub har: bool,
    pub leverage: bool,
    pub ohlc: bool,
    /// Days of target history before a series becomes active.
    pub warmup: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            har: true,
            leverage: true,
            ohlc: false,
            warmup: 250,
        }
    }
}

/// Names of the endogenous block, offset first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureLayout {
    pub names: Vec<String>,
}

impl FeatureLayout {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn tags(&self) -> Result<Vec<CoefTag>> {
        self.names.iter().map(|n| CoefTag::of(n)).collect()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Price-pipeline layout for the scales actually used.
    pub fn price(scales: &[usize], cfg: &FeatureConfig) -> Self {
        let mut names = vec!["offset".to_string()];
        for &s in scales {
            names.push(format!("rv_{}", RvConfig::scale_name(s)));
        }
        if cfg.leverage {
            for &s in scales {
                let n = RvConfig::scale_name(s);
                names.push(format!("lev_{n}_pos"));
                names.push(format!("lev_{n}_neg"));
            }
        }
        if cfg.ohlc {
            for n in ["ohlc_rlow", "ohlc_ch", "ohlc_cohl"] {
                names.push(n.to_string());
            }
        }
        FeatureLayout { names }
    }

    /// Cascade layout `(offset, rv_<w> …)` for averaging windows.
    pub fn cascade(windows: &[usize]) -> Self {
        let mut names = vec!["offset".to_string()];
        names.extend(windows.iter().map(|&w| format!("rv_{}", RvConfig::scale_name(w))));
        FeatureLayout { names }
    }
}

/// Inputs for every day plus what is needed to map results back to log-RV.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedPanel {
    pub dates: Vec<NaiveDate>,
    pub ids: Vec<String>,
    pub layout: FeatureLayout,
    pub days: Vec<DayInput>,
    /// `(mean, scale)` of the log-RV standardization used on each day.
    pub scaling: Vec<Vec<(f64, f64)>>,
    /// Unstandardized daily log-RV target, when available.
    pub raw_target: Vec<Vec<Option<f64>>>,
}

impl PreparedPanel {
    pub fn n_days(&self) -> usize {
        self.days.len()
    }

    pub fn n_series(&self) -> usize {
        self.ids.len()
    }

    pub fn truncated(&self, days: usize) -> Self {
        let d = days.min(self.days.len());
        PreparedPanel {
            dates: self.dates[..d].to_vec(),
            ids: self.ids.clone(),
            layout: self.layout.clone(),
            days: self.days[..d].to_vec(),
            scaling: self.scaling[..d].to_vec(),
            raw_target: self.raw_target[..d].to_vec(),
        }
    }

    pub fn destandardize(&self, day: usize, j: usize, z: f64) -> f64 {
        let (mu, sd) = self.scaling[day][j];
        mu + sd * z
    }

    /// Standardized endogenous regressors as dump records.
    pub fn feature_records(&self) -> impl Iterator<Item = FeatureRecord> + '_ {
        self.days.iter().enumerate().flat_map(move |(t, d)| {
            d.features.iter().enumerate().flat_map(move |(j, f)| {
                f.iter().enumerate().map(move |(k, &v)| FeatureRecord {
                    date: self.dates[t],
                    id: self.ids[j].clone(),
                    name: self.layout.names[k].clone(),
                    value: v,
                })
            })
        })
    }
}

struct SeriesColumns {
    features: Vec<DVector<f64>>,
    targets: Vec<Option<f64>>,
    scaling: Vec<(f64, f64)>,
    raw: Vec<Option<f64>>,
}

fn other_values(raw: &EndogenousRaw, cfg: &FeatureConfig, n_scales: usize) -> Vec<f64> {
    let mut v = Vec::new();
    if cfg.leverage {
        for i in 0..n_scales {
            v.push(raw.lev_pos[i]);
            v.push(raw.lev_neg[i]);
        }
    }
    if cfg.ohlc {
        let o = raw.ohlc.expect("requested");
        v.extend([o.r_low, o.ch, o.cohl]);
    }
    v
}

/// Standardized inputs from a price panel.
pub fn prepare_price_panel(panel: &Panel, rv: &RvConfig, cfg: &FeatureConfig) -> Result<PreparedPanel> {
    rv.validate()?;
    if cfg.ohlc && panel.series.iter().any(|s| s.bars.is_none()) {
        return Err(Error::config("features.ohlc", "enabled but the data has no complete OHLC bars"));
    }
    let scales: Vec<usize> = if cfg.har { rv.scales.clone() } else { vec![rv.scales[0]] };
    let rv_used = RvConfig { scales: scales.clone(), ..rv.clone() };
    let layout = FeatureLayout::price(&scales, cfg);
    let n_scales = scales.len();
    let n_other = layout.len() - 1 - n_scales;
    let n_days = panel.n_days();
    let columns: Vec<SeriesColumns> = panel
        .series
        .par_iter()
        .map(|series| {
            let logp = series.log_prices();
            let raws: Vec<EndogenousRaw> = (0..n_days)
                .map(|t| crate::data::endogenous_from_log(&logp, series, &rv_used, t, cfg.ohlc))
                .collect();
            let mut st = Standardizer::new(cfg.warmup, n_other);
            let mut col = SeriesColumns {
                features: Vec::with_capacity(n_days),
                targets: Vec::with_capacity(n_days),
                scaling: Vec::with_capacity(n_days),
                raw: Vec::with_capacity(n_days),
            };
            for t in 0..n_days {
                let today = &raws[t];
                let prev = (t > 0).then(|| &raws[t - 1]);
                col.raw.push((!today.missing).then(|| today.log_rv[0]));
                col.scaling.push((st.log_rv.mean, st.log_rv.scale()));
                let mut x = DVector::zeros(layout.len());
                x[0] = 1.0;
                let active = st.ready();
                if let Some(p) = prev.filter(|p| active && !p.missing) {
                    for i in 0..n_scales {
                        x[1 + i] = st.z_log_rv(p.log_rv[i]);
                    }
                    for (k, v) in other_values(p, cfg, n_scales).into_iter().enumerate() {
                        x[1 + n_scales + k] = st.z_other(k, v);
                    }
                }
                col.features.push(x);
                col.targets.push((active && !today.missing).then(|| st.z_log_rv(today.log_rv[0])));
                if !today.missing {
                    st.observe(today.log_rv[0], &other_values(today, cfg, n_scales));
                }
            }
            col
        })
        .collect();
    Ok(assemble(panel.dates.clone(), panel.series.iter().map(|s| s.id.clone()).collect(), layout, columns))
}

/// Standardized inputs for a latent log-variance panel under the HAR
/// cascade: features are trailing means of the target over `windows`.
pub fn prepare_cascade_panel(
    dates: Vec<NaiveDate>,
    ids: Vec<String>,
    values: &[Vec<f64>],
    windows: &[usize],
    warmup: usize,
) -> Result<PreparedPanel> {
    if values.len() != ids.len() || values.iter().any(|v| v.len() != dates.len()) {
        return Err(Error::Data("cascade panel shape mismatch".into()));
    }
    let need = windows.iter().copied().max().unwrap_or(1);
    let layout = FeatureLayout::cascade(windows);
    let columns = values
        .par_iter()
        .map(|v| {
            let mut st = Standardizer::new(warmup, 0);
            let n = v.len();
            let mut col = SeriesColumns {
                features: Vec::with_capacity(n),
                targets: Vec::with_capacity(n),
                scaling: Vec::with_capacity(n),
                raw: Vec::with_capacity(n),
            };
            for t in 0..n {
                col.raw.push(Some(v[t]));
                col.scaling.push((st.log_rv.mean, st.log_rv.scale()));
                let active = st.ready() && t >= need;
                let x = if active {
                    let z: Vec<f64> = v[t - need..t].iter().map(|&x| st.z_log_rv(x)).collect();
                    cascade_features(&z, windows)
                } else {
                    let mut x = DVector::zeros(layout.len());
                    x[0] = 1.0;
                    x
                };
                col.features.push(x);
                col.targets.push(active.then(|| st.z_log_rv(v[t])));
                st.observe(v[t], &[]);
            }
            col
        })
        .collect();
    Ok(assemble(dates, ids, layout, columns))
}

fn assemble(dates: Vec<NaiveDate>, ids: Vec<String>, layout: FeatureLayout, columns: Vec<SeriesColumns>) -> PreparedPanel {
    let n_days = dates.len();
    let mut days = Vec::with_capacity(n_days);
    let mut scaling = Vec::with_capacity(n_days);
    let mut raw_target = Vec::with_capacity(n_days);
    for t in 0..n_days {
        days.push(DayInput {
            features: columns.iter().map(|c| c.features[t].clone()).collect(),
            targets: columns.iter().map(|c| c.targets[t]).collect(),
        });
        scaling.push(columns.iter().map(|c| c.scaling[t]).collect());
        raw_target.push(columns.iter().map(|c| c.raw[t]).collect());
    }
    PreparedPanel {
        dates,
        ids,
        layout,
        days,
        scaling,
        raw_target,
    }
}
