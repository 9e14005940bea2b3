//! Coefficient groups, change-point signals, thresholded combination and
//! equal-weighted backtests on log-RV moves.
//!
//! Time convention: a signal or position at day `t` uses data through `t`
//! and is scored on the move from `t` to `t + 1`.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;

use crate::data::FeatureRecord;
use crate::error::{Error, Result};
use crate::features::CoefTag;
use crate::stats::{iqr, median};

/// Per-day absolute coefficient sums by group, `[series][day]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientGroups {
    pub dates: Vec<NaiveDate>,
    pub ids: Vec<String>,
    pub rv: Vec<Vec<f64>>,
    pub lev: Vec<Vec<f64>>,
    pub core: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    Rv,
    Lev,
    Core,
    /// `core − rv`.
    Spread,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::Rv, Group::Lev, Group::Core, Group::Spread];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Rv => "rv",
            Group::Lev => "lev",
            Group::Core => "core",
            Group::Spread => "spread",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.as_str() == s)
            .ok_or_else(|| Error::config("signals.groups", format!("unknown group `{s}`")))
    }
}

impl CoefficientGroups {
    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    /// Group values of series `j`.
    pub fn series(&self, group: Group, j: usize) -> Vec<f64> {
        match group {
            Group::Rv => self.rv[j].clone(),
            Group::Lev => self.lev[j].clone(),
            Group::Core => self.core[j].clone(),
            Group::Spread => self.core[j].iter().zip(&self.rv[j]).map(|(c, r)| c - r).collect(),
        }
    }

    /// Sum over series.
    pub fn market(&self, group: Group) -> Vec<f64> {
        let mut out = vec![0.0; self.n_days()];
        for j in 0..self.ids.len() {
            for (o, v) in out.iter_mut().zip(self.series(group, j)) {
                *o += v;
            }
        }
        out
    }
}

/// Groups a coefficient dump. Series keep their order of first appearance;
/// absent (series, day) pairs contribute 0.
pub fn group_coefficients(records: &[FeatureRecord]) -> Result<CoefficientGroups> {
    let mut day_index: BTreeMap<NaiveDate, usize> = BTreeMap::new();
    let mut ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<&str, usize> = HashMap::new();
    let mut tags: HashMap<&str, CoefTag> = HashMap::new();
    for r in records {
        day_index.insert(r.date, 0);
        if !id_index.contains_key(r.id.as_str()) {
            id_index.insert(&r.id, ids.len());
            ids.push(r.id.clone());
        }
        if !tags.contains_key(r.name.as_str()) {
            tags.insert(&r.name, CoefTag::of(&r.name)?);
        }
        if !r.value.is_finite() {
            return Err(Error::Data(format!("{} {} {}: non-finite coefficient", r.date, r.id, r.name)));
        }
    }
    for (i, v) in day_index.values_mut().enumerate() {
        *v = i;
    }
    let (m, n) = (ids.len(), day_index.len());
    let mut groups = CoefficientGroups {
        dates: day_index.keys().copied().collect(),
        ids,
        rv: vec![vec![0.0; n]; m],
        lev: vec![vec![0.0; n]; m],
        core: vec![vec![0.0; n]; m],
    };
    for r in records {
        let (j, t) = (id_index[r.id.as_str()], day_index[&r.date]);
        let slot = match tags[r.name.as_str()] {
            CoefTag::Rv => &mut groups.rv,
            CoefTag::Leverage => &mut groups.lev,
            CoefTag::Parent => &mut groups.core,
            CoefTag::Offset | CoefTag::Ohlc => continue,
        };
        slot[j][t] += r.value.abs();
    }
    Ok(groups)
}

/// Equal-weighted average of the available series each day, `rows[day][series]`.
pub fn market_log_rv(rows: &[Vec<Option<f64>>]) -> Vec<Option<f64>> {
    rows.iter()
        .map(|row| {
            let v: Vec<f64> = row.iter().flatten().copied().collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePointConfig {
    /// Trailing window of lag differences defining the dead-band.
    pub window: usize,
    /// Dead-band as a fraction of the trailing interquartile range.
    pub fraction: f64,
}

impl Default for ChangePointConfig {
    fn default() -> Self {
        ChangePointConfig {
            window: 250,
            fraction: 0.01,
        }
    }
}

/// Daily values in {−1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signal {
    pub lag: usize,
    pub values: Vec<i8>,
}

/// Sign of `x_t − x_{t−l}` sampled at `t = l, 2l, …` and held in between.
/// Moves whose size is below `fraction` of the IQR of the lag-`l` differences
/// over the trailing `window` days map to 0. Days before the first sample
/// are 0.
pub fn change_point(x: &[f64], lag: usize, cfg: &ChangePointConfig) -> Result<Signal> {
    if lag == 0 {
        return Err(Error::config("signals.lags", "lag must be positive"));
    }
    let diffs: Vec<f64> = (0..x.len()).map(|t| if t >= lag { x[t] - x[t - lag] } else { 0.0 }).collect();
    let mut values = vec![0i8; x.len()];
    let mut held = 0i8;
    for t in 0..x.len() {
        if t >= lag && t % lag == 0 {
            let from = (t + 1).saturating_sub(cfg.window).max(lag);
            let band = cfg.fraction * iqr(&diffs[from..=t]);
            let d = diffs[t];
            held = if d.abs() < band || d == 0.0 || !d.is_finite() { 0 } else { d.signum() as i8 };
        }
        values[t] = held;
    }
    Ok(Signal { lag, values })
}

/// [`change_point`] on `core − rv`.
pub fn spread_signal(core: &[f64], rv: &[f64], lag: usize, cfg: &ChangePointConfig) -> Result<Signal> {
    if core.len() != rv.len() {
        return Err(Error::Data("group series differ in length".into()));
    }
    let spread: Vec<f64> = core.iter().zip(rv).map(|(c, r)| c - r).collect();
    change_point(&spread, lag, cfg)
}

/// `sign(S_t)` where `|S_t| > θ`, else 0, with `S_t` the sum of the streams.
pub fn combine_signals(streams: &[&[i8]], threshold: f64) -> Result<Vec<i8>> {
    let Some(first) = streams.first() else {
        return Ok(Vec::new());
    };
    if streams.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Data("signal streams are not aligned".into()));
    }
    Ok((0..first.len())
        .map(|t| {
            let s: i32 = streams.iter().map(|v| v[t] as i32).sum();
            if (s.abs() as f64) > threshold {
                s.signum() as i8
            } else {
                0
            }
        })
        .collect())
}

/// A position held over the move from `day` to `day + 1`, decided with data
/// through `decided`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub day: usize,
    pub decided: usize,
    pub value: i8,
}

/// Positions of one series from a daily stream, decided on the day they are
/// held.
pub fn positions_from(values: &[i8]) -> Vec<Position> {
    values
        .iter()
        .enumerate()
        .map(|(t, &value)| Position { day: t, decided: t, value })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trade {
    pub series: usize,
    pub start: usize,
    /// Last day the position was held.
    pub end: usize,
    pub direction: i8,
    pub pnl: f64,
}

impl Trade {
    pub fn length(&self) -> usize {
        self.end - self.start + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    /// Portfolio return credited to day `t + 1`; entry 0 is 0.
    pub daily: Vec<f64>,
    /// `1 + cumulative sum of daily`.
    pub value: Vec<f64>,
    /// Share of non-zero positions on non-zero moves with the right sign.
    pub hit_rate: Option<f64>,
    pub max_drawdown: f64,
    pub median_trade_length: Option<f64>,
    pub trades: Vec<Trade>,
}

/// Equal-weighted portfolio over series: each day's return is the mean of
/// `position · (target_{t+1} − target_t)` over series with both targets.
/// `targets[j][t]`; positions must be decided no later than the day they
/// are held.
pub fn ew_backtest(positions: &[Vec<Position>], targets: &[Vec<Option<f64>>]) -> Result<BacktestReport> {
    if positions.len() != targets.len() {
        return Err(Error::Data(format!(
            "{} position streams for {} target series",
            positions.len(),
            targets.len()
        )));
    }
    let n_days = targets.iter().map(Vec::len).max().unwrap_or(0);
    if let Some(t) = targets.iter().find(|t| t.len() != n_days) {
        return Err(Error::Data(format!("target series of length {} and {n_days}", t.len())));
    }
    let mut sum = vec![0.0; n_days];
    let mut count = vec![0usize; n_days];
    let (mut hits, mut scored) = (0usize, 0usize);
    let mut trades = Vec::new();
    for (j, (ps, y)) in positions.iter().zip(targets).enumerate() {
        let mut open: Option<Trade> = None;
        for p in ps {
            if p.decided > p.day {
                return Err(Error::Lookahead(format!(
                    "series {j}: position for day {} decided with data through day {}",
                    p.day, p.decided
                )));
            }
            if p.day + 1 >= n_days {
                continue;
            }
            let mv = match (y[p.day], y[p.day + 1]) {
                (Some(a), Some(b)) => Some(b - a),
                _ => None,
            };
            if let Some(mv) = mv {
                let r = p.value as f64 * mv;
                sum[p.day + 1] += r;
                count[p.day + 1] += 1;
                if p.value != 0 && mv != 0.0 {
                    scored += 1;
                    if (p.value as f64).signum() == mv.signum() {
                        hits += 1;
                    }
                }
            }
            let pnl = mv.map_or(0.0, |m| p.value as f64 * m);
            match open.as_mut() {
                Some(tr) if tr.direction == p.value && tr.end + 1 == p.day => {
                    tr.end = p.day;
                    tr.pnl += pnl;
                }
                _ => {
                    trades.extend(open.take());
                    if p.value != 0 {
                        open = Some(Trade {
                            series: j,
                            start: p.day,
                            end: p.day,
                            direction: p.value,
                            pnl,
                        });
                    }
                }
            }
        }
        trades.extend(open);
    }
    let daily: Vec<f64> = sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let mut value = Vec::with_capacity(n_days);
    let (mut v, mut peak, mut max_dd) = (1.0, 1.0f64, 0.0f64);
    for r in &daily {
        v += r;
        peak = peak.max(v);
        max_dd = max_dd.max(peak - v);
        value.push(v);
    }
    let lengths: Vec<f64> = trades.iter().map(|t| t.length() as f64).collect();
    Ok(BacktestReport {
        daily,
        value,
        hit_rate: (scored > 0).then(|| hits as f64 / scored as f64),
        max_drawdown: max_dd,
        median_trade_length: (!lengths.is_empty()).then(|| median(&lengths)),
        trades,
    })
}

/// Lag with the best equal-weighted hit rate on days before `cutoff`, with
/// ties going to the longer lag. `fallback` when no lag scores.
pub fn select_lag(
    groups: &[Vec<f64>],
    targets: &[Vec<Option<f64>>],
    lags: &[usize],
    cutoff: usize,
    fallback: usize,
    cfg: &ChangePointConfig,
) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &lag in lags {
        let mut pos = Vec::with_capacity(groups.len());
        let mut tgt = Vec::with_capacity(groups.len());
        for (g, y) in groups.iter().zip(targets) {
            let end = cutoff.min(g.len()).min(y.len());
            let s = change_point(&g[..end], lag, cfg)?;
            pos.push(positions_from(&s.values));
            tgt.push(y[..end].to_vec());
        }
        let n = tgt.iter().map(Vec::len).min().unwrap_or(0);
        for t in tgt.iter_mut() {
            t.truncate(n);
        }
        for p in pos.iter_mut() {
            p.truncate(n);
        }
        if let Some(h) = ew_backtest(&pos, &tgt)?.hit_rate {
            if best.is_none_or(|(b, _)| h >= b) {
                best = Some((h, lag));
            }
        }
    }
    Ok(best.map_or(fallback, |(_, l)| l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::Datelike;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rec(day: u32, id: &str, name: &str, value: f64) -> FeatureRecord {
        FeatureRecord {
            date: NaiveDate::from_ymd_opt(2020, 1, day).unwrap(),
            id: id.into(),
            name: name.into(),
            value,
        }
    }

    #[test]
    fn groups_are_absolute_sums() {
        let r = vec![
            rec(1, "A", "offset", 3.0),
            rec(1, "A", "rv_d", 0.5),
            rec(1, "A", "rv_w", -0.3),
            rec(1, "A", "lev_d_neg", -0.2),
            rec(1, "A", "parent_S001", -0.1),
            rec(2, "B", "rv_d", 0.0),
        ];
        let g = group_coefficients(&r).unwrap();
        assert_eq!(g.ids, vec!["A", "B"]);
        assert!((g.rv[0][0] - 0.8).abs() < 1e-15);
        assert_eq!(g.lev[0][0], 0.2);
        assert_eq!(g.core[0][0], 0.1);
        assert_eq!(g.rv[1], vec![0.0, 0.0]);
        assert_eq!(g.market(Group::Rv), vec![g.rv[0][0], 0.0]);
        assert!(matches!(
            group_coefficients(&[rec(1, "A", "beta", 1.0)]),
            Err(Error::UnknownTag(_))
        ));
    }

    #[test]
    fn groups_match_recomputation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let names = ["offset", "rv_d", "rv_w", "rv_m", "lev_d_pos", "lev_w_neg", "parent_S002", "ohlc_ch"];
        let mut r = Vec::new();
        for day in 1..=20u32 {
            for id in ["A", "B", "C"] {
                for n in names {
                    r.push(rec(day, id, n, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let g = group_coefficients(&r).unwrap();
        for (j, id) in ["A", "B", "C"].iter().enumerate() {
            for day in 1..=20u32 {
                let pick = |pre: &str| -> f64 {
                    r.iter()
                        .filter(|x| x.id == *id && x.date.day0() + 1 == day && x.name.starts_with(pre))
                        .map(|x| x.value.abs())
                        .sum()
                };
                let t = day as usize - 1;
                assert!((g.rv[j][t] - pick("rv_")).abs() < 1e-12);
                assert!((g.lev[j][t] - pick("lev_")).abs() < 1e-12);
                assert!((g.core[j][t] - pick("parent_")).abs() < 1e-12);
            }
        }
        let m = g.market(Group::Core);
        for t in 0..20 {
            assert!((m[t] - (0..3).map(|j| g.core[j][t]).sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn market_log_rv_skips_missing() {
        let rows = vec![vec![Some(1.0), Some(3.0)], vec![None, Some(-1.0)], vec![None, None]];
        assert_eq!(market_log_rv(&rows), vec![Some(2.0), Some(-1.0), None]);
    }

    #[test]
    fn monotone_and_constant_series() {
        let up: Vec<f64> = (0..100).map(|t| t as f64 * 0.1).collect();
        let flat = vec![2.0; 100];
        for lag in [1, 2, 5, 10, 20] {
            let s = change_point(&up, lag, &ChangePointConfig::default()).unwrap();
            assert!(s.values[lag..].iter().all(|&v| v == 1));
            assert!(s.values[..lag].iter().all(|&v| v == 0));
            let c = change_point(&flat, lag, &ChangePointConfig::default()).unwrap();
            assert!(c.values.iter().all(|&v| v == 0));
        }
    }

    /// Direct loop: recompute the dead-band from scratch at each sample.
    fn loop_oracle(x: &[f64], lag: usize, window: usize, frac: f64) -> Vec<i8> {
        let mut out = Vec::new();
        let mut cur = 0i8;
        for t in 0..x.len() {
            if t >= lag && t % lag == 0 {
                let mut d = Vec::new();
                for s in t.saturating_sub(window - 1)..=t {
                    if s >= lag {
                        d.push(x[s] - x[s - lag]);
                    }
                }
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let q = |p: f64| {
                    let h = p * (d.len() - 1) as f64;
                    let lo = h.floor() as usize;
                    let hi = (lo + 1).min(d.len() - 1);
                    d[lo] + (h - lo as f64) * (d[hi] - d[lo])
                };
                let band = frac * (q(0.75) - q(0.25));
                let diff = x[t] - x[t - lag];
                cur = if diff.abs() < band || diff == 0.0 {
                    0
                } else if diff > 0.0 {
                    1
                } else {
                    -1
                };
            }
            out.push(cur);
        }
        out
    }

    #[test]
    fn random_walk_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = vec![0.0];
        for _ in 0..999 {
            let step: f64 = rng.random_range(-1.0..1.0);
            x.push(x.last().unwrap() + step);
        }
        for lag in [1, 2, 5, 10, 20] {
            for frac in [0.01, 0.5] {
                let cfg = ChangePointConfig { window: 250, fraction: frac };
                assert_eq!(change_point(&x, lag, &cfg).unwrap().values, loop_oracle(&x, lag, 250, frac));
            }
        }
    }

    #[test]
    fn spread_is_change_point_of_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let core: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..2.0)).collect();
        let rv: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..2.0)).collect();
        let cfg = ChangePointConfig::default();
        let diff: Vec<f64> = core.iter().zip(&rv).map(|(c, r)| c - r).collect();
        assert_eq!(spread_signal(&core, &rv, 5, &cfg).unwrap(), change_point(&diff, 5, &cfg).unwrap());
        assert!(spread_signal(&core, &core, 5, &cfg).unwrap().values.iter().all(|&v| v == 0));
        let rising: Vec<f64> = (0..50).map(|t| t as f64).collect();
        let s = spread_signal(&rising, &[1.0; 50], 2, &cfg).unwrap();
        assert!(s.values[2..].iter().all(|&v| v == 1));
    }

    #[test]
    fn combine_boundaries() {
        let ones = vec![1i8; 3];
        let streams: Vec<&[i8]> = vec![&ones; 5];
        assert_eq!(combine_signals(&streams, 2.0).unwrap(), vec![1; 3]);
        let a = [1i8, 1, 0];
        let b = [1i8, 1, 0];
        assert_eq!(combine_signals(&[&a, &b], 2.0).unwrap(), vec![0, 0, 0]);
        assert_eq!(combine_signals(&[&a, &b], 0.0).unwrap(), vec![1, 1, 0]);
        assert!(combine_signals(&[&a, &[1i8][..]], 0.0).is_err());
    }

    #[test]
    fn combine_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let streams: Vec<Vec<i8>> = (0..7).map(|_| (0..200).map(|_| rng.random_range(-1..=1)).collect()).collect();
        let refs: Vec<&[i8]> = streams.iter().map(Vec::as_slice).collect();
        for theta in [0.0, 1.0, 2.0, 4.0] {
            let got = combine_signals(&refs, theta).unwrap();
            for t in 0..200 {
                let mut s = 0;
                for st in &streams {
                    s += st[t] as i32;
                }
                let want = if s > 0 && s as f64 > theta {
                    1
                } else if s < 0 && (-s) as f64 > theta {
                    -1
                } else {
                    0
                };
                assert_eq!(got[t], want);
            }
        }
    }

    proptest! {
        #[test]
        fn flipping_up_never_lowers(
            base in proptest::collection::vec(proptest::collection::vec(-1i8..=1, 30), 1..6),
            which in 0usize..6, day in 0usize..30, theta in 0u8..5,
        ) {
            let k = which % base.len();
            let mut up = base.clone();
            if up[k][day] == -1 {
                up[k][day] = 1;
            }
            let r1: Vec<&[i8]> = base.iter().map(Vec::as_slice).collect();
            let r2: Vec<&[i8]> = up.iter().map(Vec::as_slice).collect();
            let a = combine_signals(&r1, theta as f64).unwrap();
            let b = combine_signals(&r2, theta as f64).unwrap();
            prop_assert!(b[day] >= a[day]);
        }

        #[test]
        fn signals_ignore_positive_rescaling(
            x in proptest::collection::vec(-10.0f64..10.0, 10..200),
            k in -10i32..10, lag in 1usize..21,
        ) {
            // powers of two rescale without rounding
            let y: Vec<f64> = x.iter().map(|v| v * 2f64.powi(k)).collect();
            let cfg = ChangePointConfig::default();
            prop_assert_eq!(change_point(&x, lag, &cfg).unwrap(), change_point(&y, lag, &cfg).unwrap());
        }
    }

    fn random_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<Option<f64>> {
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                let s: f64 = rng.random_range(-1.0..1.0);
                x += s;
                Some(x)
            })
            .collect()
    }

    #[test]
    fn flat_and_oracle_backtests() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y: Vec<Vec<Option<f64>>> = (0..3).map(|_| random_walk(&mut rng, 200)).collect();
        let zero: Vec<Vec<Position>> = (0..3).map(|_| positions_from(&[0; 200])).collect();
        let flat = ew_backtest(&zero, &y).unwrap();
        assert!(flat.value.iter().all(|&v| v == 1.0));
        assert_eq!(flat.hit_rate, None);
        assert_eq!(flat.max_drawdown, 0.0);
        let oracle: Vec<Vec<Position>> = y
            .iter()
            .map(|s| {
                let v: Vec<i8> = (0..200)
                    .map(|t| if t + 1 < 200 { (s[t + 1].unwrap() - s[t].unwrap()).signum() as i8 } else { 0 })
                    .collect();
                positions_from(&v)
            })
            .collect();
        let r = ew_backtest(&oracle, &y).unwrap();
        assert_eq!(r.hit_rate, Some(1.0));
        assert_eq!(r.max_drawdown, 0.0);
        assert!(r.daily.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn lookahead_is_rejected() {
        let y = vec![vec![Some(0.0), Some(1.0), Some(2.0)]];
        let p = vec![vec![Position { day: 0, decided: 1, value: 1 }]];
        assert!(matches!(ew_backtest(&p, &y), Err(Error::Lookahead(_))));
    }

    #[test]
    fn trades_and_drawdown() {
        let y = vec![vec![Some(0.0), Some(1.0), Some(0.0), Some(-1.0), Some(0.0), Some(0.0)]];
        let p = vec![positions_from(&[1, 1, 1, 0, -1, 0])];
        let r = ew_backtest(&p, &y).unwrap();
        assert_eq!(r.daily, vec![0.0, 1.0, -1.0, -1.0, 0.0, -0.0]);
        assert_eq!(r.value, vec![1.0, 2.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(r.max_drawdown, 2.0);
        assert_eq!(r.trades.len(), 2);
        assert_eq!((r.trades[0].length(), r.trades[0].pnl), (3, -1.0));
        assert_eq!(r.median_trade_length, Some(2.0));
        assert_eq!(r.hit_rate, Some(1.0 / 3.0));
    }

    #[test]
    fn random_positions_earn_nothing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 10_000;
        let y = vec![random_walk(&mut rng, n)];
        let v: Vec<i8> = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
        let r = ew_backtest(&[positions_from(&v)], &y).unwrap();
        let d = &r.daily[1..];
        let m = crate::stats::mean(d);
        let sd = crate::stats::std_dev(d);
        assert!(m.abs() < 3.0 * sd / (d.len() as f64).sqrt(), "{m} {sd}");
    }

    #[test]
    fn lag_selection_prefers_informative_lag() {
        // target follows the group with a 20-day cycle
        let n = 600;
        let g: Vec<f64> = (0..n).map(|t| ((t / 20) % 2) as f64 * 1.0 + t as f64 * 1e-4).collect();
        let y: Vec<Option<f64>> = (0..n).map(|t| Some(g[t] + 0.001 * (t % 3) as f64)).collect();
        let cfg = ChangePointConfig::default();
        let lag = select_lag(&[g.clone()], &[y.clone()], &[1, 2, 5, 10, 20], 500, 20, &cfg).unwrap();
        assert!([1, 2, 5, 10, 20].contains(&lag));
        assert_eq!(select_lag(&[g], &[y], &[5], 0, 20, &cfg).unwrap(), 20);
    }
}
