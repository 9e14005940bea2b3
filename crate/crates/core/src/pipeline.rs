//! End-to-end commands: data → features → engine → CSV artifacts, and the
//! backtest, evaluation, variogram and simulation reports built on them.
//!
//! Every command writes into `cfg.out` and returns the paths it wrote.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use nalgebra::DVector;

use crate::config::{DataSource, RunConfig};
use crate::data::{read_long_dump, read_price_csv, variogram, write_long_dump, write_price_csv, FeatureRecord, Panel};
use crate::engine::{cascade_features, DayReport, Engine, EngineConfig};
use crate::error::{Error, Result};
use crate::features::{prepare_price_panel, PreparedPanel};
use crate::metrics::{
    calibrate_multiplier, ci_coverage, har_baseline, persistence_baseline, point_metrics, rescale_intervals, CoverageRow,
    EvalReport, ForecastStream, Interval, MoveFilter, PointMetrics,
};
use crate::signals::{
    change_point, combine_signals, ew_backtest, group_coefficients, market_log_rv, positions_from, select_lag,
    BacktestReport, CoefficientGroups, Group,
};
use crate::sim::{generate, GroundTruth};
use crate::stats::{mean, quantile};

/// Reads or simulates the configured price panel.
pub fn load_panel(cfg: &RunConfig) -> Result<(Panel, Option<GroundTruth>)> {
    match &cfg.data {
        DataSource::Csv(path) => {
            let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            Ok((read_price_csv(BufReader::new(f))?, None))
        }
        DataSource::Sim(_) => {
            let (panel, truth) = generate(&cfg.sim_spec().expect("simulated source"))?;
            Ok((panel, Some(truth)))
        }
    }
}

pub fn prepare(cfg: &RunConfig, panel: &Panel) -> Result<PreparedPanel> {
    prepare_price_panel(panel, &cfg.rv, &cfg.features)
}

/// The comparator engine: no parents, regressors `{offset, rv_d}`.
pub fn plain_config(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    c.features.har = false;
    c.features.leverage = false;
    c.features.ohlc = false;
    c.engine.parents.enabled = false;
    c
}

/// Engine reports for every day of a prepared panel.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub prep: PreparedPanel,
    pub reports: Vec<DayReport>,
}

pub fn run_engine(engine_cfg: &EngineConfig, prep: PreparedPanel) -> Result<RunOutput> {
    let mut engine = Engine::new(engine_cfg.clone(), prep.n_series(), prep.layout.len())?;
    let mut reports = Vec::with_capacity(prep.n_days());
    for (t, day) in prep.days.iter().enumerate() {
        reports.push(engine.step(day)?);
        if (t + 1) % 250 == 0 {
            log::info!("day {}/{}", t + 1, prep.n_days());
        }
    }
    Ok(RunOutput { prep, reports })
}

/// Loads, prepares and runs the configured model.
pub fn run_model(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let (panel, _) = load_panel(cfg)?;
    run_engine(&cfg.engine_config(), prepare(cfg, &panel)?)
}

/// One row of the forecast file, in log-RV units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRow {
    pub date: NaiveDate,
    pub id: String,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    pub entropy: f64,
    pub ess: f64,
}

impl RunOutput {
    /// Forecasts on days whose target is observed.
    pub fn forecast_rows(&self) -> Vec<ForecastRow> {
        let p = &self.prep;
        let mut rows = Vec::new();
        for (t, rep) in self.reports.iter().enumerate() {
            for (j, f) in rep.forecasts.iter().enumerate() {
                if p.days[t].targets[j].is_none() {
                    continue;
                }
                rows.push(ForecastRow {
                    date: p.dates[t],
                    id: p.ids[j].clone(),
                    mean: p.destandardize(t, j, f.mean),
                    lo: p.destandardize(t, j, f.lo),
                    hi: p.destandardize(t, j, f.hi),
                    entropy: rep.entropy,
                    ess: rep.ess,
                });
            }
        }
        rows
    }

    /// Per-series forecast streams aligned with the panel's days.
    pub fn streams(&self) -> Vec<ForecastStream> {
        streams_from_rows(&self.forecast_rows(), &self.prep.dates, &self.prep.ids)
    }

    /// Posterior coefficient means from each series' first observed day on.
    pub fn coefficient_records(&self) -> Vec<FeatureRecord> {
        let p = &self.prep;
        let mut started = vec![false; p.n_series()];
        let mut out = Vec::new();
        for (t, rep) in self.reports.iter().enumerate() {
            for (j, snap) in rep.snapshots.iter().enumerate() {
                started[j] |= p.days[t].targets[j].is_some();
                if !started[j] {
                    continue;
                }
                for (k, &v) in snap.m.iter().enumerate() {
                    let name = match k.checked_sub(p.layout.len()) {
                        None => p.layout.names[k].clone(),
                        Some(i) => format!("parent_{}", p.ids[snap.parents[i].0]),
                    };
                    out.push(FeatureRecord {
                        date: p.dates[t],
                        id: p.ids[j].clone(),
                        name,
                        value: v,
                    });
                }
            }
        }
        out
    }
}

fn streams_from_rows(rows: &[ForecastRow], dates: &[NaiveDate], ids: &[String]) -> Vec<ForecastStream> {
    let day: HashMap<NaiveDate, usize> = dates.iter().enumerate().map(|(t, d)| (*d, t)).collect();
    let series: HashMap<&str, usize> = ids.iter().enumerate().map(|(j, s)| (s.as_str(), j)).collect();
    let mut out = vec![
        ForecastStream {
            mean: vec![None; dates.len()],
            interval: vec![None; dates.len()],
        };
        ids.len()
    ];
    for r in rows {
        if let (Some(&t), Some(&j)) = (day.get(&r.date), series.get(r.id.as_str())) {
            out[j].mean[t] = Some(r.mean);
            out[j].interval[t] = Some(Interval { lo: r.lo, hi: r.hi });
        }
    }
    out
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, csv::Writer<BufWriter<File>>)> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    Ok((path, w))
}

fn date_str(d: NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

fn opt_str(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

pub fn write_forecasts(dir: &Path, rows: &[ForecastRow]) -> Result<PathBuf> {
    let (path, mut w) = create(dir, "forecasts.csv")?;
    w.write_record(["date", "id", "forecast_mean", "interval_lo", "interval_hi", "entropy", "ess"])?;
    for r in rows {
        w.write_record([
            date_str(r.date),
            r.id.clone(),
            r.mean.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.entropy.to_string(),
            r.ess.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

pub fn read_forecasts(path: &Path) -> Result<Vec<ForecastRow>> {
    let f = File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(f));
    let want = ["date", "id", "forecast_mean", "interval_lo", "interval_hi", "entropy", "ess"];
    if rdr.headers()?.iter().ne(want) {
        return Err(Error::Data(format!("{}: expected header {}", path.display(), want.join(","))));
    }
    let num = |s: &str, line: usize| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Data(format!("{} line {line}: bad number `{s}`", path.display())))
    };
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        rows.push(ForecastRow {
            date: NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d")
                .map_err(|_| Error::Data(format!("{} line {line}: bad date", path.display())))?,
            id: rec[1].to_string(),
            mean: num(&rec[2], line)?,
            lo: num(&rec[3], line)?,
            hi: num(&rec[4], line)?,
            entropy: num(&rec[5], line)?,
            ess: num(&rec[6], line)?,
        });
    }
    Ok(rows)
}

pub fn write_diagnostics(dir: &Path, out: &RunOutput) -> Result<PathBuf> {
    let (path, mut w) = create(dir, "diagnostics.csv")?;
    w.write_record([
        "date",
        "entropy",
        "ess",
        "tempering",
        "det_fallbacks",
        "forecast_rejections",
        "vb_fallbacks",
        "max_dof_residual",
        "min_eigenvalue",
        "parents",
        "retired",
    ])?;
    for (t, r) in out.reports.iter().enumerate() {
        let parents: usize = r.snapshots.iter().map(|s| s.parents.len()).sum();
        w.write_record([
            date_str(out.prep.dates[t]),
            r.entropy.to_string(),
            r.ess.to_string(),
            r.tempering.to_string(),
            r.det_fallbacks.to_string(),
            r.forecast_rejections.to_string(),
            r.vb_fallbacks.to_string(),
            r.max_dof_residual.to_string(),
            r.min_eigenvalue.to_string(),
            parents.to_string(),
            r.retired.len().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_parents(dir: &Path, out: &RunOutput) -> Result<PathBuf> {
    let (path, mut w) = create(dir, "parents.csv")?;
    w.write_record(["date", "child_id", "parent_id", "set", "score"])?;
    let ids = &out.prep.ids;
    for (t, r) in out.reports.iter().enumerate() {
        for (j, snap) in r.snapshots.iter().enumerate() {
            for (p, set, score) in &snap.parents {
                w.write_record([
                    date_str(out.prep.dates[t]),
                    ids[j].clone(),
                    ids[*p].clone(),
                    set.as_str().to_string(),
                    score.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(path)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, text)?;
    Ok(path)
}

fn write_coefficients(dir: &Path, records: Vec<FeatureRecord>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join("coefficients.csv");
    write_long_dump(BufWriter::new(File::create(&path)?), "coef_name", records)?;
    Ok(path)
}

/// Forecasts, coefficients, diagnostics and parent memberships.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = run_model(cfg)?;
    let dir = &cfg.out;
    Ok(vec![
        write_text(dir, "config.txt", &cfg.to_text())?,
        write_forecasts(dir, &out.forecast_rows())?,
        write_coefficients(dir, out.coefficient_records())?,
        write_diagnostics(dir, &out)?,
        write_parents(dir, &out)?,
    ])
}

/// Observed log-RV as `[series][day]`.
/// Raw targets per series, aligned with the panel days.
pub fn observations(prep: &PreparedPanel) -> Vec<Vec<Option<f64>>> {
    (0..prep.n_series())
        .map(|j| prep.raw_target.iter().map(|row| row[j]).collect())
        .collect()
}

/// Result of a backtest over a coefficient dump.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestOutcome {
    pub groups: CoefficientGroups,
    pub lags: Vec<(Group, usize)>,
    pub report: BacktestReport,
    /// Equal-weighted observed log-RV on the dump's days.
    pub market: Vec<Option<f64>>,
}

/// Change-point signals per group, combined per series and backtested on
/// the series' own log-RV.
pub fn backtest(cfg: &RunConfig, records: &[FeatureRecord], prep: &PreparedPanel) -> Result<BacktestOutcome> {
    let groups = group_coefficients(records)?;
    let day: HashMap<NaiveDate, usize> = prep.dates.iter().enumerate().map(|(t, d)| (*d, t)).collect();
    let series: HashMap<&str, usize> = prep.ids.iter().enumerate().map(|(j, s)| (s.as_str(), j)).collect();
    let days: Vec<usize> = groups
        .dates
        .iter()
        .map(|d| day.get(d).copied().ok_or_else(|| Error::Data(format!("dump date {d} is not in the data"))))
        .collect::<Result<_>>()?;
    let targets: Vec<Vec<Option<f64>>> = groups
        .ids
        .iter()
        .map(|id| {
            let j = *series
                .get(id.as_str())
                .ok_or_else(|| Error::Data(format!("dump series `{id}` is not in the data")))?;
            Ok(days.iter().map(|&t| prep.raw_target[t][j]).collect())
        })
        .collect::<Result<_>>()?;
    let sc = &cfg.signals;
    let cutoff = sc.cutoff.map(|c| groups.dates.partition_point(|d| *d < c));
    let lags: Vec<(Group, usize)> = sc
        .groups
        .iter()
        .map(|&g| {
            let lag = match cutoff {
                Some(c) => {
                    let values: Vec<Vec<f64>> = (0..groups.ids.len()).map(|j| groups.series(g, j)).collect();
                    select_lag(&values, &targets, &sc.lags, c, sc.default_lag, &sc.change_point)?
                }
                None => sc.default_lag,
            };
            Ok((g, lag))
        })
        .collect::<Result<_>>()?;
    let positions = (0..groups.ids.len())
        .map(|j| {
            let streams: Vec<Vec<i8>> = lags
                .iter()
                .map(|&(g, lag)| Ok(change_point(&groups.series(g, j), lag, &sc.change_point)?.values))
                .collect::<Result<_>>()?;
            let refs: Vec<&[i8]> = streams.iter().map(Vec::as_slice).collect();
            Ok(positions_from(&combine_signals(&refs, sc.threshold)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ew_backtest(&positions, &targets)?;
    let rows: Vec<Vec<Option<f64>>> = (0..days.len()).map(|k| targets.iter().map(|y| y[k]).collect()).collect();
    Ok(BacktestOutcome {
        market: market_log_rv(&rows),
        groups,
        lags,
        report,
    })
}

/// Backtest of a coefficient dump, or of a fresh run when none is given.
pub fn cmd_backtest(cfg: &RunConfig, coefficients: Option<&Path>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (panel, _) = load_panel(cfg)?;
    let prep = prepare(cfg, &panel)?;
    let records = match coefficients {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
            read_long_dump(BufReader::new(f))?
        }
        None => run_engine(&cfg.engine_config(), prep.clone())?.coefficient_records(),
    };
    let bt = backtest(cfg, &records, &prep)?;
    let dir = &cfg.out;
    let mut paths = vec![write_text(dir, "config.txt", &cfg.to_text())?];

    let (path, mut w) = create(dir, "backtest.csv")?;
    w.write_record(["date", "portfolio_value", "market_logrv"])?;
    for (k, d) in bt.groups.dates.iter().enumerate() {
        w.write_record([date_str(*d), bt.report.value[k].to_string(), opt_str(bt.market[k])])?;
    }
    w.flush()?;
    paths.push(path);

    let (path, mut w) = create(dir, "trades.csv")?;
    w.write_record(["id", "start", "end", "direction", "length", "pnl"])?;
    for tr in &bt.report.trades {
        w.write_record([
            bt.groups.ids[tr.series].clone(),
            date_str(bt.groups.dates[tr.start]),
            date_str(bt.groups.dates[tr.end]),
            tr.direction.to_string(),
            tr.length().to_string(),
            tr.pnl.to_string(),
        ])?;
    }
    w.flush()?;
    paths.push(path);

    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>5}", "group", "lag");
    for (g, l) in &bt.lags {
        let _ = writeln!(s, "{:<10} {:>5}", g.as_str(), l);
    }
    let r = &bt.report;
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<22} {}", "final value", r.value.last().copied().unwrap_or(1.0));
    let _ = writeln!(s, "{:<22} {}", "hit rate", opt_str(r.hit_rate));
    let _ = writeln!(s, "{:<22} {}", "max drawdown", r.max_drawdown);
    let _ = writeln!(s, "{:<22} {}", "median trade length", opt_str(r.median_trade_length));
    let _ = writeln!(s, "{:<22} {}", "trades", r.trades.len());
    paths.push(write_text(dir, "backtest_summary.txt", &s)?);
    Ok(paths)
}

/// Expanding least squares on the cascade of observed log-RV.
fn har_stream(obs: &[Option<f64>], windows: &[usize], window: usize, mass: f64) -> Result<ForecastStream> {
    let need = windows.iter().copied().max().unwrap_or(1);
    let x: Vec<Option<DVector<f64>>> = (0..obs.len())
        .map(|t| {
            if t < need {
                return None;
            }
            let hist: Option<Vec<f64>> = obs[t - need..t].iter().copied().collect();
            hist.map(|h| cascade_features(&h, windows))
        })
        .collect();
    Ok(har_baseline(&x, obs, window, mass)?.stream)
}

/// Per-model evaluation on a common set of days.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub reports: Vec<EvalReport>,
    /// Coverage rows with each model's own intervals.
    pub native: Vec<(String, f64, CoverageRow)>,
    /// Coverage rows after scaling every model to a common mean width.
    pub common: Vec<(String, f64, CoverageRow)>,
    pub common_width: f64,
}

/// Evaluates named models against `obs[series][day]`. A (series, day) pair
/// counts only when every model forecasts it and the previous observation
/// exists; moves are `obs_t − obs_{t−1}`.
pub fn evaluate(cfg: &RunConfig, models: &[(String, Vec<ForecastStream>)], obs: &[Vec<Option<f64>>]) -> Result<Evaluation> {
    let n_days = obs.first().map_or(0, Vec::len);
    let mut models: Vec<(String, Vec<ForecastStream>)> = models.to_vec();
    let mut moves = vec![vec![None; n_days]; obs.len()];
    for (j, y) in obs.iter().enumerate() {
        for t in 1..n_days {
            let usable = models
                .iter()
                .all(|(_, s)| s[j].mean[t].is_some() && s[j].interval[t].is_some());
            if let (true, Some(a), Some(b)) = (usable, y[t - 1], y[t]) {
                moves[j][t] = Some(b - a);
            }
        }
    }
    for (_, streams) in models.iter_mut() {
        for (j, s) in streams.iter_mut().enumerate() {
            for t in 0..n_days {
                if moves[j][t].is_none() {
                    s.mean[t] = None;
                    s.interval[t] = None;
                }
            }
        }
    }
    let flat_obs: Vec<Option<f64>> = obs.iter().flatten().copied().collect();
    let flat_moves: Vec<Option<f64>> = moves.iter().flatten().copied().collect();
    let abs_moves: Vec<f64> = flat_moves.iter().flatten().map(|m| m.abs()).collect();
    if abs_moves.is_empty() {
        return Err(Error::NotReady { needed: 1, available: 0 });
    }
    let up_moves: Vec<f64> = flat_moves.iter().flatten().copied().filter(|m| *m > 0.0).collect();
    let common_width = cfg.metrics.width_ratio * mean(&abs_moves);
    let mut reports = Vec::new();
    let (mut native, mut common) = (Vec::new(), Vec::new());
    for (name, streams) in &models {
        let per: Vec<PointMetrics> = streams
            .iter()
            .zip(obs)
            .enumerate()
            .filter_map(|(j, (s, y))| match point_metrics(&s.mean, y) {
                Ok(m) => Some(m),
                Err(e) => {
                    log::warn!("{name}: series {j} left out: {e}");
                    None
                }
            })
            .collect();
        let iv: Vec<Option<Interval>> = streams.iter().flat_map(|s| s.interval.iter().copied()).collect();
        let centers: Vec<Option<f64>> = streams.iter().flat_map(|s| s.mean.iter().copied()).collect();
        let k = calibrate_multiplier(&iv, common_width)?;
        let scaled = rescale_intervals(&iv, &centers, k);
        let mut rows_native = Vec::new();
        for (filter, pool) in [(MoveFilter::Abs, &abs_moves), (MoveFilter::Positive, &up_moves)] {
            if pool.is_empty() {
                continue;
            }
            for &q in &cfg.metrics.thresholds {
                let thr = quantile(pool, q);
                if let Some(r) = ci_coverage(&iv, &flat_obs, &flat_moves, filter, thr)? {
                    native.push((name.clone(), q, r));
                    rows_native.push(r);
                }
                if let Some(r) = ci_coverage(&scaled, &flat_obs, &flat_moves, filter, thr)? {
                    common.push((name.clone(), q, r));
                }
            }
        }
        reports.push(EvalReport::from_series(name, &per, rows_native)?);
    }
    Ok(Evaluation {
        reports,
        native,
        common,
        common_width,
    })
}

/// Full model against persistence, least-squares HAR and the plain engine.
pub fn cmd_metrics(cfg: &RunConfig, forecasts: Option<&Path>) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (panel, _) = load_panel(cfg)?;
    let prep = prepare(cfg, &panel)?;
    let obs = observations(&prep);
    let full = match forecasts {
        Some(p) => streams_from_rows(&read_forecasts(p)?, &prep.dates, &prep.ids),
        None => run_engine(&cfg.engine_config(), prep.clone())?.streams(),
    };
    let (window, mass) = (cfg.metrics.window, cfg.engine.interval_mass);
    let mut models = vec![
        ("sgdlm".to_string(), full),
        (
            "persistence".to_string(),
            obs.iter().map(|y| persistence_baseline(y, window, mass)).collect(),
        ),
        (
            "har-ols".to_string(),
            obs.iter()
                .map(|y| har_stream(y, &cfg.rv.scales, window, mass))
                .collect::<Result<_>>()?,
        ),
    ];
    if cfg.metrics.plain {
        let plain = plain_config(cfg);
        let out = run_engine(&plain.engine_config(), prepare(&plain, &panel)?)?;
        models.push(("sgdlm-plain".to_string(), out.streams()));
    }
    let ev = evaluate(cfg, &models, &obs)?;
    let dir = &cfg.out;
    let mut paths = vec![write_text(dir, "config.txt", &cfg.to_text())?];

    let (path, mut w) = create(dir, "metrics.csv")?;
    w.write_record(["model", "series", "median_mad", "median_rmse", "median_r2", "median_mz"])?;
    for r in &ev.reports {
        w.write_record([
            r.model.clone(),
            r.series.to_string(),
            r.median_mad.to_string(),
            r.median_rmse.to_string(),
            opt_str(r.median_r2),
            opt_str(r.median_mz),
        ])?;
    }
    w.flush()?;
    paths.push(path);

    let (path, mut w) = create(dir, "coverage.csv")?;
    w.write_record([
        "model",
        "intervals",
        "filter",
        "level",
        "threshold",
        "mean_move",
        "mean_width",
        "pct_inside",
        "count",
    ])?;
    for (kind, rows) in [("native", &ev.native), ("common", &ev.common)] {
        for (model, q, r) in rows {
            w.write_record([
                model.clone(),
                kind.to_string(),
                r.filter.as_str().to_string(),
                q.to_string(),
                r.threshold.to_string(),
                r.mean_move.to_string(),
                r.mean_width.to_string(),
                r.pct_inside.to_string(),
                r.count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    paths.push(path);
    paths.push(write_text(dir, "report.txt", &report_text(&ev))?);
    Ok(paths)
}

fn report_text(ev: &Evaluation) -> String {
    let mut s = String::new();
    let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    let _ = writeln!(s, "{:<14} {:>7} {:>10} {:>10} {:>10} {:>10}", "model", "series", "median MAD", "RMSE", "R2", "MZ");
    for r in &ev.reports {
        let _ = writeln!(
            s,
            "{:<14} {:>7} {:>10.4} {:>10.4} {:>10} {:>10}",
            r.model,
            r.series,
            r.median_mad,
            r.median_rmse,
            f(r.median_r2),
            f(r.median_mz)
        );
    }
    for (title, rows) in [("own intervals", &ev.native), ("common mean width", &ev.common)] {
        let _ = writeln!(s);
        if title == "common mean width" {
            let _ = writeln!(s, "% inside, {title} {:.4}", ev.common_width);
        } else {
            let _ = writeln!(s, "% inside, {title}");
        }
        let _ = writeln!(
            s,
            "{:<14} {:<9} {:>6} {:>10} {:>10} {:>10} {:>9} {:>7}",
            "model", "filter", "level", "threshold", "mean move", "width", "% in", "count"
        );
        for (model, q, r) in rows.iter() {
            let _ = writeln!(
                s,
                "{:<14} {:<9} {:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>9.2} {:>7}",
                model,
                r.filter.as_str(),
                q,
                r.threshold,
                r.mean_move,
                r.mean_width,
                r.pct_inside,
                r.count
            );
        }
    }
    s
}

/// Rescaled realized variance by return-frequency lag for each series.
pub fn cmd_variogram(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let (panel, _) = load_panel(cfg)?;
    let (path, mut w) = create(&cfg.out, "variogram.csv")?;
    w.write_record(["id", "lag", "rv"])?;
    for s in &panel.series {
        match variogram(s, cfg.rv.rho, cfg.rv.window, cfg.variogram_max_lag) {
            Ok(v) => {
                for (l, rv) in v.iter().enumerate() {
                    w.write_record([s.id.clone(), (l + 1).to_string(), rv.to_string()])?;
                }
            }
            Err(e) => log::warn!("{}: no variogram: {e}", s.id),
        }
    }
    w.flush()?;
    Ok(vec![path])
}

/// Simulated prices plus the generator's ground truth.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let spec = cfg
        .sim_spec()
        .ok_or_else(|| Error::config("data.source", "simulate needs a simulated source"))?;
    let (panel, truth) = generate(&spec)?;
    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    let prices = dir.join("prices.csv");
    write_price_csv(&panel, BufWriter::new(File::create(&prices)?))?;
    let mut paths = vec![write_text(dir, "config.txt", &cfg.to_text())?, prices];

    let (path, mut w) = create(dir, "truth.csv")?;
    w.write_record(["id", "key", "value"])?;
    let ids: Vec<&str> = panel.series.iter().map(|s| s.id.as_str()).collect();
    for (key, values) in [("drift", &truth.drift), ("vol", &truth.vol), ("loading", &truth.loadings)] {
        for (id, v) in ids.iter().zip(values.iter()) {
            w.write_record([id.to_string(), key.to_string(), v.to_string()])?;
        }
    }
    if let Some(b) = truth.har_beta {
        for (name, v) in ["har_beta_d", "har_beta_w", "har_beta_m"].iter().zip(b) {
            w.write_record([String::new(), name.to_string(), v.to_string()])?;
        }
    }
    if let Some(c) = truth.har_intercept {
        w.write_record([String::new(), "har_intercept".to_string(), c.to_string()])?;
    }
    if let Some(d) = truth.driver {
        w.write_record([ids[d].to_string(), "driver".to_string(), "1".to_string()])?;
    }
    w.flush()?;
    paths.push(path);

    if !truth.latent_log_var.is_empty() {
        let (path, mut w) = create(dir, "latent.csv")?;
        w.write_record(["date", "id", "log_var"])?;
        for (t, d) in panel.dates.iter().enumerate() {
            for (id, v) in ids.iter().zip(&truth.latent_log_var) {
                w.write_record([date_str(*d), id.to_string(), v[t].to_string()])?;
            }
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Generator, SimSpec};

    fn small(dir: &Path) -> RunConfig {
        let mut c = RunConfig::default();
        c.data = DataSource::Sim(SimSpec {
            n_series: 4,
            n_days: 420,
            seed: 0,
            generator: Generator::null(),
        });
        c.seed = 3;
        c.engine.n_mc = 64;
        c.features.warmup = 100;
        c.out = dir.to_path_buf();
        c
    }

    #[test]
    fn forecast_rows_follow_targets_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(dir.path());
        let out = run_model(&cfg).unwrap();
        let rows = out.forecast_rows();
        let expected: usize = out.prep.days.iter().map(|d| d.targets.iter().flatten().count()).sum();
        assert_eq!(rows.len(), expected);
        assert!(rows.iter().all(|r| r.lo <= r.mean && r.mean <= r.hi));
        let path = write_forecasts(dir.path(), &rows).unwrap();
        assert_eq!(read_forecasts(&path).unwrap(), rows);
    }

    #[test]
    fn coefficient_names_are_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_model(&small(dir.path())).unwrap();
        let recs = out.coefficient_records();
        assert!(!recs.is_empty());
        let g = group_coefficients(&recs).unwrap();
        assert_eq!(g.ids.len(), 4);
        assert!(recs.iter().any(|r| r.name == "rv_d"));
    }

    #[test]
    fn har_stream_is_least_squares_on_the_cascade() {
        // y_t = 0.5 + 0.5 y_{t−1}, exact: the expanding fit recovers it
        let mut y = vec![Some(0.1)];
        for t in 1..200 {
            let prev = y[t - 1].unwrap();
            y.push(Some(0.5 + 0.5 * prev + if t % 2 == 0 { 0.01 } else { -0.01 }));
        }
        let s = har_stream(&y, &[1], 30, 0.9).unwrap();
        assert!(s.mean[..2].iter().all(Option::is_none));
        let t = 150;
        let p = s.mean[t].unwrap();
        assert!((p - y[t].unwrap()).abs() < 0.03, "{p}");
    }

    #[test]
    fn evaluation_aligns_models_on_common_days() {
        let obs: Vec<Vec<Option<f64>>> = (0..3)
            .map(|j| (0..120).map(|t| Some(((t * (j + 2)) as f64 * 0.7).sin())).collect())
            .collect();
        let cfg = RunConfig::default();
        let a: Vec<ForecastStream> = obs.iter().map(|y| persistence_baseline(y, 30, 0.9)).collect();
        let mut b = a.clone();
        for s in &mut b {
            s.mean[50] = None;
        }
        let ev = evaluate(&cfg, &[("a".into(), a), ("b".into(), b)], &obs).unwrap();
        assert_eq!(ev.reports[0], EvalReport { model: "a".into(), ..ev.reports[1].clone() });
        let half = ev.common.len() / 2;
        for ((_, _, ra), (_, _, rb)) in ev.common[..half].iter().zip(&ev.common[half..]) {
            assert_eq!(ra.count, rb.count);
        }
        let (_, q, first) = ev.common[0];
        assert_eq!((q, first.filter), (0.0, MoveFilter::Abs));
        assert!((first.mean_width / ev.common_width - 1.0).abs() < 1e-9);
    }
}
