use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sgdlm::config::RunConfig;
use sgdlm::pipeline;
use sgdlm::Result;

/// Thread count for the worker pool; unset uses all cores.
const THREADS_VAR: &str = "SGDLM_THREADS";

#[derive(Parser)]
#[command(name = "sgdlm", version, about = "Multi-asset realized-volatility forecasting with simultaneous graphical DLMs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine and write forecasts, coefficients and diagnostics.
    Run,
    /// Backtest change-point signals on a coefficient dump.
    Backtest {
        /// Coefficient dump; a fresh run when omitted.
        #[arg(long)]
        coefficients: Option<PathBuf>,
    },
    /// Compare the model with persistence, least-squares HAR and the plain engine.
    Metrics {
        /// Forecast file from `run`; a fresh run when omitted.
        #[arg(long)]
        forecasts: Option<PathBuf>,
    },
    /// Rescaled realized variance by return-frequency lag.
    Variogram,
    /// Write a simulated price panel and its ground truth.
    Simulate,
}

#[derive(Args)]
struct Common {
    /// Flat `section.key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Price CSV with header date,id,open,high,low,close.
    #[arg(long, global = true, conflicts_with = "sim")]
    data: Option<PathBuf>,
    /// Simulated source: null, har-known or factor-driven.
    #[arg(long, global = true)]
    sim: Option<String>,
    #[arg(long, global = true)]
    series: Option<usize>,
    #[arg(long, global = true)]
    days: Option<usize>,
    #[arg(long, global = true)]
    warmup: Option<usize>,
    /// Daily RV only, without multi-scale and leverage regressors.
    #[arg(long, global = true)]
    no_har: bool,
    #[arg(long, global = true)]
    no_leverage: bool,
    #[arg(long, global = true)]
    ohlc: bool,
    #[arg(long, global = true)]
    no_parents: bool,
    #[arg(long, global = true)]
    delta_phi: Option<f64>,
    #[arg(long, global = true)]
    delta_gamma: Option<f64>,
    #[arg(long, global = true)]
    beta_lambda: Option<f64>,
    #[arg(long, global = true)]
    n_core: Option<usize>,
    #[arg(long, global = true)]
    n_up: Option<usize>,
    #[arg(long, global = true)]
    n_down: Option<usize>,
    #[arg(long, global = true)]
    delta_t: Option<usize>,
    #[arg(long, global = true)]
    n_mc: Option<usize>,
    #[arg(long, global = true)]
    interval_mass: Option<f64>,
    /// Comma-separated signal lags.
    #[arg(long, global = true)]
    lags: Option<String>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Lag-selection cutoff date, YYYY-MM-DD.
    #[arg(long, global = true)]
    cutoff: Option<String>,
    /// Any configuration key, e.g. `--set rv.rho=0.97`; repeatable, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::parse(&std::fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        let mut put = |k: &str, v: Option<String>| match v {
            Some(v) => cfg.set(k, &v),
            None => Ok(()),
        };
        if let Some(p) = &self.data {
            put("data.path", Some(p.display().to_string()))?;
        }
        if self.sim.is_some() {
            put("data.source", Some("sim".into()))?;
        }
        put("sim.generator", self.sim.clone())?;
        put("sim.series", s(&self.series))?;
        put("sim.days", s(&self.days))?;
        put("run.seed", s(&self.seed))?;
        put("run.out", self.out.as_ref().map(|p| p.display().to_string()))?;
        put("features.warmup", s(&self.warmup))?;
        if self.no_har {
            put("features.har", Some("false".into()))?;
            put("features.leverage", Some("false".into()))?;
        }
        put("features.leverage", self.no_leverage.then(|| "false".into()))?;
        put("features.ohlc", self.ohlc.then(|| "true".into()))?;
        put("parents.enabled", self.no_parents.then(|| "false".into()))?;
        put("discount.delta_phi", s(&self.delta_phi))?;
        put("discount.delta_gamma", s(&self.delta_gamma))?;
        put("discount.beta_lambda", s(&self.beta_lambda))?;
        put("parents.n_core", s(&self.n_core))?;
        put("parents.n_up", s(&self.n_up))?;
        put("parents.n_down", s(&self.n_down))?;
        put("parents.delta_t", s(&self.delta_t))?;
        put("engine.n_mc", s(&self.n_mc))?;
        put("engine.interval_mass", s(&self.interval_mass))?;
        put("signals.lags", self.lags.clone())?;
        put("signals.threshold", s(&self.threshold))?;
        put("signals.cutoff", self.cutoff.clone())?;
        for kv in &self.sets {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| sgdlm::Error::Config { field: kv.clone(), reason: "expected KEY=VALUE".into() })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn s<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v.parse().map_err(|_| sgdlm::Error::Config {
        field: THREADS_VAR.into(),
        reason: format!("expected a thread count, got `{v}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| sgdlm::Error::Config { field: THREADS_VAR.into(), reason: e.to_string() })
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    init_threads()?;
    let cfg = cli.common.config()?;
    match cli.command {
        Command::Run => pipeline::cmd_run(&cfg),
        Command::Backtest { coefficients } => pipeline::cmd_backtest(&cfg, coefficients.as_deref()),
        Command::Metrics { forecasts } => pipeline::cmd_metrics(&cfg, forecasts.as_deref()),
        Command::Variogram => pipeline::cmd_variogram(&cfg),
        Command::Simulate => pipeline::cmd_simulate(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
