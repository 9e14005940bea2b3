// Trading signals from coefficient change points, combined across groups and
// backtested as an equal-weight book of long/short volatility positions.

use sgdlm::config::RunConfig;
use sgdlm::pipeline::{backtest, run_model};

pub fn run_example() -> sgdlm::Result<()> {
    let mut cfg = RunConfig::parse(
        "sim.series = 6\n\
         sim.days = 500\n\
         features.warmup = 150\n\
         engine.n_mc = 200\n\
         signals.groups = rv,core\n\
         signals.lags = 2,5,10\n",
    )?;
    let out = run_model(&cfg)?;
    let records = out.coefficient_records();
    // choose each group's lag on the first part of the sample
    let cutoff = out.prep.dates[350];
    cfg.set("signals.cutoff", &cutoff.to_string())?;
    let bt = backtest(&cfg, &records, &out.prep)?;
    for (g, lag) in &bt.lags {
        println!("group {} lag {lag}", g.as_str());
    }
    let r = &bt.report;
    println!(
        "{} trades, hit rate {}, max drawdown {:.4}, final value {:.4}",
        r.trades.len(),
        r.hit_rate.map_or("n/a".into(), |h| format!("{h:.3}")),
        r.max_drawdown,
        r.value.last().copied().unwrap_or(1.0)
    );
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
