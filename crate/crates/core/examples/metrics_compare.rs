// Score the model against persistence and a rolling HAR regression on the
// same days, with native and common-width intervals.

use sgdlm::config::RunConfig;
use sgdlm::metrics::persistence_baseline;
use sgdlm::pipeline::{evaluate, load_panel, observations, prepare, run_engine};

pub fn run_example() -> sgdlm::Result<()> {
    let cfg = RunConfig::parse(
        "sim.series = 6\n\
         sim.days = 450\n\
         features.warmup = 150\n\
         engine.n_mc = 200\n",
    )?;
    let (panel, _) = load_panel(&cfg)?;
    let prep = prepare(&cfg, &panel)?;
    let obs = observations(&prep);
    let model = run_engine(&cfg.engine_config(), prep)?.streams();
    let (window, mass) = (cfg.metrics.window, cfg.engine.interval_mass);
    let persistence = obs.iter().map(|y| persistence_baseline(y, window, mass)).collect();
    let ev = evaluate(&cfg, &[("sgdlm".into(), model), ("persistence".into(), persistence)], &obs)?;
    for r in &ev.reports {
        println!(
            "{:<12} median MAD {:.4}  median RMSE {:.4}  over {} series",
            r.model, r.median_mad, r.median_rmse, r.series
        );
    }
    println!("common interval width {:.4}", ev.common_width);
    for (model, q, row) in &ev.common {
        println!(
            "{model:<12} {} moves from the {q:.2} quantile ({:.4}) up: {:.1}% inside over {} days",
            row.filter.as_str(),
            row.threshold,
            row.pct_inside,
            row.count
        );
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
