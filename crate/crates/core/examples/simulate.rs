// The three synthetic worlds and their ground truth, written as CSV through
// the same path the command line uses.

use sgdlm::config::RunConfig;
use sgdlm::pipeline::cmd_simulate;
use sgdlm::sim::{generate, Generator, SimSpec};

pub fn run_example() -> sgdlm::Result<()> {
    for generator in [Generator::null(), Generator::har_known(), Generator::factor_driven()] {
        let name = generator.name();
        let (panel, truth) = generate(&SimSpec { n_series: 5, n_days: 300, seed: 1, generator })?;
        let last: Vec<String> = panel
            .series
            .iter()
            .map(|s| format!("{:.2}", s.close.last().copied().flatten().unwrap_or(f64::NAN)))
            .collect();
        println!("{name:<8} closes on the last day: {}", last.join(" "));
        if let Some(b) = truth.har_beta {
            println!("         loadings {b:?}");
        }
        if let Some(d) = truth.driver {
            println!("         driver {} with loadings {:?}", panel.series[d].id, truth.loadings);
        }
    }
    let dir = std::env::temp_dir().join("sgdlm-example-simulate");
    let mut cfg = RunConfig::parse("sim.generator = factor\nsim.series = 4\nsim.days = 200\n")?;
    cfg.out = dir;
    for path in cmd_simulate(&cfg)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
