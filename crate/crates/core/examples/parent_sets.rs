// Parent-set dynamics in a world where one series drives the volatility of
// the rest: how often the driver sits in each follower's core set, and how
// many down-set members retire along the way.

use sgdlm::data::RvConfig;
use sgdlm::engine::{Engine, EngineConfig};
use sgdlm::features::{prepare_price_panel, FeatureConfig};
use sgdlm::parents::SetKind;
use sgdlm::sim::{generate, Generator, SimSpec};

pub fn run_example() -> sgdlm::Result<()> {
    let spec = SimSpec { n_series: 8, n_days: 700, seed: 4, generator: Generator::factor_driven() };
    let (panel, truth) = generate(&spec)?;
    let driver = truth.driver.expect("factor world names its driver");
    let features = FeatureConfig { warmup: 150, ..Default::default() };
    let prep = prepare_price_panel(&panel, &RvConfig::default(), &features)?;
    let mut eng = Engine::new(EngineConfig { n_mc: 200, ..Default::default() }, prep.n_series(), prep.layout.len())?;
    let mut in_core = vec![0usize; prep.n_series()];
    let (mut days, mut retired) = (0, 0);
    for (t, day) in prep.days.iter().enumerate() {
        let rep = eng.step(day)?;
        retired += rep.retired.len();
        if t < 300 {
            continue;
        }
        days += 1;
        for (j, s) in rep.snapshots.iter().enumerate() {
            if s.parents.iter().any(|&(id, set, _)| id == driver && set == SetKind::Core) {
                in_core[j] += 1;
            }
        }
    }
    println!("driver {}", prep.ids[driver]);
    for (j, c) in in_core.iter().enumerate().filter(|(j, _)| *j != driver) {
        println!("{}: driver in core on {:.0}% of days", prep.ids[j], 100.0 * *c as f64 / days as f64);
    }
    println!("{retired} down-set retirements");
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
