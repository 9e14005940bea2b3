// Build a run configuration from text, override single keys, and write it
// back out. Errors name the offending key.

use sgdlm::config::RunConfig;

pub fn run_example() -> sgdlm::Result<()> {
    let text = "\
# a smaller universe with slower coefficient drift
sim.series = 12
discount.delta_phi = 0.995
parents.n_core = 3
signals.cutoff = 2021-06-30
";
    let mut cfg = RunConfig::parse(text)?;
    cfg.set("engine.n_mc", "1000")?;
    cfg.validate()?;
    let back = RunConfig::parse(&cfg.to_text())?;
    assert_eq!(back, cfg);
    for line in cfg.to_text().lines().filter(|l| l.starts_with("parents.") || l.starts_with("discount.")) {
        println!("{line}");
    }
    for bad in ["engine.n_mcc = 5", "discount.delta_phi = 1.5", "sim.har_beta = 0.4,0.3,0.2"] {
        match RunConfig::parse(bad).and_then(|c| c.validate()) {
            Ok(_) => println!("{bad}: accepted"),
            Err(e) => println!("{bad}: {e}"),
        }
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
