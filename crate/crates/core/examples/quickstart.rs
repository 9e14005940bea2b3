// Simulate a small null world, run the model end to end and print the last
// few one-step forecasts with the day's recoupling diagnostics.
//
// ```bash
// cargo run --release --example quickstart
// ```

use sgdlm::config::RunConfig;
use sgdlm::pipeline::run_model;

pub fn run_example() -> sgdlm::Result<()> {
    let cfg = RunConfig::parse(
        "sim.series = 8\n\
         sim.days = 450\n\
         features.warmup = 150\n\
         engine.n_mc = 200\n\
         run.seed = 11\n",
    )?;
    let out = run_model(&cfg)?;
    let rows = out.forecast_rows();
    println!("{} forecasts over {} days", rows.len(), out.reports.len());
    for r in rows.iter().rev().take(5).rev() {
        println!(
            "{} {}  mean {:>8.4}  90% [{:>8.4}, {:>8.4}]  H {:.4}  ESS {:.1}",
            r.date, r.id, r.mean, r.lo, r.hi, r.entropy, r.ess
        );
    }
    let last = out.reports.last().expect("non-empty panel");
    for (j, s) in last.snapshots.iter().enumerate().take(3) {
        let parents: Vec<String> = s
            .parents
            .iter()
            .map(|(id, set, _)| format!("{}:{}", out.prep.ids[*id], set.as_str()))
            .collect();
        println!("{} parents [{}]", out.prep.ids[j], parents.join(", "));
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
