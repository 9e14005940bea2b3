// Fit the model to a latent log-variance panel with known HAR loadings and
// compare the posterior means to the truth.

use sgdlm::dlm::DiscountConfig;
use sgdlm::engine::{Engine, EngineConfig};
use sgdlm::features::prepare_cascade_panel;
use sgdlm::sim::{generate, Generator, SimSpec};

pub fn run_example() -> sgdlm::Result<()> {
    let spec = SimSpec { n_series: 4, n_days: 1200, seed: 2, generator: Generator::har_known() };
    let (panel, truth) = generate(&spec)?;
    let beta = truth.har_beta.expect("har generator records its loadings");
    let ids: Vec<String> = panel.series.iter().map(|s| s.id.clone()).collect();
    let prep = prepare_cascade_panel(panel.dates.clone(), ids, &truth.latent_log_var, &[1, 5, 20], 100)?;
    let cfg = EngineConfig {
        discount: DiscountConfig { delta_phi: 1.0, ..Default::default() },
        n_mc: 200,
        ..Default::default()
    };
    let mut eng = Engine::new(cfg, prep.n_series(), prep.layout.len())?;
    let from = 600;
    let mut sums = vec![[0.0; 3]; prep.n_series()];
    for (t, day) in prep.days.iter().enumerate() {
        let rep = eng.step(day)?;
        if t >= from {
            for (acc, s) in sums.iter_mut().zip(&rep.snapshots) {
                for k in 0..3 {
                    acc[k] += s.m[1 + k] / (prep.n_days() - from) as f64;
                }
            }
        }
    }
    println!("truth      d {:.3}  w {:.3}  m {:.3}", beta[0], beta[1], beta[2]);
    for (id, b) in prep.ids.iter().zip(&sums) {
        println!("{id}       d {:.3}  w {:.3}  m {:.3}", b[0], b[1], b[2]);
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
