// Realized-variance variograms: flat for i.i.d. returns, falling below the
// lag-one level for mean-reverting returns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sgdlm::data::{variogram, PriceSeries};

fn path(rng: &mut ChaCha8Rng, phi: f64, n: usize) -> sgdlm::Result<PriceSeries> {
    let (mut lp, mut prev) = (0.0f64, 0.0);
    let mut closes = Vec::with_capacity(n);
    for _ in 0..n {
        closes.push(100.0 * lp.exp());
        let e: f64 = StandardNormal.sample(rng);
        prev = phi * prev + 0.01 * e;
        lp += prev;
    }
    PriceSeries::from_closes("P", &closes)
}

pub fn run_example() -> sgdlm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (paths, n, max_lag) = (300, 250, 10);
    for phi in [0.0, -0.5, 0.3] {
        let mut mean = vec![0.0; max_lag];
        for _ in 0..paths {
            for (m, v) in mean.iter_mut().zip(variogram(&path(&mut rng, phi, n)?, 0.98, n, max_lag)?) {
                *m += v / paths as f64;
            }
        }
        let cells: Vec<String> = mean.iter().map(|v| format!("{v:.2}")).collect();
        println!("phi {phi:>4}: {}", cells.join(" "));
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
