// A single Normal-Gamma DLM on a regression whose slope drifts. Shows the
// forecast, update and discount cycle that every series runs each day.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sgdlm::dlm::{evolve, forecast_one, kalman_update, DiscountConfig, PriorState};

pub fn run_example() -> sgdlm::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = DiscountConfig::default();
    let mut prior = PriorState::initial(2, 1.0, 1.0, 1.0);
    let (mut inside, steps) = (0, 600);
    for t in 0..steps {
        let slope = if t < steps / 2 { 0.5 } else { -0.3 };
        let x: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = StandardNormal.sample(&mut rng);
        let y = 0.2 + slope * x + 0.1 * e;
        let f = DVector::from_vec(vec![1.0, x]);
        let fc = forecast_one(&prior, &f)?;
        let (lo, hi) = fc.interval(0.9);
        if lo <= y && y <= hi {
            inside += 1;
        }
        let post = kalman_update(&prior, &f, y)?;
        if t % 100 == 99 {
            println!(
                "t {:>3}  slope {:>5.2}  m = ({:>6.3}, {:>6.3})  s {:.5}  n {:.1}",
                t + 1,
                slope,
                post.m[0],
                post.m[1],
                post.s,
                post.n
            );
        }
        prior = evolve(&post, &DMatrix::identity(2, 2), &cfg, 2)?;
    }
    println!("90% interval coverage {:.1}%", 100.0 * inside as f64 / steps as f64);
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
