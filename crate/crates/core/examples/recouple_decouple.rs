// One recoupling and decoupling round by hand: draw from two independent
// posteriors, weight the draws by |det(I − Γ)| and project each series back
// to a Normal-Gamma.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgdlm::dlm::DlmState;
use sgdlm::engine::{recouple_weights, sample_normal_gamma, vb_decouple, GammaMatrix, SampleBatch};

pub fn run_example() -> sgdlm::Result<()> {
    let n_mc = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // coefficient 0 is an offset, coefficient 1 the other series' value
    let posts = [
        DlmState {
            m: DVector::from_vec(vec![0.1, 0.6]),
            c: DMatrix::from_diagonal(&DVector::from_vec(vec![0.05, 0.04])),
            n: 20.0,
            s: 0.5,
        },
        DlmState {
            m: DVector::from_vec(vec![-0.2, 0.7]),
            c: DMatrix::from_diagonal(&DVector::from_vec(vec![0.05, 0.04])),
            n: 20.0,
            s: 0.5,
        },
    ];
    let batch = SampleBatch {
        series: posts
            .iter()
            .map(|p| sample_normal_gamma(p.view(), n_mc, &mut rng))
            .collect::<sgdlm::Result<_>>()?,
        weights: vec![1.0 / n_mc as f64; n_mc],
    };
    let gamma = GammaMatrix { rows: vec![vec![(1, 1)], vec![(0, 1)]] };
    let rec = recouple_weights(&batch, &gamma, 10.0)?;
    println!(
        "entropy {:.4} (max {:.4})  ESS {:.1}/{n_mc}  tempering {:.3}",
        rec.entropy,
        (n_mc as f64).ln(),
        rec.ess,
        rec.tempering
    );
    for (j, p) in posts.iter().enumerate() {
        let d = vb_decouple(&batch.series[j], &rec.weights, p.n)?;
        println!(
            "series {j}: m ({:.3}, {:.3}) -> ({:.3}, {:.3}), n {:.1} -> {:.1}, s {:.3} -> {:.3}",
            p.m[0], p.m[1], d.state.m[0], d.state.m[1], p.n, d.state.n, p.s, d.state.s
        );
    }
    Ok(())
}

fn main() -> sgdlm::Result<()> {
    run_example()
}
