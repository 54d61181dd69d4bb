//! Small-ball estimates with Wilson intervals against the Gaussian oracle.

use locball::analysis::{gaussian_small_ball_oracle, small_ball_estimate};
use locball::LogConcaveFamily;
use nalgebra::DVector;

fn main() -> locball::Result<()> {
    for n in [2usize, 4, 8] {
        let family = LogConcaveFamily::gaussian(n);
        for eps in [0.05, 0.1, 0.2] {
            let est = small_ball_estimate(&family, &DVector::zeros(n), (eps * n as f64).sqrt(), 1_000_000, 11)?;
            let oracle = gaussian_small_ball_oracle(n, eps)?;
            println!(
                "n={n:<2} eps={eps:<4} p_hat={:.3e} [{:.3e}, {:.3e}] exact={:.3e} chernoff={:.3e} covered={}",
                est.p_hat,
                est.ci_low,
                est.ci_high,
                oracle.exact,
                oracle.chernoff,
                est.covers(oracle.exact)
            );
        }
    }
    Ok(())
}
