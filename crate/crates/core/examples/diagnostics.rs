//! Borell ratios over the zoo and subgaussian norms of tilted measures.

use locball::analysis::diagnostics::{borell_survey, subgaussian_norm};
use locball::LogConcaveFamily;
use nalgebra::DVector;

fn main() -> locball::Result<()> {
    let zoo = LogConcaveFamily::zoo(4);
    let rows = borell_survey(&zoo, &[3.0, 4.0, 6.0], 4, 100_000, 9)?;
    for p in [3.0, 4.0, 6.0] {
        let worst = rows.iter().filter(|r| r.p == p).max_by(|a, b| a.ratio.total_cmp(&b.ratio)).unwrap();
        println!("p={p}: max Borell ratio {:.3} ± {:.3} ({})", worst.ratio, worst.stderr, worst.family);
    }
    for t in [0.5, 1.0, 4.0] {
        let est = subgaussian_norm(&LogConcaveFamily::product_laplace(4), t, &DVector::zeros(4), 6, 100_000, 9)?;
        println!("laplace t={t}: subgaussian norm {:.3} against 1/sqrt(t) = {:.3}", est.value, est.predicted);
    }
    Ok(())
}
