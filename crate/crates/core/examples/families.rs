//! The isotropic log-concave zoo: sampling, exact moments and densities.

use locball::reduction::estimate_covariance;
use locball::LogConcaveFamily;

fn main() -> locball::Result<()> {
    let n = 3;
    for family in LogConcaveFamily::zoo(n) {
        let cov = estimate_covariance(&family, 200_000, 7)?;
        let max_off = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (cov[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        let log_f0 = family.log_density_normalized(&vec![0.0; n]).ok();
        println!(
            "{:<16} symmetric={:<5} support={:<8} max|Cov - I| = {max_off:.4}  log f(0) = {}",
            family.name(),
            family.is_symmetric(),
            family.support_radius().map(|r| format!("{r:.3}")).unwrap_or_else(|| "inf".into()),
            log_f0.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into()),
        );
    }
    Ok(())
}
