//! `E_{μ_t} φ` is a martingale: ensemble means stay at their `t = 0` values.

use locball::analysis::checks::{ensemble, martingale_check};
use locball::{Backend, LogConcaveFamily, PathConfig};

fn main() -> locball::Result<()> {
    let family = LogConcaveFamily::uniform_cube(4);
    let config = PathConfig::new(1.0, 1e-2, Backend::Quadrature).budget(20_000).record_every(25);
    let ens = ensemble(&family, &config, 128, 5);
    let report = martingale_check(&family, &ens, &[0.25, 0.5, 1.0], 20_000, 4.0, 5)?;
    for r in &report.rows {
        println!("{:<18} t={:<4} mean={:.4} ± {:.4} reference={:.4} z={:.2}", r.function.as_str(), r.t, r.mean, r.stderr, r.reference, r.z);
    }
    println!("pass = {}", report.pass);
    Ok(())
}
