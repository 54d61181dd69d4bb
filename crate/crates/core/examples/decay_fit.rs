//! Single-exponent fit of small-ball tables, with per-dimension slopes.

use locball::analysis::fit::{decay_table, exponent_fit, fit_rows};
use locball::LogConcaveFamily;

fn main() -> locball::Result<()> {
    let table = decay_table(|n| Ok(LogConcaveFamily::uniform_cube(n)), &[2, 4, 8], &[0.05, 0.1, 0.2], 1_000_000, 3)?;
    let fit = exponent_fit(&fit_rows(&table))?;
    println!("pooled c = {:.4}, residual = {:.4}", fit.fitted_c, fit.residual);
    for (n, c) in &fit.per_n {
        println!("  n={n}: c = {c:.4}");
    }
    Ok(())
}
