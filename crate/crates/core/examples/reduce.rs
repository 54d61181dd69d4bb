//! Symmetrize, condition to a ball of radius 2C₀√n and whiten.

use locball::reduction::reduce;
use locball::LogConcaveFamily;

fn main() -> locball::Result<()> {
    for family in [LogConcaveFamily::uniform_cube(4), LogConcaveFamily::product_laplace(4)] {
        let (reduced, report) = reduce(&family, 3.0, 1)?;
        println!("{} -> {}", family.name(), reduced.name());
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}
