//! Small sets keep their mass along the localization of a reduced measure.

use locball::analysis::checks::{shrinkage_check, ShrinkageSetup};
use locball::reduction::reduce;
use locball::{Backend, LogConcaveFamily, Region};

fn main() -> locball::Result<()> {
    let (family, _) = reduce(&LogConcaveFamily::uniform_cube(2), 3.0, 2)?;
    let setup = ShrinkageSetup {
        region: Region::centered_ball(2, 2f64.sqrt()),
        horizon: 0.25,
        dt: 1e-2,
        paths: 64,
        lambda: 2.0,
        backend: Backend::Sampling,
        budget: 5_000,
        initial_samples: 100_000,
    };
    let r = shrinkage_check(&family, &setup, 4.0, 3.0, 2)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
