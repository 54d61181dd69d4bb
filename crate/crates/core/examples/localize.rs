//! One tilt-SDE path on the standard Gaussian, where `A_t = I/(1+t)` exactly.

use locball::localization::run_path;
use locball::{Backend, LogConcaveFamily, PathConfig};

fn main() -> locball::Result<()> {
    let family = LogConcaveFamily::gaussian(3);
    let config = PathConfig::new(1.0, 1e-3, Backend::ClosedForm).record_every(250);
    let path = run_path(&family, &config, 42)?;
    println!("{:>6} {:>10} {:>10} {:>10}", "t", "|theta|", "Tr(A)", "3/(1+t)");
    for ((t, state), m) in path.times.iter().zip(&path.states).zip(&path.moments) {
        println!("{t:>6.3} {:>10.4} {:>10.6} {:>10.6}", state.theta.norm(), m.trace(), 3.0 / (1.0 + t));
    }
    Ok(())
}
