//! Moments of one tilted measure from the three backends.

use locball::localization::tilted_moments;
use locball::{Backend, LogConcaveFamily, TiltState};

fn main() -> locball::Result<()> {
    let state = TiltState::from_slice(0.7, &[0.5, -1.0])?;
    for family in [LogConcaveFamily::gaussian(2), LogConcaveFamily::uniform_cube(2), LogConcaveFamily::product_laplace(2)] {
        for backend in [Backend::ClosedForm, Backend::Quadrature, Backend::Sampling] {
            if !backend.is_legal(&family) {
                continue;
            }
            let m = tilted_moments(&family, &state, backend, 200_000, 3)?;
            println!(
                "{:<16} {:<12} a = [{:+.5}, {:+.5}]  Tr(A) = {:.5}  ess = {}",
                family.name(),
                backend.as_str(),
                m.barycenter[0],
                m.barycenter[1],
                m.trace(),
                m.diagnostics.ess.map(|e| format!("{e:.0}")).unwrap_or_else(|| "-".into()),
            );
        }
    }
    Ok(())
}
