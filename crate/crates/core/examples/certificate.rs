//! Replay of the small-ball argument on a reduced Gaussian.

use locball::analysis::{assemble_certificate, CertificateParams};
use locball::reduction::reduce;
use locball::{Backend, LogConcaveFamily};

fn main() -> locball::Result<()> {
    let (family, _) = reduce(&LogConcaveFamily::gaussian(4), 3.0, 8)?;
    let mut params = CertificateParams::new(0.5, 4.0, 0.05, Backend::Sampling);
    params.dt = 2e-2;
    params.paths = 32;
    params.budget = 5_000;
    params.samples = 200_000;
    let r = assemble_certificate(&family, &params, 8)?;
    println!("P(E0) = {:.3} against gate {:.3}: {}", r.e0.worst_case, r.e0.threshold, r.e0.pass);
    println!("projected-bound violations = {}: {}", r.projected.value, r.projected.pass);
    println!("E1 frequency = {:.3} against gate {:.3}: {}", r.e1.worst_case, r.e1.threshold, r.e1.pass);
    println!("mass {:?}, implied bound {:?}, pass {}", r.mass, r.implied_bound, r.pass());
    Ok(())
}
