use locball::reduction::{condition_to_ball, reduce, whiten, DEFAULT_C0};
use locball::LogConcaveFamily;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn check_report(family: &LogConcaveFamily, seed: u64) {
    let n = family.dim();
    let (reduced, r) = reduce(family, DEFAULT_C0, seed).unwrap();
    let c0 = DEFAULT_C0;
    // Markov: P(|X| > 2C₀√n) ≤ 1/(4C₀²); slack of 4 binomial stderr.
    let floor = 1.0 - 1.0 / (4.0 * c0 * c0) - 4.0 * (0.25f64 / 100_000.0).sqrt();
    assert!(r.conditioning_mass >= floor, "{} mass {}", family.name(), r.conditioning_mass);
    let (lo, hi) = r.covariance_spectrum_bounds;
    assert!(lo >= 0.5 - 0.05 && hi <= 2.0 + 0.05, "{} spectrum ({lo}, {hi})", family.name());
    let cap = 2.0 * std::f64::consts::SQRT_2 * c0 * (n as f64).sqrt();
    assert!(r.final_support_radius <= cap * (1.0 + 1e-9), "{} radius {}", family.name(), r.final_support_radius);
    assert!(reduced.is_symmetric());
    assert_eq!(reduced.dim(), n);
}

#[test]
fn reduced_zoo_satisfies_the_sandwich() {
    for family in LogConcaveFamily::zoo(3) {
        check_report(&family, 17);
    }
}

#[test]
fn reduced_measure_is_nearly_isotropic() {
    let (reduced, _) = reduce(&LogConcaveFamily::product_laplace(3), DEFAULT_C0, 4).unwrap();
    let m = locball::measures::empirical_moments(&reduced.sample(200_000, 5).unwrap());
    assert!((m.covariance - DMatrix::identity(3, 3)).amax() < 0.05);
    assert!(m.mean.amax() < 0.02);
}

#[test]
fn conditioning_mass_of_the_unit_interval_cube() {
    // The cube [-√3, √3] lies inside the ball of radius 2, so the mass is 1.
    let (_, mass) = condition_to_ball(&LogConcaveFamily::uniform_cube(1), 2.0, 10_000, 1).unwrap();
    assert_eq!(mass.mass, 1.0);
}

#[test]
fn whitening_rejects_a_shape_mismatch() {
    assert!(whiten(&LogConcaveFamily::gaussian(2), &DMatrix::identity(3, 3)).is_err());
}

#[test]
fn nonpositive_c0_is_rejected() {
    assert!(reduce(&LogConcaveFamily::gaussian(2), 0.0, 1).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn reduction_is_deterministic(seed in any::<u64>()) {
        let f = LogConcaveFamily::uniform_simplex(2);
        let a = reduce(&f, DEFAULT_C0, seed).unwrap().1;
        let b = reduce(&f, DEFAULT_C0, seed).unwrap().1;
        prop_assert_eq!(a, b);
    }
}
