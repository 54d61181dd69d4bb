use locball::analysis::checks::{covbound_check, ensemble, symmetry_check};
use locball::localization::{measure_under_tilt, run_path, tilted_moments};
use locball::{Backend, LogConcaveFamily, PathConfig, Region, TiltState};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn gaussian_path_follows_the_closed_form() {
    let g = LogConcaveFamily::gaussian(3);
    let config = PathConfig::new(1.0, 1e-3, Backend::ClosedForm).record_every(1);
    let path = run_path(&g, &config, 1).unwrap();
    assert_eq!(path.len(), 1001);
    for ((t, state), m) in path.times.iter().zip(&path.states).zip(&path.moments) {
        let s = 1.0 / (1.0 + t);
        assert!((&m.covariance - DMatrix::identity(3, 3) * s).amax() < 1e-6);
        assert!((&m.barycenter - &state.theta * s).amax() < 1e-6);
    }
}

#[test]
fn backends_agree_on_a_product_family() {
    let cube = LogConcaveFamily::uniform_cube(2);
    let state = TiltState::from_slice(0.8, &[1.0, -0.3]).unwrap();
    let q = tilted_moments(&cube, &state, Backend::Quadrature, 0, 0).unwrap();
    let s = tilted_moments(&cube, &state, Backend::Sampling, 400_000, 2).unwrap();
    let se = s.diagnostics.drift_stderr.unwrap();
    assert!((&q.barycenter - &s.barycenter).amax() < 5.0 * se, "{} vs {}", q.barycenter, s.barycenter);
    assert!((q.covariance - s.covariance).amax() < 0.02);
}

#[test]
fn illegal_backend_is_rejected() {
    let ball = LogConcaveFamily::uniform_ball(2);
    let config = PathConfig::new(0.1, 0.01, Backend::Quadrature);
    assert!(run_path(&ball, &config, 0).is_err());
}

#[test]
fn dt_above_horizon_is_rejected() {
    let config = PathConfig::new(0.1, 0.5, Backend::ClosedForm);
    assert!(run_path(&LogConcaveFamily::gaussian(2), &config, 0).is_err());
}

#[test]
fn paths_do_not_depend_on_worker_count() {
    let family = LogConcaveFamily::product_laplace(2);
    let config = PathConfig::new(0.2, 1e-2, Backend::Quadrature).record_every(5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            ensemble(&family, &config, 6, 3).paths.iter().map(|p| p.last().0.theta.clone()).collect::<Vec<_>>()
        })
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn covariance_stays_below_inverse_time() {
    let family = LogConcaveFamily::uniform_cube(3);
    let config = PathConfig::new(1.0, 1e-2, Backend::Quadrature).record_every(1);
    let ens = ensemble(&family, &config, 16, 8);
    let r = covbound_check(&ens.paths, 0.0, 0.02);
    assert!(r.pass, "{r:?}");
    assert_eq!(r.states, 16 * 100);
}

#[test]
fn symmetric_family_has_odd_barycenter() {
    let family = LogConcaveFamily::product_laplace(2);
    let theta = DVector::from_vec(vec![0.7, -0.2]);
    let r = symmetry_check(&family, 0.5, &theta, Backend::Quadrature, 0, 1e-8, 4.0, 1).unwrap();
    assert!(r.pass, "{r:?}");
}

#[test]
fn tilted_gaussian_ball_mass() {
    // At t = 1, θ = 0 the tilted law is N(0, I/2); in one dimension
    // P(|Y| ≤ 1/√2) = P(|Z| ≤ 1) = erf(1/√2).
    let g = LogConcaveFamily::gaussian(1);
    let state = TiltState::from_slice(1.0, &[0.0]).unwrap();
    let est = measure_under_tilt(&g, &state, &Region::centered_ball(1, 0.5f64.sqrt()), 200_000, 6).unwrap();
    let exact = 0.682_689_492_137_085_9;
    assert!((est.p - exact).abs() < 4.0 * est.stderr.max(1e-9), "{} vs {exact}", est.p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tilted_cube_barycenter_stays_in_the_cube(t in 0.0f64..5.0, a in -10.0f64..10.0, b in -10.0f64..10.0) {
        let cube = LogConcaveFamily::uniform_cube(2);
        let state = TiltState::from_slice(t, &[a, b]).unwrap();
        let m = tilted_moments(&cube, &state, Backend::Quadrature, 0, 0).unwrap();
        let h = 3f64.sqrt();
        prop_assert!(m.barycenter.amax() <= h);
        // The tilted law is t-strongly log-concave: A ≼ I/t.
        if t > 0.0 {
            prop_assert!(m.lambda_max() <= 1.0 / t + 1e-8);
        }
    }

    #[test]
    fn gaussian_tilt_is_closed_form(t in 0.0f64..10.0, a in -5.0f64..5.0) {
        let g = LogConcaveFamily::gaussian(1);
        let state = TiltState::from_slice(t, &[a]).unwrap();
        let m = tilted_moments(&g, &state, Backend::ClosedForm, 0, 0).unwrap();
        prop_assert!((m.barycenter[0] - a / (1.0 + t)).abs() < 1e-12);
        prop_assert!((m.covariance[(0, 0)] - 1.0 / (1.0 + t)).abs() < 1e-12);
    }

    #[test]
    fn negative_time_is_rejected(t in -5.0f64..-1e-9) {
        prop_assert!(TiltState::from_slice(t, &[0.0]).is_err());
    }
}
