use locball::analysis::bounds::{
    lee_vempala_bound, paouris_bound, projected_paouris_bound, select_subspace, threshold_warning, BoundSpec,
};
use locball::analysis::diagnostics::{borell_ratio, borell_survey, certify_c0, random_directions, subgaussian_norm};
use locball::analysis::estimate::{
    gaussian_small_ball_oracle, normal_cdf, small_ball_estimate, wilson_interval, zero_hit_upper,
};
use locball::analysis::fit::{decay_table, exponent_fit, fit_rows};
use locball::analysis::slicing::{isotropic_constant, slicing_report, square_disc_area, Body, Polytope};
use locball::LogConcaveFamily;
use nalgebra::DVector;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn spec(spectrum: Vec<f64>, b: f64, eps: f64) -> BoundSpec {
    BoundSpec::new(spectrum, b, eps, 1.0).unwrap()
}

#[test]
fn one_dimensional_gaussian_small_ball() {
    let est = small_ball_estimate(&LogConcaveFamily::gaussian(1), &DVector::zeros(1), 0.1, 1_000_000, 1).unwrap();
    let exact = 2.0 * normal_cdf(0.1) - 1.0;
    assert!((exact - 0.0797).abs() < 1e-4);
    assert!(est.covers(exact), "{est:?}");
}

#[test]
fn eight_dimensional_gaussian_small_ball() {
    let n = 8;
    let est = small_ball_estimate(&LogConcaveFamily::gaussian(n), &DVector::zeros(n), 1.6f64.sqrt(), 1_000_000, 2).unwrap();
    let exact = ChiSquared::new(8.0).unwrap().cdf(1.6);
    assert!(est.covers(exact), "{} not in [{}, {}]", exact, est.ci_low, est.ci_high);
}

#[test]
fn oracle_worked_examples() {
    let o = gaussian_small_ball_oracle(10, 0.1).unwrap();
    assert!((o.exact - ChiSquared::new(10.0).unwrap().cdf(1.0)).abs() < 1e-12);
    assert!((o.chernoff - (0.1f64 * 0.9f64.exp()).powi(5)).abs() < 1e-15);
    // Direct arithmetic gives 9.0017e-4, not the rounded 8.9e-4.
    assert!((o.chernoff - 9.0017e-4).abs() < 1e-8);
    assert!(o.exact <= o.chernoff);
    let o = gaussian_small_ball_oracle(2, 0.5).unwrap();
    assert!((o.exact - (1.0 - (-0.5f64).exp())).abs() < 1e-12);
    let o = gaussian_small_ball_oracle(1, 0.9999).unwrap();
    assert!((o.chernoff - 1.0).abs() < 1e-7 && o.exact < 1.0);
}

#[test]
fn zero_hits_report_the_exact_upper_bound() {
    let est = small_ball_estimate(&LogConcaveFamily::uniform_cube(16), &DVector::zeros(16), 0.05, 10_000, 3).unwrap();
    assert_eq!(est.hits, 0);
    assert_eq!(est.ci_low, 0.0);
    assert!((est.ci_high - (1.0 - 0.05f64.powf(1e-4))).abs() < 1e-15);
    assert_eq!(est.ci_high, zero_hit_upper(10_000));
}

#[test]
fn wilson_interval_is_calibrated() {
    let n = 4;
    let exact = gaussian_small_ball_oracle(n, 0.2).unwrap().exact;
    let g = LogConcaveFamily::gaussian(n);
    let covered = (0..100u64)
        .filter(|&s| small_ball_estimate(&g, &DVector::zeros(n), 0.8f64.sqrt(), 10_000, 1000 + s).unwrap().covers(exact))
        .count();
    assert!(covered >= 90, "covered {covered} of 100");
}

#[test]
fn exact_is_below_chernoff_on_the_grid() {
    for n in 1..=64 {
        for k in 1..=99 {
            let o = gaussian_small_ball_oracle(n, k as f64 / 100.0).unwrap();
            assert!(o.exact <= o.chernoff, "n={n} eps={}", k as f64 / 100.0);
        }
    }
}

#[test]
fn paouris_worked_examples() {
    assert!((paouris_bound(&spec(vec![1.0; 10], 1.0, 0.1)).unwrap() - 1e-10).abs() < 1e-22);
    let v = paouris_bound(&spec(vec![4.0, 1.0], 1.0, 0.5)).unwrap();
    assert!((v - 0.5f64.powf(1.25)).abs() < 1e-12 && (v - 0.4204).abs() < 1e-4);
    let w = paouris_bound(&spec(vec![4.0, 1.0], 2.0, 0.5)).unwrap();
    assert!((w - 0.5f64.powf(0.3125)).abs() < 1e-12 && (w - 0.8052).abs() < 1e-4);
    assert!(w > v);
}

#[test]
fn projected_worked_examples() {
    for n in [1usize, 3, 8, 20] {
        let v = projected_paouris_bound(&spec(vec![1.0; n], 1.0, 0.1)).unwrap();
        assert!((v - 0.4f64.powf(n as f64 / 8.0)).abs() < 1e-12);
    }
    let s = vec![4.0, 1.0, 1.0, 1.0, 1.0];
    let v = projected_paouris_bound(&spec(s.clone(), 1.0, 0.01)).unwrap();
    assert!((v - 0.1f64.powf(0.16)).abs() < 1e-12 && (v - 0.6918).abs() < 1e-4);
    let w = projected_paouris_bound(&spec(s, 2.0, 0.01)).unwrap();
    assert!((v.ln() / w.ln() - 4.0).abs() < 1e-12);
}

#[test]
fn lee_vempala_worked_examples() {
    let v = lee_vempala_bound(8, 0.1, 1.0, 1.0).unwrap();
    assert!((v.ln() / 0.1f64.ln() - 8.0 / 8f64.ln()).abs() < 1e-12);
    assert!((v.ln() / 0.1f64.ln() - 3.847).abs() < 1e-3);
    let psi = locball::analysis::klartag_psi_sq(16, 1.0);
    let w = lee_vempala_bound(16, 0.1, 1.0, psi).unwrap();
    assert!((w.ln() / 0.1f64.ln() - 2.081).abs() < 1e-3);
    assert!(lee_vempala_bound(8, 1.0 - 1e-12, 1.0, 1.0).unwrap() > 1.0 - 1e-9);
    assert!(lee_vempala_bound(1, 0.1, 1.0, 1.0).is_err());
}

#[test]
fn subspace_worked_examples() {
    assert_eq!(select_subspace(&[1.0; 4]).unwrap(), 2);
    assert_eq!(select_subspace(&[10.0, 1.0]).unwrap(), 1);
    assert_eq!(select_subspace(&[2.0, 2.0, 1.0]).unwrap(), 1);
}

#[test]
fn threshold_is_flagged_not_enforced() {
    assert!(threshold_warning(0.7).is_some());
    assert!(paouris_bound(&spec(vec![1.0], 1.0, 0.7)).is_ok());
}

#[test]
fn borell_ratio_of_the_gaussian() {
    // (E|Z|⁴)^{1/2} / E Z² = √3
    let g = LogConcaveFamily::gaussian(3);
    let dir = DVector::from_vec(vec![1.0, 1.0, 0.0]);
    let r = borell_ratio(&g, &dir, 4.0, 1_000_000, 1).unwrap();
    assert!((r.value - 3f64.sqrt()).abs() < 4.0 * r.stderr, "{r:?}");
}

#[test]
fn borell_ratio_of_the_laplace_coordinate() {
    // A unit-variance Laplace coordinate has E|Y|^p = Γ(p+1)·2^{-p/2},
    // so the p = 6 ratio is 720^{1/3}/2 ≈ 4.48, above 3.
    let l = LogConcaveFamily::product_laplace(2);
    let r = borell_ratio(&l, &DVector::from_vec(vec![1.0, 0.0]), 6.0, 2_000_000, 2).unwrap();
    let exact = 720f64.cbrt() / 2.0;
    assert!((r.value - exact).abs() < 4.0 * r.stderr, "{r:?} vs {exact}");
    assert!(exact > 3.0);
}

#[test]
fn c0_is_certified_at_p4_on_the_zoo() {
    let cert = certify_c0(3.0, &[2, 4, 8], 100_000, 5).unwrap();
    assert!(cert.pass, "{cert:?}");
}

#[test]
fn borell_survey_shape() {
    let zoo = LogConcaveFamily::zoo(2);
    let rows = borell_survey(&zoo, &[3.0, 4.0], 2, 10_000, 1).unwrap();
    assert_eq!(rows.len(), zoo.len() * 2 * 2);
    assert!(borell_ratio(&zoo[0], &DVector::from_vec(vec![1.0, 0.0]), 1.5, 10, 1).is_err());
}

#[test]
fn random_directions_are_unit() {
    for d in random_directions(5, 10, 3) {
        assert!((d.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn strongly_log_concave_tilts_are_subgaussian() {
    for family in [LogConcaveFamily::uniform_cube(4), LogConcaveFamily::product_laplace(4)] {
        for t in [0.5, 1.0, 4.0] {
            let est = subgaussian_norm(&family, t, &DVector::from_element(4, 0.3), 6, 100_000, 9).unwrap();
            assert!(est.value <= 1.05 / t.sqrt(), "{} t={t}: {est:?}", family.name());
        }
    }
}

/// Exact cube small-ball probability while the ball stays inside the cube.
fn cube_small_ball(n: usize, r2: f64) -> f64 {
    let half = n as f64 / 2.0;
    assert!(r2 <= 3.0);
    (half * (std::f64::consts::PI * r2 / 12.0).ln() - statrs::function::gamma::ln_gamma(half + 1.0)).exp()
}

#[test]
fn cube_decay_is_not_a_pure_power_of_epsilon() {
    // Exact probabilities at ε = 0.1 over n ∈ {2,4,8,16}: the per-n exponent
    // drifts from 0.64 to 0.48, so the through-origin fit misses by 0.58 in
    // log units even with no sampling noise.
    let table: Vec<_> = [2usize, 4, 8, 16].iter().map(|&n| (n, 0.1, cube_small_ball(n, 0.1 * n as f64))).collect();
    let fit = exponent_fit(&table).unwrap();
    assert!((fit.fitted_c - 0.4895).abs() < 1e-4, "{fit:?}");
    assert!((fit.residual - 0.5833).abs() < 1e-4, "{fit:?}");
    // Without the n = 16 cell, which sees about 0.23 hits in 10⁷ samples.
    let fit = exponent_fit(&table[..3]).unwrap();
    assert!((fit.residual - 0.3970).abs() < 1e-4, "{fit:?}");
}

#[test]
fn decay_fit_at_a_fixed_epsilon() {
    let dims = [2, 4, 8, 16];
    let cube = decay_table(|n| Ok(LogConcaveFamily::uniform_cube(n)), &dims, &[0.1], 10_000_000, 4).unwrap();
    let fit = exponent_fit(&fit_rows(&cube)).unwrap();
    assert!(fit.fitted_c >= 0.2, "{fit:?}");
    for (n, c) in fit.per_n.iter().filter(|(n, _)| *n <= 8) {
        let exact = cube_small_ball(*n, 0.1 * *n as f64).ln() / (*n as f64 * 0.1f64.ln());
        assert!((c - exact).abs() < 0.01, "n={n}: {c} vs {exact}");
    }
    let laplace = decay_table(|n| Ok(LogConcaveFamily::product_laplace(n)), &dims, &[0.1], 10_000_000, 4).unwrap();
    let fit = exponent_fit(&fit_rows(&laplace)).unwrap();
    assert!(fit.fitted_c >= 0.2 && fit.residual <= 0.5, "{fit:?}");
}

#[test]
fn isotropic_constants_of_named_bodies() {
    let cube = isotropic_constant(&Body::Cube, 7, 0, 0.05, 0).unwrap();
    assert!((cube.l_k - 1.0 / 12f64.sqrt()).abs() < 1e-6);
    assert!((cube.l_f - cube.l_k).abs() < 1e-6);
    let ball = isotropic_constant(&Body::Ball, 2, 0, 0.05, 0).unwrap();
    assert!((ball.l_k - 0.5 / std::f64::consts::PI.sqrt()).abs() < 1e-6);
    assert!((ball.l_f - ball.l_k).abs() < 1e-6);
}

#[test]
fn polytope_matches_the_exact_simplex() {
    let exact = isotropic_constant(&Body::Simplex, 3, 0, 0.05, 0).unwrap();
    let poly = Polytope::simplex(3).unwrap();
    assert_eq!(poly.facet_count(), 4);
    let mc = isotropic_constant(&Body::Polytope(poly), 3, 1_000_000, 0.05, 4).unwrap();
    assert!((mc.l_k - exact.l_k).abs() < 3.0 * mc.stderr, "{mc:?} vs {}", exact.l_k);
}

#[test]
fn square_disc_area_limits() {
    assert!((square_disc_area(0.5, 0.3) - std::f64::consts::PI * 0.09).abs() < 1e-12);
    assert!((square_disc_area(0.5, 1.0) - 1.0).abs() < 1e-12);
    // r = 1/√2 touches the corners.
    assert!((square_disc_area(0.5, 0.5f64.sqrt()) - 1.0).abs() < 1e-12);
}

#[test]
fn slicing_of_the_square() {
    let r = slicing_report(&Body::Cube, 2, &[0.1, 0.5, 1.0, 3.0], 1_000_000, std::f64::consts::E, 0.05, 3).unwrap();
    assert!(r.monotone);
    for row in &r.rows {
        let exact = square_disc_area(0.5, row.radius);
        let slack = 3.0 * row.volume_stderr;
        assert!((row.volume - exact).abs() <= slack.max(1e-12), "eps={}: {} vs {exact}", row.epsilon, row.volume);
    }
    assert_eq!(r.rows.last().unwrap().volume, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let hits = ((n as f64) * frac).floor() as u64;
        let (lo, hi) = wilson_interval(hits, n);
        let p = hits as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-15 && p <= hi + 1e-15 && hi <= 1.0);
    }

    #[test]
    fn subspace_postcondition(mut s in prop::collection::vec(1e-6f64..100.0, 1..40)) {
        s.sort_by(|a, b| b.total_cmp(a));
        let k = select_subspace(&s).unwrap();
        let n = s.len() as f64;
        prop_assert!(k >= 1 && k <= s.len());
        prop_assert!(s[k - 1] >= s.iter().sum::<f64>() / (2.0 * n));
    }

    #[test]
    fn projected_bound_is_nondecreasing_in_epsilon(
        mut s in prop::collection::vec(0.1f64..10.0, 1..12),
        b in 0.5f64..3.0,
        u in 0.01f64..0.99,
        v in 0.01f64..0.99,
    ) {
        s.sort_by(|a, b| b.total_cmp(a));
        let n = s.len() as f64;
        let cap = (s.iter().sum::<f64>() / (4.0 * n * s[0])).min(0.999);
        let (e1, e2) = (u.min(v) * cap, u.max(v) * cap);
        let lo = projected_paouris_bound(&spec(s.clone(), b, e1)).unwrap();
        let hi = projected_paouris_bound(&spec(s, b, e2)).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-12));
    }

    #[test]
    fn exponent_fit_recovers_planted_exponents(c in 0.01f64..3.0, dims in prop::collection::vec(1usize..32, 1..5)) {
        let mut table = Vec::new();
        for &n in &dims {
            for eps in [0.05, 0.1, 0.2, 0.5] {
                let p = (c * n as f64 * f64::ln(eps)).exp();
                if p > 0.0 {
                    table.push((n, eps, p));
                }
            }
        }
        let fit = exponent_fit(&table).unwrap();
        prop_assert!((fit.fitted_c - c).abs() < 1e-12 * c.max(1.0));
        prop_assert!(fit.residual < 1e-12);
    }
}
