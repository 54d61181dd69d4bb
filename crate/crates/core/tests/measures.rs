use locball::measures::empirical_moments;
use locball::{KindTag, LogConcaveFamily};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn tags() -> impl Strategy<Value = KindTag> {
    prop::sample::select(KindTag::BASE.to_vec())
}

#[test]
fn zoo_is_isotropic() {
    for n in [2, 5] {
        for family in LogConcaveFamily::zoo(n) {
            let m = family.exact_moments().expect("base families have exact moments");
            assert!(m.mean.amax() < 1e-12, "{}", family.name());
            assert!((m.covariance - DMatrix::identity(n, n)).amax() < 1e-12, "{}", family.name());
        }
    }
}

#[test]
fn samples_match_exact_moments() {
    let n = 3;
    let count = 400_000;
    for family in LogConcaveFamily::zoo(n) {
        let m = empirical_moments(&family.sample(count, 21).unwrap());
        // Fourth moments of the zoo are at most 6, so entries have stderr below 3/√count.
        let slack = 4.0 * 3.0 / (count as f64).sqrt();
        assert!(m.mean.amax() < slack, "{} mean {}", family.name(), m.mean);
        assert!((m.covariance - DMatrix::identity(n, n)).amax() < slack, "{}", family.name());
    }
}

#[test]
fn samples_do_not_depend_on_worker_count() {
    let family = LogConcaveFamily::uniform_simplex(4);
    let draw = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| family.sample(20_000, 99).unwrap())
    };
    assert_eq!(draw(1).as_slice(), draw(3).as_slice());
}

#[test]
fn unknown_kind_is_rejected() {
    assert!(KindTag::parse("cauchy").is_none());
}

#[test]
fn affine_image_moves_moments() {
    let base = LogConcaveFamily::uniform_cube(2);
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 1.0]);
    let shift = DVector::from_vec(vec![1.0, -1.0]);
    let f = LogConcaveFamily::affine(&base, m.clone(), shift.clone()).unwrap();
    let mom = f.exact_moments().unwrap();
    assert!((mom.mean - shift).amax() < 1e-12);
    assert!((mom.covariance - &m * m.transpose()).amax() < 1e-12);
}

#[test]
fn gaussian_normalized_density_at_origin() {
    let g = LogConcaveFamily::gaussian(3);
    let expected = -1.5 * (2.0 * std::f64::consts::PI).ln();
    assert!((g.log_density_normalized(&[0.0; 3]).unwrap() - expected).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn samples_lie_in_support(tag in tags(), n in 1usize..6, seed in any::<u64>()) {
        let family = LogConcaveFamily::from_tag(tag, n).unwrap();
        let pts = family.sample(256, seed).unwrap();
        prop_assert_eq!(pts.len(), 256);
        for x in pts.rows() {
            prop_assert!(family.log_density(x).unwrap().is_finite());
            if let Some(r) = family.support_radius() {
                prop_assert!(x.iter().map(|v| v * v).sum::<f64>().sqrt() <= r * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sampling_is_a_function_of_the_seed(tag in tags(), n in 1usize..5, seed in any::<u64>()) {
        let family = LogConcaveFamily::from_tag(tag, n).unwrap();
        let (a, b) = (family.sample(100, seed).unwrap(), family.sample(100, seed).unwrap());
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn symmetrized_family_is_symmetric(tag in tags(), n in 1usize..5) {
        let family = LogConcaveFamily::from_tag(tag, n).unwrap();
        let sym = LogConcaveFamily::symmetrized(&family);
        prop_assert!(sym.is_symmetric());
    }

    #[test]
    fn log_density_is_midpoint_concave(tag in tags(), seed in any::<u64>()) {
        let family = LogConcaveFamily::from_tag(tag, 3).unwrap();
        let pts = family.sample(2, seed).unwrap();
        let (x, y) = (pts.row(0), pts.row(1));
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = family.log_density(&mid).unwrap();
        let rhs = 0.5 * (family.log_density(x).unwrap() + family.log_density(y).unwrap());
        prop_assert!(lhs >= rhs - 1e-9);
    }
}
