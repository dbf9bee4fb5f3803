use iqc_observer::analysis::{hinf_norm, sigma_max_at};
use iqc_observer::linalg::{eye, spectral_abscissa};
use iqc_observer::{Error, Mat, StateSpace};
use proptest::prelude::*;

fn stable_system(n: usize, entries: &[f64], shift: f64) -> StateSpace {
    let mut a = Mat::from_row_slice(n, n, &entries[..n * n]);
    let s = spectral_abscissa(&a).unwrap();
    a -= eye(n) * (s + shift);
    let b = Mat::from_fn(n, 2, |i, j| entries[(i + 3 * j) % entries.len()]);
    let c = Mat::from_fn(2, n, |i, j| entries[(2 * i + j + 5) % entries.len()]);
    StateSpace::new(a, b, c, Mat::from_row_slice(2, 2, &[0.1, 0.0, -0.2, 0.05])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_bounds_every_frequency(
        n in 1usize..6,
        entries in prop::collection::vec(-2.0f64..2.0, 36),
        shift in 0.05f64..1.0,
        w in 0.0f64..50.0,
    ) {
        let sys = stable_system(n, &entries, shift);
        let h = hinf_norm(&sys, 1e-9).unwrap();
        prop_assert!(sigma_max_at(&sys, w).unwrap() <= h * (1.0 + 1e-7));
    }

    #[test]
    fn norm_is_invariant_under_similarity_and_homogeneous(
        n in 1usize..5,
        entries in prop::collection::vec(-2.0f64..2.0, 36),
        t in prop::collection::vec(-1.0f64..1.0, 16),
        k in 0.1f64..10.0,
    ) {
        let sys = stable_system(n, &entries, 0.3);
        let h = hinf_norm(&sys, 1e-10).unwrap();
        let tm = Mat::from_row_slice(n, n, &t[..n * n]) + eye(n) * 3.0;
        let ti = tm.clone().try_inverse().unwrap();
        let similar = StateSpace::new(&ti * &sys.a * &tm, &ti * &sys.b, &sys.c * &tm, sys.d.clone()).unwrap();
        let hs = hinf_norm(&similar, 1e-10).unwrap();
        prop_assert!((h - hs).abs() <= 1e-6 * h.max(1e-12));
        let scaled = StateSpace::new(sys.a.clone(), sys.b.clone(), &sys.c * k, &sys.d * k).unwrap();
        prop_assert!((hinf_norm(&scaled, 1e-10).unwrap() - k * h).abs() <= 1e-6 * k * h);
    }
}

#[test]
fn marginal_system_has_unbounded_norm() {
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
    let sys = StateSpace::new(a, Mat::from_row_slice(2, 1, &[0.0, 1.0]), Mat::from_row_slice(1, 2, &[1.0, 0.0]), Mat::zeros(1, 1))
        .unwrap();
    assert!(matches!(hinf_norm(&sys, 1e-8), Err(Error::UnboundedNorm { .. })));
}

#[test]
fn second_order_resonance_peak() {
    // 1 / (s² + 2ζs + 1): peak 1 / (2ζ√(1 − ζ²))
    let zeta = 0.05;
    let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -2.0 * zeta]);
    let sys = StateSpace::new(a, Mat::from_row_slice(2, 1, &[0.0, 1.0]), Mat::from_row_slice(1, 2, &[1.0, 0.0]), Mat::zeros(1, 1))
        .unwrap();
    let exact = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
    assert!((hinf_norm(&sys, 1e-10).unwrap() - exact).abs() / exact < 1e-8);
}
