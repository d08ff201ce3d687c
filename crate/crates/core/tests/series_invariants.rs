use anderson_corr::cauchy1::{i_n, HalfPlaneSign};
use anderson_corr::densities::AnalyticDensity;
use anderson_corr::expansion::{dos_series, green_series, radius_a0, BoundMode, ExpansionConfig};
use anderson_corr::{Complex64, Error};
use proptest::prelude::*;

fn gauss() -> AnalyticDensity {
    AnalyticDensity::gaussian(1.0, 1.0).unwrap()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schwarz_reflection(d in 1usize..=2, lambda in -0.2f64..0.2, re in -3.0f64..3.0, im in 0.2f64..2.0) {
        let cfg = ExpansionConfig::dos(d, lambda, 4, gauss());
        let z = Complex64::new(re, im);
        let up = green_series(&cfg, &[z]).unwrap().value;
        let down = green_series(&cfg, &[z.conj()]).unwrap().value;
        prop_assert!((up.conj() - down).norm() <= 1e-12 * up.norm().max(1.0));
    }

    #[test]
    fn partial_sums_end_at_value(lambda in -0.1f64..0.1, e in -2.5f64..2.5) {
        let cfg = ExpansionConfig::dos(1, lambda, 6, gauss());
        let s = dos_series(&cfg, HalfPlaneSign::Plus, e).unwrap();
        prop_assert_eq!(s.partial_sums.len(), 7);
        prop_assert_eq!(*s.partial_sums.last().unwrap(), s.value);
        for w in s.tail_bounds.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn weak_coupling_dos_is_nonnegative(lambda in 0.0f64..0.02, e in -3.0f64..3.0) {
        let cfg = ExpansionConfig::dos(1, lambda, 4, gauss());
        let s = dos_series(&cfg, HalfPlaneSign::Plus, e).unwrap();
        prop_assert!(s.dos() >= -s.tail_bound / std::f64::consts::PI);
    }

    #[test]
    fn green_at_zero_coupling_is_i0(re in -3.0f64..3.0, im in 0.1f64..2.0) {
        let g = gauss();
        let z = Complex64::new(re, im);
        let s = green_series(&ExpansionConfig::dos(2, 0.0, 4, g.clone()), &[z]).unwrap();
        prop_assert!((s.value - i_n(&g, 0, z).unwrap()).norm() <= 1e-12);
    }
}

#[test]
fn result_is_independent_of_thread_count() {
    let cfg = ExpansionConfig::dos(2, 0.07, 6, gauss());
    let one = in_pool(1, || dos_series(&cfg, HalfPlaneSign::Plus, 0.3).unwrap());
    let four = in_pool(4, || dos_series(&cfg, HalfPlaneSign::Plus, 0.3).unwrap());
    assert_eq!(one.value, four.value);
    assert_eq!(one.partial_sums, four.partial_sums);
}

#[test]
fn certified_mode_rejects_large_coupling() {
    let base = ExpansionConfig::dos(1, 0.0, 4, gauss());
    let a0 = radius_a0(&base).unwrap();
    let cfg = ExpansionConfig { lambda: 2.0 / a0, ..base.clone() }.with_mode(BoundMode::Certified);
    assert!(matches!(dos_series(&cfg, HalfPlaneSign::Plus, 0.0), Err(Error::RadiusViolation(_))));
    let loose = ExpansionConfig { lambda: 2.0 / a0, ..base };
    assert!(dos_series(&loose, HalfPlaneSign::Plus, 0.0).unwrap().tail_bound.is_infinite());
}

#[test]
fn cauchy_density_has_no_dos_series() {
    let cfg = ExpansionConfig::dos(1, 0.01, 2, AnalyticDensity::cauchy(1.0, 0.5).unwrap());
    assert!(dos_series(&cfg, HalfPlaneSign::Plus, 0.0).is_err());
}
