use num_complex::Complex64 as C64;
use proptest::prelude::*;

use sheetdev_core::expansion::{build_mspec, h_tables_cached};
use sheetdev_core::laplace::l_exact_derivs;
use sheetdev_core::mellin::{fundamental_strip, k_series, l_star};
use sheetdev_core::oracle::{h_direct_all, mc_smallball, weight_box, McConfig};
use sheetdev_core::reversion::{correction_sequence, x_tilde0, RESIDUAL_TARGET};
use sheetdev_core::smallball::{sytaja_estimate, Mode};
use sheetdev_core::spectrum::{eigen_table, kappa_hat};

const SPECS: [&[u32]; 5] = [&[0], &[1], &[0, 0], &[0, 1], &[0, 0, 0]];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplace_is_increasing_and_concave(m in 0u32..5, lx in -2.0f64..8.0) {
        let d = l_exact_derivs(m, 10f64.powf(lx));
        prop_assert!(d[0] > 0.0 && d[1] > 0.0 && d[2] < 0.0);
    }

    #[test]
    fn separation_identity_in_strip(m in 0u32..3, frac in 0.2f64..0.8, im in -2.0f64..2.0) {
        let (lo, hi) = fundamental_strip(m);
        let s = C64::new(lo + frac * (hi - lo), im);
        let lhs = l_star(m, s, 0).unwrap().value * s * (std::f64::consts::PI * s).sin() / std::f64::consts::PI;
        let rhs = k_series(m, s).unwrap().value;
        prop_assert!((lhs - rhs).norm() < 1e-8, "s={} {} {}", s, lhs, rhs);
    }

    #[test]
    fn seed_gap_shrinks(m in 1u32..4) {
        let t = eigen_table(m, 10, true).unwrap();
        let rel: Vec<f64> = t.entries.iter().map(|e| (e.kappa / kappa_hat(e.n, m) - 1.0).abs()).collect();
        prop_assert!(rel.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn seed_decreases_in_eps(i in 0usize..5, le in -6.0f64..-1.0) {
        let t = h_tables_cached(SPECS[i]).unwrap();
        let eps = 10f64.powf(le);
        prop_assert!(x_tilde0(&t, eps).unwrap() > x_tilde0(&t, eps * 1.01).unwrap());
    }

    #[test]
    fn reversion_reaches_target(i in 0usize..5, le in -4.0f64..-2.0) {
        let t = h_tables_cached(SPECS[i]).unwrap();
        let r = correction_sequence(&t, 10f64.powf(le), None).unwrap();
        prop_assert!(r.rel_residual < RESIDUAL_TARGET);
        let yplus: f64 = 1.0 + r.ys.iter().sum::<f64>();
        prop_assert!((r.x_star / (r.x0 * yplus) - 1.0).abs() < 1e-12 || r.newton_polish.is_some());
        if t.mspec.g() == 1 {
            prop_assert!(r.ys.is_empty() && r.x_star == r.x0);
        }
    }

    #[test]
    fn probability_sane_and_monotone(i in 0usize..4, le in -4.0f64..-2.0) {
        let ms = build_mspec(SPECS[i]).unwrap();
        let eps = 10f64.powf(le);
        let a = sytaja_estimate(&ms, eps, Mode::SytajaExpansion).unwrap();
        let b = sytaja_estimate(&ms, eps * 1.1, Mode::SytajaExpansion).unwrap();
        prop_assert!(a.log_p < 0.0 && a.log_p < b.log_p);
        prop_assert!(a.p >= 0.0 && a.p < 1.0);
    }

    #[test]
    fn direct_h_signs(i in 0usize..5, lx in -1.0f64..5.0) {
        let ms = build_mspec(SPECS[i]).unwrap();
        let h = h_direct_all(&ms, 10f64.powf(lx)).unwrap().h;
        prop_assert!(h[0] > 0.0 && h[1] > 0.0 && h[2] < 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn monte_carlo_independent_of_workers(seed in any::<u64>(), chunk in 100u64..5000) {
        let ms = build_mspec(&[0, 0]).unwrap();
        let wb = weight_box(&ms, &[12, 12]).unwrap();
        let cfg = McConfig { samples: 10_000, seed, chunk };
        let a = mc_smallball(0.15, &cfg, &wb, Some(1)).unwrap();
        let b = mc_smallball(0.15, &McConfig { chunk: 1024, ..cfg }, &wb, Some(4)).unwrap();
        prop_assert_eq!(a.hits, b.hits);
    }
}

#[test]
fn pair_dominates_single() {
    for eps in [1e-2, 1e-3] {
        let one = sytaja_estimate(&build_mspec(&[0]).unwrap(), eps, Mode::SytajaExpansion).unwrap();
        let two = sytaja_estimate(&build_mspec(&[0, 0]).unwrap(), eps, Mode::SytajaExpansion).unwrap();
        assert!(-two.log_p > -one.log_p);
    }
}
