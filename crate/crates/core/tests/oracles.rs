//! Cross-checks against independent oracles with frozen values.

use std::f64::consts::PI;

use sheetdev_core::expansion::{build_mspec, h_tables, h_tables_cached};
use sheetdev_core::laplace::{l_exact, vandermonde_log_det};
use sheetdev_core::oracle::{default_counts, h_direct, h_direct_all, mc_laplace, mc_smallball, weight_box, McConfig};
use sheetdev_core::reversion::{correction_sequence, lambert_wm1, lambert_wm1_series, log_x_tilde0, solve_log_x0, x_tilde0};
use sheetdev_core::smallball::{strong_estimate, sytaja_estimate, Mode};
use sheetdev_core::validate::vandermonde_limit;

/// `P(∫W² ≤ ε)` from `√2 Σ_k C(−½,k) erfc((4k+1)/(2√(2ε)))`, mpmath at 30 digits.
const BM_EXACT: [(f64, f64); 2] = [(0.05, 0.035_846_521_843_468_5), (0.1, 0.161_002_978_666_983)];

#[test]
fn monte_carlo_matches_exact_one_dim() {
    let ms = build_mspec(&[0]).unwrap();
    let wb = weight_box(&ms, &default_counts(&ms)).unwrap();
    let cfg = McConfig { samples: 400_000, seed: 11, chunk: 8192 };
    for (eps, p) in BM_EXACT {
        let mc = mc_smallball(eps, &cfg, &wb, None).unwrap();
        assert!((mc.p_hat - p).abs() < 4.0 * mc.stderr, "eps={eps}: {} +- {} vs {p}", mc.p_hat, mc.stderr);
    }
}

/// Gil-Pelaez inversion over a 300 x 300 box plus tail mean (scipy quad).
const SHEET_00_AT_0_1: f64 = 0.240_523_647_881_952_7;

#[test]
fn monte_carlo_matches_inversion_pair() {
    let ms = build_mspec(&[0, 0]).unwrap();
    let wb = weight_box(&ms, &default_counts(&ms)).unwrap();
    let cfg = McConfig { samples: 200_000, seed: 5, chunk: 8192 };
    let mc = mc_smallball(0.1, &cfg, &wb, None).unwrap();
    assert!((mc.p_hat - SHEET_00_AT_0_1).abs() < 4.0 * mc.stderr + 1e-3, "{} +- {}", mc.p_hat, mc.stderr);
}

#[test]
fn monte_carlo_laplace_identity() {
    let ms = build_mspec(&[0, 0]).unwrap();
    let wb = weight_box(&ms, &default_counts(&ms)).unwrap();
    let cfg = McConfig { samples: 20_000, seed: 3, chunk: 2048 };
    for x in [1.0, 10.0] {
        let mc = mc_laplace(x, &cfg, &wb, None).unwrap();
        let h = h_direct(&ms, x, 0).unwrap();
        assert!((mc.h_hat - h).abs() < 5.0 * mc.stderr + 1e-4, "x={x}: {} +- {} vs {h}", mc.h_hat, mc.stderr);
    }
}

#[test]
fn direct_h_approaches_expansion() {
    for m in [&[0][..], &[1], &[0, 0], &[0, 1]] {
        let ms = build_mspec(m).unwrap();
        let t = h_tables_cached(m).unwrap();
        let mut gaps = Vec::new();
        for x in [1e2, 1e4, 1e6] {
            let d = h_direct(&ms, x, 0).unwrap();
            gaps.push((d / t.h_eval(x, 0) - 1.0).abs());
        }
        assert!(gaps[2] < 1e-6, "{m:?}: {gaps:?}");
        assert!(gaps[2] <= gaps[0], "{m:?}: {gaps:?}");
    }
}

#[test]
fn pair_expansion_residual_shrinks_relative_to_sqrt() {
    let ms = build_mspec(&[0, 0]).unwrap();
    let t = h_tables(&ms).unwrap();
    let r: Vec<f64> = [1e4, 1e5, 1e6]
        .iter()
        .map(|&x| (0.5 * sheet_l(&ms, x) - t.h_eval(x / 2.0, 0)).abs() / x.sqrt())
        .collect();
    assert!(r[2] < r[0] && r[2] < 1e-8, "{r:?}");
}

fn sheet_l(ms: &sheetdev_core::expansion::MSpec, x: f64) -> f64 {
    2.0 * h_direct(ms, x / 2.0, 0).unwrap()
}

#[test]
fn tensor_sum_matches_brute_force() {
    let ms = build_mspec(&[0, 1]).unwrap();
    let r = h_direct_all(&ms, 1e3).unwrap();
    let brute: f64 = (1..=4000)
        .map(|n| {
            let k = ((n as f64 - 0.5) * PI).powi(2);
            0.5 * l_exact(1, 2e3 / k)
        })
        .sum::<f64>();
    // first-order tail of the brute sum beyond n = 4000
    let tail = 1e3 * sheetdev_core::spectrum::kernel_trace(1) / (PI * PI * 4000.0);
    assert!((r.h[0] - brute - tail).abs() < 1e-7, "{} vs {}", r.h[0], brute + tail);
}

#[test]
fn strong_two_axis_exponent_structure() {
    // (0, 1): h(x*) − εx* = d1/ε + d2 ε^{−1/2} + d3 + o(1)
    let t = h_tables(&build_mspec(&[0, 1]).unwrap()).unwrap();
    let (c10, c20) = (t.c1[0][0], t.c1[1][0]);
    let d1 = c10 * c10;
    let d2 = 4.0 * c10.sqrt() * c20;
    let d3 = c20 * c20 / c10;
    let mut prev = f64::INFINITY;
    for k in [4, 6, 8, 10] {
        let eps = 10f64.powi(-k);
        let r = correction_sequence(&t, eps, None).unwrap();
        let s = t.h_eval(r.x_star, 0) - eps * r.x_star;
        let rest = (s - d1 / eps - d2 / eps.sqrt() - d3).abs();
        assert!(rest < prev, "eps={eps}: {rest}");
        prev = rest;
    }
    assert!(prev < 1e-5);
}

#[test]
fn strong_prefactor_for_zero_first_axis() {
    // p = (1+o(1)) ε^{1/2}/(c10 √π) exp{−(d1/ε + d2 ε^{−1/2} + d3)}
    let ms = build_mspec(&[0, 1]).unwrap();
    let t = h_tables(&ms).unwrap();
    let (c10, c20) = (t.c1[0][0], t.c1[1][0]);
    let eps: f64 = 1e-8;
    let s = strong_estimate(&ms, eps).unwrap();
    let closed = 0.5 * eps.ln() - (c10 * PI.sqrt()).ln() - (c10 * c10 / eps + 4.0 * c10.sqrt() * c20 / eps.sqrt() + c20 * c20 / c10);
    assert!((s.log_p - closed).abs() < 1e-3, "{} vs {closed}", s.log_p);
}

#[test]
fn vandermonde_ratio_trends_to_limit() {
    let lim = vandermonde_limit().unwrap();
    let gaps: Vec<f64> = [10u32, 40, 200, 1000]
        .iter()
        .map(|&m| (2.0 * vandermonde_log_det(m) / (m as f64).powi(2) / lim - 1.0).abs())
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[3] < 0.02);
}

#[test]
fn lambert_series_lead_term() {
    // (x0/x̃0 − 1) log(1/ε)/loglog(1/ε) → (t−1)²/η for t = 2
    let t = h_tables(&build_mspec(&[0, 0]).unwrap()).unwrap();
    let eta = t.mspec.group(1).eta;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for k in (10..=300).step_by(10) {
        let eps = 10f64.powi(-k);
        let l = (1.0 / eps).ln();
        let ll = l.ln();
        let gap = (solve_log_x0(&t, eps, 1e-15).unwrap() - log_x_tilde0(&t, eps).unwrap()).exp_m1();
        rhs.push(gap * l / ll);
        rows.extend([1.0, 1.0 / ll, ll / l, 1.0 / l]);
    }
    let a = nalgebra::DMatrix::from_row_slice(rhs.len(), 4, &rows);
    let c = a.svd(true, true).solve(&nalgebra::DVector::from_vec(rhs), 1e-14).unwrap();
    assert!((c[0] * eta - 1.0).abs() < 0.02, "fitted lead {} vs {}", c[0], 1.0 / eta);
    let z: f64 = 1e-100;
    let w = lambert_wm1(-z).unwrap();
    let s = lambert_wm1_series(z, 6, 6).unwrap();
    assert!((w - s).abs() < 1e-6 * w.abs());
}

#[test]
fn oracle_mode_agrees_for_pair() {
    let ms = build_mspec(&[0, 0]).unwrap();
    let a = sytaja_estimate(&ms, 1e-3, Mode::SytajaExpansion).unwrap();
    let b = sytaja_estimate(&ms, 1e-3, Mode::SytajaOracle).unwrap();
    assert!((a.log_p / b.log_p - 1.0).abs() < 1e-2);
}

#[test]
fn curvature_input_ratio() {
    // −(x*)² ĥ″(x*) / ((1−ξ₁) x̃₀ ε) → 1
    let t = h_tables(&build_mspec(&[0, 0]).unwrap()).unwrap();
    let xi = t.mspec.group(1).xi;
    let r: Vec<f64> = [1e-3, 1e-6, 1e-12, 1e-24]
        .iter()
        .map(|&eps| {
            let x = correction_sequence(&t, eps, None).unwrap().x_star;
            -x * x * t.h_eval(x, 2) / ((1.0 - xi) * x_tilde0(&t, eps).unwrap() * eps)
        })
        .collect();
    assert!(r.windows(2).all(|w| (w[1] - 1.0).abs() < (w[0] - 1.0).abs()), "{r:?}");
}
