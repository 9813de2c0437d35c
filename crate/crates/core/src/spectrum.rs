//! Reciprocal eigenvalues `κ_n(m)` of the one-dimensional covariance
//! operators.
//!
//! For m = 0 they are `((n−½)π)²`. For m ≥ 1 they are the zeros of
//! `x ↦ det N(−x)`, located in the variable `t = κ^{1/(2m+2)}` where the
//! characteristic function is smooth and its roots approach `(n−½)π`.

use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::laplace;

pub const DEFAULT_TOL: f64 = 1e-12;

const SCAN_STEP: f64 = PI / 64.0;
/// Below this t every root is located by scanning for sign changes.
const SCAN_ONLY_BELOW: f64 = 16.0 * PI;
const CALIBRATION_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Refined,
    Seed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub n: usize,
    pub kappa: f64,
    pub method: Method,
    pub err_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenTable {
    pub m: u32,
    pub entries: Vec<Eigenvalue>,
}

impl EigenTable {
    pub fn kappas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.kappa).collect()
    }
}

pub fn kappa_hat(n: usize, m: u32) -> f64 {
    ((n as f64 - 0.5) * PI).powi(2 * m as i32 + 2)
}

#[derive(Debug, Clone, Copy)]
struct Root {
    t: f64,
    step: f64,
    residual: f64,
}

#[derive(Debug, Default)]
struct RootState {
    roots: Vec<Root>,
    scanned_to: f64,
    calibration: Option<f64>,
}

fn states() -> &'static Mutex<HashMap<u32, RootState>> {
    static S: OnceLock<Mutex<HashMap<u32, RootState>>> = OnceLock::new();
    S.get_or_init(|| Mutex::new(HashMap::new()))
}

fn g(k: &laplace::Kernel, t: f64) -> f64 {
    k.char_scaled(t).re
}

/// Bisection to 1e-3 relative width, then Newton with a differenced
/// derivative kept inside the bracket.
fn refine(k: &laplace::Kernel, mut a: f64, mut b: f64) -> Result<Root> {
    let mut ga = g(k, a);
    let gb = g(k, b);
    if ga == 0.0 {
        return Ok(Root { t: a, step: 0.0, residual: 0.0 });
    }
    if gb == 0.0 {
        return Ok(Root { t: b, step: 0.0, residual: 0.0 });
    }
    debug_assert!(ga * gb < 0.0);
    while b - a > 1e-3 * a {
        let c = 0.5 * (a + b);
        let gc = g(k, c);
        if gc == 0.0 {
            return Ok(Root { t: c, step: 0.0, residual: 0.0 });
        }
        if (gc < 0.0) == (ga < 0.0) {
            a = c;
            ga = gc;
        } else {
            b = c;
        }
    }
    let mut t = 0.5 * (a + b);
    let mut gt = g(k, t);
    let mut step = b - a;
    for _ in 0..100 {
        if gt == 0.0 {
            break;
        }
        // t becomes a bracket end, so a bisection fallback always moves
        if (gt < 0.0) == (ga < 0.0) {
            a = t;
        } else {
            b = t;
        }
        let h = 1e-7 * t;
        let d = (g(k, t + h) - g(k, t - h)) / (2.0 * h);
        let newton = t - gt / d;
        let next = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
        step = (next - t).abs();
        t = next;
        gt = g(k, t);
        if step <= 2e-16 * t || b - a <= 4e-16 * t {
            break;
        }
    }
    Ok(Root { t, step, residual: gt.abs() })
}

fn extend(m: u32, st: &mut RootState, n: usize) -> Result<()> {
    let k = laplace::kernel(m);
    while st.roots.len() < n {
        let idx = st.roots.len() + 1;
        let last_ok = st.roots.last().map(|r| (r.t / ((idx as f64 - 1.5) * PI) - 1.0).abs() < 1e-8).unwrap_or(false);
        if st.scanned_to >= SCAN_ONLY_BELOW && last_ok {
            // interlacing: the idx-th root lies in ((idx−1)π, idx·π)
            let (a, b) = ((idx as f64 - 1.0) * PI, idx as f64 * PI);
            let (ga, gb) = (g(&k, a), g(&k, b));
            if a >= st.scanned_to - 1e-12 && ga * gb < 0.0 {
                let r = refine(&k, a, b)?;
                st.roots.push(r);
                st.scanned_to = b;
                continue;
            }
        }
        let limit = (idx as f64 + 2.0) * PI;
        let mut t0 = st.scanned_to;
        let mut g0 = if t0 == 0.0 { 1.0 } else { g(&k, t0) };
        let mut found = false;
        while t0 < limit {
            let t1 = t0 + SCAN_STEP;
            let g1 = g(&k, t1);
            if g0 == 0.0 || g0 * g1 < 0.0 {
                let r = refine(&k, t0, t1)?;
                st.roots.push(r);
                st.scanned_to = t1;
                found = true;
                break;
            }
            t0 = t1;
            g0 = g1;
        }
        if !found {
            return Err(Error::Bracket { m, n: idx, lo: st.scanned_to, hi: limit });
        }
    }
    Ok(())
}

fn with_roots<T>(m: u32, n: usize, f: impl FnOnce(&mut RootState) -> T) -> Result<T> {
    let mut guard = states().lock().unwrap();
    let st = guard.entry(m).or_default();
    extend(m, st, n)?;
    Ok(f(st))
}

fn envelope_rate(m: u32) -> f64 {
    PI * (PI / (m as f64 + 1.0)).sin()
}

/// Constant of the seed-error envelope `C κ̂_n n^{−1} e^{−π sin(π/(m+1)) n}`,
/// set to twice the largest scaled deviation seen among the first refined roots.
pub fn envelope_constant(m: u32) -> Result<f64> {
    if m == 0 {
        return Ok(0.0);
    }
    if let Some(c) = states().lock().unwrap().get(&m).and_then(|s| s.calibration) {
        return Ok(c);
    }
    let rate = envelope_rate(m);
    let c = with_roots(m, CALIBRATION_N, |st| {
        let p = 2 * m as i32 + 2;
        let mut c: f64 = 0.0;
        for (i, r) in st.roots.iter().take(CALIBRATION_N).enumerate() {
            let n = i + 1;
            let dev = (r.t.powi(p) / kappa_hat(n, m) - 1.0).abs();
            // deviations near rounding level say nothing about the rate
            if dev > 1e-11 {
                c = c.max(dev * n as f64 * (rate * n as f64).exp());
            }
        }
        2.0 * c
    })?;
    states().lock().unwrap().entry(m).or_default().calibration = Some(c);
    Ok(c)
}

pub fn seed_err_bound(n: usize, m: u32) -> Result<f64> {
    let c = envelope_constant(m)?;
    Ok(c * kappa_hat(n, m) * (-envelope_rate(m) * n as f64).exp() / n as f64)
}

pub fn kappa(n: usize, m: u32, refine: bool, tol: f64) -> Result<Eigenvalue> {
    if n == 0 {
        return Err(Error::InvalidInput("eigenvalue index n starts at 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    if m == 0 {
        return Ok(Eigenvalue { n, kappa: kappa_hat(n, 0), method: Method::Exact, err_bound: 0.0 });
    }
    if !refine {
        return Ok(Eigenvalue { n, kappa: kappa_hat(n, m), method: Method::Seed, err_bound: seed_err_bound(n, m)? });
    }
    let r = with_roots(m, n, |st| st.roots[n - 1])?;
    if r.residual >= tol && r.step > 1e-14 * r.t {
        return Err(Error::NoConvergence { what: "eigenvalue refinement", iters: 60, residual: r.residual });
    }
    let p = 2 * m as i32 + 2;
    let kappa = r.t.powi(p);
    let rel = (r.step / r.t).max(4.0 * f64::EPSILON);
    Ok(Eigenvalue { n, kappa, method: Method::Refined, err_bound: p as f64 * rel * kappa })
}

pub fn eigen_table(m: u32, count: usize, refine: bool) -> Result<EigenTable> {
    if count == 0 {
        return Err(Error::InvalidInput("eigen_table needs N >= 1".into()));
    }
    let entries = (1..=count).map(|n| kappa(n, m, refine, DEFAULT_TOL)).collect::<Result<Vec<_>>>()?;
    for w in entries.windows(2) {
        if !(w[1].kappa > w[0].kappa) {
            return Err(Error::Bracket { m, n: w[1].n, lo: w[0].kappa, hi: w[1].kappa });
        }
    }
    Ok(EigenTable { m, entries })
}

/// `κ_n` with refined values up to `refined` and seeds beyond; the layout
/// used by the series oracles.
pub fn mixed_kappas(m: u32, count: usize, refined: usize) -> Result<Vec<f64>> {
    (1..=count)
        .map(|n| {
            if m == 0 || n > refined {
                Ok(kappa_hat(n, m))
            } else {
                kappa(n, m, true, DEFAULT_TOL).map(|e| e.kappa)
            }
        })
        .collect()
}

/// Covariance-kernel trace `Σ_n 1/κ_n(m) = 1/((2m+1)(2m+2)(m!)²)`.
pub fn kernel_trace(m: u32) -> f64 {
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    1.0 / ((2 * m + 1) as f64 * (2 * m + 2) as f64 * fact * fact)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First roots of cos t cosh t + 1 = 0 by plain bisection.
    fn beam_root(lo: f64, hi: f64) -> f64 {
        let f = |t: f64| t.cos() * t.cosh() + 1.0;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if (f(c) < 0.0) == (f(a) < 0.0) {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn seeds() {
        assert!((kappa_hat(1, 0) - 2.467_401_100_272_339_5).abs() < 1e-15);
        assert!((kappa_hat(1, 1) - 6.088_068_189_625_151).abs() < 1e-12);
        assert!((kappa_hat(2, 1) - 493.133_523_359_637_25).abs() < 1e-9);
        // (π/2)^12 = 225.65…
        assert!((kappa_hat(1, 5) - 225.651_655_645_354_9).abs() < 1e-11);
    }

    #[test]
    fn m1_matches_beam_equation() {
        for (n, lo, hi) in [(1, 1.0, 3.0), (2, 4.0, 5.0), (3, 7.0, 8.0), (6, 17.0, 18.0)] {
            let t = beam_root(lo, hi);
            let e = kappa(n, 1, true, 1e-10).unwrap();
            assert_eq!(e.method, Method::Refined);
            assert!((e.kappa / t.powi(4) - 1.0).abs() < 1e-13, "n={n}: {} vs {}", e.kappa, t.powi(4));
        }
        assert!((kappa(1, 1, true, 1e-10).unwrap().kappa - 12.362_363_368_326_19).abs() < 1e-10);
        assert!((kappa(2, 1, true, 1e-10).unwrap().kappa - 485.518_818_513_371).abs() < 1e-7);
    }

    #[test]
    fn m0_is_exact() {
        for n in 1..50 {
            let e = kappa(n, 0, true, 1e-12).unwrap();
            assert_eq!(e.method, Method::Exact);
            assert_eq!(e.kappa, kappa_hat(n, 0));
            assert_eq!(e.err_bound, 0.0);
        }
    }

    #[test]
    fn m1_deviation_decreases() {
        // |κ_1 − κ̂_1| = 6.27 < |κ_2 − κ̂_2| = 7.61, so the absolute sequence
        // only decreases from n = 2 on; the relative one decreases throughout
        let mut prev_abs = f64::INFINITY;
        let mut prev_rel = f64::INFINITY;
        for n in 1..=10 {
            let hat = kappa_hat(n, 1);
            let d = (kappa(n, 1, true, 1e-12).unwrap().kappa - hat).abs();
            assert!(d / hat < prev_rel, "n={n}");
            if n >= 3 {
                assert!(d < prev_abs, "n={n}: {d} !< {prev_abs}");
            }
            if n >= 3 {
                assert!(d < 1e-3 * hat);
            }
            prev_abs = d;
            prev_rel = d / hat;
        }
    }

    #[test]
    fn seed_bound_covers_refined_roots() {
        for m in 1..=4u32 {
            for n in 1..=30 {
                let r = kappa(n, m, true, 1e-10).unwrap().kappa;
                let b = seed_err_bound(n, m).unwrap();
                let noise = 64.0 * f64::EPSILON * r;
                assert!((r - kappa_hat(n, m)).abs() <= b + noise, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn tables_are_increasing() {
        for m in 0..=5u32 {
            let t = eigen_table(m, 25, true).unwrap();
            assert!(t.entries.windows(2).all(|w| w[1].kappa > w[0].kappa));
        }
        let t = eigen_table(0, 3, false).unwrap();
        assert!((t.entries[2].kappa - 61.685_027_506_808_49).abs() < 1e-12);
    }

    #[test]
    fn characteristic_function_is_real_on_negative_axis() {
        for m in 1..=4u32 {
            let k = laplace::kernel(m);
            for t in [0.7, 2.3, 5.1, 11.9] {
                let z = k.char_scaled(t);
                assert!(z.im.abs() < 1e-12 * z.norm().max(1e-3), "m={m} t={t}: {z}");
            }
        }
    }

    #[test]
    fn bad_input() {
        assert!(kappa(0, 1, true, 1e-10).is_err());
        assert!(kappa(1, 1, true, 0.0).is_err());
    }
}
