//! Mellin transforms of `L_m`, the analytic part `A_m`, and the Dirichlet
//! series `K_m(s) = Σ κ_n(m)^s`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::laplace::{self, Kernel};
use crate::quad::{self, QuadResult};
use crate::special::hurwitz_zeta;
use crate::spectrum;

pub use crate::special::zeta;

const QUAD_REL: f64 = 1e-13;
const QUAD_ABS: f64 = 1e-16;
/// `A_m` is not evaluated closer than this to its pole at 0.
pub const A_POLE_GUARD: f64 = 1e-3;
/// `K_m` is rejected this close to its pole at `−1/(2m+2)`.
pub const K_POLE_GUARD: f64 = 1e-6;
const K_REMAINDER_TOL: f64 = 1e-14;
const K_REMAINDER_MAX: usize = 200;
const K_DIRECT_REFINED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MellinPath {
    Quadrature,
    Continuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DirichletPath {
    DirectSum,
    ZetaContinuation,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StripPoint {
    pub re: f64,
    pub im: f64,
    pub m: u32,
    pub in_fundamental_strip: bool,
}

impl StripPoint {
    pub fn new(m: u32, s: C64) -> StripPoint {
        let (lo, hi) = fundamental_strip(m);
        StripPoint { re: s.re, im: s.im, m, in_fundamental_strip: s.re > lo && s.re < hi }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MellinValue {
    #[serde(serialize_with = "ser_c64")]
    pub value: C64,
    pub err_est: f64,
    pub path: MellinPath,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DirichletEval {
    pub m: u32,
    #[serde(serialize_with = "ser_c64")]
    pub s: C64,
    #[serde(serialize_with = "ser_c64")]
    pub value: C64,
    pub path: DirichletPath,
}

fn ser_c64<S: serde::Serializer>(z: &C64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = ser.serialize_struct("complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

/// `⟨−1, −1/(2m+2)⟩`.
pub fn fundamental_strip(m: u32) -> (f64, f64) {
    (-1.0, -1.0 / (2.0 * m as f64 + 2.0))
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `∂^k_s c/(s − a) = (−1)^k k! c / (s − a)^{k+1}`.
fn pole_derivative(c: f64, s: C64, a: f64, k: u32) -> C64 {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    (sign * factorial(k) * c) / (s - a).powu(k + 1)
}

fn log_weight(lx: f64, k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        lx.powi(k as i32)
    }
}

/// `∫_0^1 L_m(x) x^{s−1} (log x)^k dx`.
fn integral_unit(kern: &Kernel, s: C64, k: u32) -> Result<QuadResult> {
    quad::tanh_sinh_unit(
        |x| {
            let lx = x.ln();
            let l = kern.l_derivs(x, false)[0];
            ((s - 1.0) * lx).exp() * (l * log_weight(lx, k))
        },
        QUAD_REL,
        QUAD_ABS,
    )
}

/// `∫_1^∞ r_m(x) x^{s−1} (log x)^k dx` in the variable `u = x^{1/(2m+2)}`,
/// on Gauss-Legendre panels until the exponential envelope has taken over.
fn integral_remainder(kern: &Kernel, s: C64, k: u32) -> Result<QuadResult> {
    let p = kern.p as f64;
    let width = 2.0 / kern.decay;
    let u_peak = ((p * s.re - 1.0 + k as f64) / kern.decay).max(1.0);
    let u_max = 745.0 / kern.decay + u_peak;
    let mut f = |u: f64| -> C64 {
        let lu = u.ln();
        let x = u.powf(p);
        let r = kern.remainder(x);
        if r == 0.0 {
            return C64::new(0.0, 0.0);
        }
        ((p * s - 1.0) * lu).exp() * (p * r * log_weight(p * lu, k))
    };
    let mut sum = C64::new(0.0, 0.0);
    let mut a = 1.0;
    let mut evals = 0;
    let mut last = f64::INFINITY;
    while a < u_max {
        let b = a + width;
        let v = quad::gl_panel(&mut f, a, b);
        evals += quad::GL_ORDER;
        sum += v;
        last = v.norm();
        a = b;
        if a > u_peak && last <= 1e-18 * sum.norm() {
            break;
        }
    }
    // each panel spans two e-folds of the envelope, so the geometric tail of
    // what was dropped is bounded by the last panel
    Ok(QuadResult { value: sum, err: last + 1e-16 * sum.norm(), evals })
}

fn check_a_domain(s: C64) -> Result<()> {
    if !(s.re > -1.0) {
        return Err(Error::Domain(format!("A_m needs Re s > -1, got {}", s.re)));
    }
    if s.norm() < A_POLE_GUARD {
        return Err(Error::PoleProximity { re: s.re, im: s.im, pole: 0.0, dist: s.norm() });
    }
    Ok(())
}

/// `∂^k A_m(s)`: the part of `L*_m` analytic on `Re s > −1` away from `s = 0`.
pub fn a_part(m: u32, s: C64, k: u32) -> Result<MellinValue> {
    check_a_domain(s)?;
    let kern = laplace::kernel(m);
    let i0 = integral_unit(&kern, s, k)?;
    let ir = integral_remainder(&kern, s, k)?;
    // C_A = −2 log|det U| + (m+1) log(2m+2) = −c_asym
    let pole = pole_derivative(-kern.c_asym, s, 0.0, k);
    let value = i0.value + pole + ir.value;
    let path = if StripPoint::new(m, s).in_fundamental_strip { MellinPath::Quadrature } else { MellinPath::Continuation };
    Ok(MellinValue { value, err_est: i0.err + ir.err, path })
}

/// `∂^k L*_m(s)`. Inside the fundamental strip this is the transform
/// integral itself, split at x = 1 with the asymptotic part integrated in
/// closed form; elsewhere on `Re s > −1` the same expression continues it.
pub fn l_star(m: u32, s: C64, k: u32) -> Result<MellinValue> {
    let xi = 1.0 / (2.0 * m as f64 + 2.0);
    let d = (s + xi).norm();
    if d < 1e-12 {
        return Err(Error::PoleProximity { re: s.re, im: s.im, pole: -xi, dist: d });
    }
    let a = a_part(m, s, k)?;
    let csc = laplace::kernel(m).csc;
    let value = a.value + pole_derivative(-csc, s, -xi, k);
    Ok(MellinValue { value, ..a })
}

fn cexpm1(z: C64) -> C64 {
    if z.norm() < 1e-5 {
        z * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)))
    } else {
        z.exp() - 1.0
    }
}

/// `K_m(s)` through `K̂_m(s) = [(π/2)^{ps} − π^{ps}] ζ(−ps)` plus the entire
/// remainder `Σ [κ_n^s − κ̂_n^s]`, p = 2m+2.
pub fn k_series(m: u32, s: C64) -> Result<DirichletEval> {
    let p = 2.0 * m as f64 + 2.0;
    let xi = 1.0 / p;
    let d = (s + xi).norm();
    if d < K_POLE_GUARD {
        return Err(Error::PoleProximity { re: s.re, im: s.im, pole: -xi, dist: d });
    }
    let ps = s * p;
    let hat = ((ps * (0.5 * PI).ln()).exp() - (ps * PI.ln()).exp()) * zeta(-ps)?;
    let mut rem = C64::new(0.0, 0.0);
    if m > 0 {
        for n in 1..=K_REMAINDER_MAX {
            let kh = spectrum::kappa_hat(n, m);
            let kh_s = (s * kh.ln()).exp();
            let delta = spectrum::seed_err_bound(n, m)? / kh;
            let bound = kh_s.norm() * s.norm() * delta * (s.norm() * delta).exp();
            if bound < K_REMAINDER_TOL && n > 1 {
                break;
            }
            let kn = spectrum::kappa(n, m, true, spectrum::DEFAULT_TOL)?.kappa;
            rem += kh_s * cexpm1(s * (kn / kh).ln());
        }
    }
    Ok(DirichletEval { m, s, value: hat + rem, path: DirichletPath::ZetaContinuation })
}

/// `Σ κ_n^s` summed directly, with the seeds' Hurwitz-zeta tail, for
/// `Re s < −1/(2m+2)`.
pub fn k_series_direct(m: u32, s: C64) -> Result<DirichletEval> {
    let p = 2.0 * m as f64 + 2.0;
    if !(s.re < -1.0 / p) {
        return Err(Error::Domain(format!("direct Dirichlet sum needs Re s < {}, got {}", -1.0 / p, s.re)));
    }
    let kap = spectrum::mixed_kappas(m, K_DIRECT_REFINED, K_DIRECT_REFINED)?;
    let mut sum = C64::new(0.0, 0.0);
    for kn in kap.iter().rev() {
        sum += (s * kn.ln()).exp();
    }
    let tail = (s * p * PI.ln()).exp() * hurwitz_zeta(-s * p, K_DIRECT_REFINED as f64 + 0.5)?;
    Ok(DirichletEval { m, s, value: sum + tail, path: DirichletPath::DirectSum })
}

/// `∂^k_s ∫_0^∞ f(x) x^{s−1} dx` for a real f, by tanh-sinh on (0,1] and on
/// the reflected half `x = 1/y`.
pub fn mellin_transform<F>(f: F, s: C64, k: u32) -> Result<MellinValue>
where
    F: Fn(f64) -> f64,
{
    let lo = quad::tanh_sinh_unit(
        |x| {
            let lx = x.ln();
            ((s - 1.0) * lx).exp() * (f(x) * log_weight(lx, k))
        },
        QUAD_REL,
        QUAD_ABS,
    )?;
    let hi = quad::tanh_sinh_unit(
        |y| {
            let ly = y.ln();
            ((-s - 1.0) * ly).exp() * (f(1.0 / y) * log_weight(-ly, k))
        },
        QUAD_REL,
        QUAD_ABS,
    )?;
    Ok(MellinValue { value: lo.value + hi.value, err_est: lo.err + hi.err, path: MellinPath::Quadrature })
}

/// `π / (s sin πs)`, the factor relating `L*_m` to `K_m`.
pub fn separation_factor(s: C64) -> C64 {
    PI / (s * (s * PI).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn strip_membership() {
        assert!(StripPoint::new(0, c(-0.75)).in_fundamental_strip);
        assert!(!StripPoint::new(0, c(-0.4)).in_fundamental_strip);
        assert!(StripPoint::new(1, c(-0.3)).in_fundamental_strip);
        assert!(!StripPoint::new(1, c(-0.2)).in_fundamental_strip);
    }

    #[test]
    fn k_series_traces() {
        assert!((k_series(0, c(-1.0)).unwrap().value.re - 0.5).abs() < 1e-14);
        assert!((k_series(1, c(-1.0)).unwrap().value.re - 1.0 / 12.0).abs() < 1e-12);
        let expect = ((0.5 * PI).powf(-1.5) - PI.powf(-1.5)) * 2.612_375_348_685_488;
        assert!((k_series(0, c(-0.75)).unwrap().value.re - expect).abs() < 1e-14);
    }

    #[test]
    fn k_series_pole_rejected() {
        assert!(k_series(0, c(-0.5 + 1e-7)).is_err());
        assert!(k_series(1, c(-0.25)).is_err());
    }

    #[test]
    fn direct_and_continued_dirichlet_agree() {
        for m in 0..4u32 {
            for s in [C64::new(-0.8, 0.0), C64::new(-0.6, 2.0), C64::new(-1.3, -1.5)] {
                let a = k_series(m, s).unwrap().value;
                let b = k_series_direct(m, s).unwrap().value;
                assert!((a - b).norm() < 1e-10 * b.norm().max(1.0), "m={m} s={s}: {a} {b}");
            }
        }
    }

    #[test]
    fn l_star_m0_example() {
        let v = l_star(0, c(-0.75), 0).unwrap();
        let expect = separation_factor(c(-0.75)) * k_series(0, c(-0.75)).unwrap().value;
        assert!((v.value - expect).norm() < 1e-10, "{} vs {}", v.value, expect);
        assert!((v.value.re - 5.0815).abs() < 1e-3);
        assert_eq!(v.path, MellinPath::Quadrature);
    }

    #[test]
    fn a0_at_minus_half() {
        let a = a_part(0, c(-0.5), 0).unwrap();
        assert!((a.value.re + 0.362_439_719_655_953_4).abs() < 1e-10, "{}", a.value);
    }

    #[test]
    fn log1p_transform_pair() {
        for s in [-0.2, -0.5, -0.8] {
            let v = mellin_transform(|x: f64| x.ln_1p(), c(s), 0).unwrap().value;
            let expect = separation_factor(c(s));
            assert!((v - expect).norm() < 1e-10 * expect.norm(), "s={s}");
        }
    }
}
