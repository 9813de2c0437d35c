//! Riemann and Hurwitz zeta, complex log-gamma.

use num_complex::Complex64 as C64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

// B_2, B_4, ..., B_24
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Principal-branch complex log-gamma (Lanczos, with reflection for Re z < 1/2).
pub fn ln_gamma(z: C64) -> C64 {
    if z.re < 0.5 {
        // log Γ(z) = log π − log sin(πz) − log Γ(1−z)
        let s = (z * PI).sin();
        return C64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut a = C64::new(LANCZOS[0], 0.0);
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += *c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Hurwitz zeta `Σ_{k≥0} (k+a)^{-s}` by Euler-Maclaurin summation, valid
/// for any `s ≠ 1` and `a > 0`.
pub fn hurwitz_zeta(s: C64, a: f64) -> Result<C64> {
    if (s - 1.0).norm() < 1e-14 {
        return Err(Error::PoleProximity { re: s.re, im: s.im, pole: 1.0, dist: (s - 1.0).norm() });
    }
    if !(a > 0.0) {
        return Err(Error::Domain(format!("hurwitz_zeta needs a > 0, got {a}")));
    }
    let n = (s.norm().ceil() as usize + 15).max(20);
    let mut sum = C64::new(0.0, 0.0);
    for k in (0..n).rev() {
        sum += (-s * (k as f64 + a).ln()).exp();
    }
    let q = n as f64 + a;
    let lq = q.ln();
    let q_s = (-s * lq).exp();
    sum += q_s * q / (s - 1.0) + 0.5 * q_s;
    // Σ B_2j/(2j)! s(s+1)…(s+2j−2) q^{−s−2j+1}
    let mut rising = s;
    let mut fact = 2.0;
    let mut qpow = q_s / q;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = rising * qpow * (*b / fact);
        sum += term;
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        qpow /= q * q;
    }
    Ok(sum)
}

fn borwein_terms(im: f64) -> usize {
    let n = (39.0 + 0.5 * PI * im.abs() + (1.0 + 2.0 * im.abs()).ln()) / (3.0 + 8f64.sqrt()).ln();
    n.ceil() as usize + 2
}

/// Borwein's accelerated alternating series for the eta function, divided
/// by `1 − 2^{1−t}`.
fn zeta_borwein(t: C64) -> C64 {
    let n = borwein_terms(t.im);
    let mut d = vec![0.0f64; n + 1];
    let mut term = 1.0 / n as f64;
    let mut acc = term;
    d[0] = n as f64 * acc;
    for i in 1..=n {
        let fi = i as f64;
        term *= (n as f64 + fi - 1.0) * 4.0 * (n as f64 - fi + 1.0) / ((2.0 * fi) * (2.0 * fi - 1.0));
        acc += term;
        d[i] = n as f64 * acc;
    }
    let dn = d[n];
    let mut s = C64::new(0.0, 0.0);
    for k in (0..n).rev() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s += (-t * ((k + 1) as f64).ln()).exp() * (sign * (d[k] - dn) / dn);
    }
    -s / (1.0 - pow2(1.0 - t))
}

fn pow2(z: C64) -> C64 {
    (z * std::f64::consts::LN_2).exp()
}

/// Riemann zeta on the complex plane minus the pole at 1.
pub fn zeta(t: C64) -> Result<C64> {
    let dist = (t - 1.0).norm();
    if dist < 1e-12 {
        return Err(Error::PoleProximity { re: t.re, im: t.im, pole: 1.0, dist });
    }
    if t.re < 0.0 && t.norm() > 0.5 {
        // ζ(t) = 2^t π^{t−1} sin(πt/2) Γ(1−t) ζ(1−t), assembled in log form
        let one_minus = 1.0 - t;
        let z1 = zeta(one_minus)?;
        let s = (t * (0.5 * PI)).sin();
        if s.norm() == 0.0 || z1.norm() == 0.0 {
            return Ok(C64::new(0.0, 0.0));
        }
        let lg = t * std::f64::consts::LN_2 + (t - 1.0) * PI.ln() + s.ln() + ln_gamma(one_minus) + z1.ln();
        return Ok(lg.exp());
    }
    let denom = 1.0 - pow2(1.0 - t);
    if t.re >= 0.5 && t.im.abs() <= 30.0 && denom.norm() > 0.1 {
        Ok(zeta_borwein(t))
    } else {
        hurwitz_zeta(t, 1.0)
    }
}

pub fn zeta_real(t: f64) -> Result<f64> {
    zeta(C64::new(t, 0.0)).map(|z| z.re)
}
