//! Solving `ĥ′(x) = ε`: lead-order seed, the group-1 solution `x_0`, and the
//! correction sequence `y_j` leading to `x*`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::CoeffTable;

/// Target for `|ĥ′(x*)/ε − 1|` when the correction order is chosen automatically.
pub const RESIDUAL_TARGET: f64 = 1e-10;
/// Order suggested by the `y_j` envelope is capped here.
pub const ENVELOPE_ORDER_CAP: usize = 12;
/// Hard cap on corrections while chasing `RESIDUAL_TARGET`.
pub const MAX_ORDER: usize = 400;
const X0_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct ReversionResult {
    pub eps: f64,
    pub x_tilde0: f64,
    pub x0: f64,
    pub ys: Vec<f64>,
    pub x_star: f64,
    /// `|ĥ′(x*) − ε|`.
    pub residual: f64,
    pub rel_residual: f64,
    #[serde(rename = "J")]
    pub j: usize,
    /// Order suggested by the envelope rule alone.
    pub j_envelope: usize,
    /// `x*/(x₀ y⁺_J)` when the recursion stalled and a Newton polish on
    /// `ĥ′(x) = ε` finished the solve.
    pub newton_polish: Option<f64>,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < (-1f64).exp()) {
        return Err(Error::Domain(format!("eps must lie in (0, 1/e), got {eps}")));
    }
    Ok(())
}

/// `log x̃_0` with `x̃_0 = [a_{t−1}/η^{t−1} · ε^{−1} (log 1/ε)^{t−1}]^{1/η}`.
pub fn log_x_tilde0(table: &CoeffTable, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let g = table.mspec.group(1);
    let t = g.t;
    let a = table.c1[0][t - 1];
    if !(a > 0.0) {
        return Err(Error::Domain(format!("lead coefficient a_(t-1) = {a} is not positive")));
    }
    let l = (1.0 / eps).ln();
    let inner = a.ln() - (t as f64 - 1.0) * g.eta.ln() + l + (t as f64 - 1.0) * l.ln();
    Ok(inner / g.eta)
}

pub fn x_tilde0(table: &CoeffTable, eps: f64) -> Result<f64> {
    Ok(log_x_tilde0(table, eps)?.exp())
}

fn poly(a: &[f64], u: f64) -> (f64, f64) {
    let p = a.iter().rev().fold(0.0, |acc, ak| acc * u + ak);
    let dp = a.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, ak)| acc * u + k as f64 * ak);
    (p, dp)
}

/// `log x_0`: Newton in `u = log x` on `log Σ a_k u^k − η u = log ε`, with a
/// bisection fallback on an expanding bracket around the seed.
pub fn solve_log_x0(table: &CoeffTable, eps: f64, tol: f64) -> Result<f64> {
    let u_seed = log_x_tilde0(table, eps)?;
    let g1 = table.mspec.group(1);
    let eta = g1.eta;
    let a = &table.c1[0];
    let le = eps.ln();
    let resid = |u: f64| -> Option<(f64, f64)> {
        let (p, dp) = poly(a, u);
        if p > 0.0 && u > 0.0 {
            Some((p.ln() - eta * u - le, dp / p - eta))
        } else {
            None
        }
    };
    if a.len() == 1 {
        return Ok((a[0].ln() - le) / eta);
    }
    let step = std::f64::consts::LN_10;
    let mut lo = (u_seed - step).max(1e-3);
    let mut hi = u_seed + step;
    let mut expand = 0;
    loop {
        let glo = resid(lo).map(|r| r.0);
        let ghi = resid(hi).map(|r| r.0);
        match (glo, ghi) {
            (Some(a), Some(b)) if a > 0.0 && b < 0.0 => break,
            (Some(a), _) if a <= 0.0 => lo = (lo - step).max(lo * 0.5),
            (None, _) => lo += 0.5 * (hi - lo),
            _ => hi += step,
        }
        expand += 1;
        if expand > 200 {
            return Err(Error::Domain(format!("no monotone bracket for x0 at eps = {eps}: seed outside the decreasing region")));
        }
    }
    let mut u = u_seed.clamp(lo, hi);
    for _ in 0..100 {
        let (g, dg) = match resid(u) {
            Some(r) => r,
            None => {
                u = 0.5 * (lo + hi);
                continue;
            }
        };
        if g.abs() < tol {
            return Ok(u);
        }
        if g > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let next = u - g / dg;
        u = if dg < 0.0 && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
    }
    let r = resid(u).map(|r| r.0.abs()).unwrap_or(f64::INFINITY);
    Err(Error::NoConvergence { what: "x0 Newton iteration", iters: 100, residual: r })
}

pub fn solve_x0(table: &CoeffTable, eps: f64, tol: f64) -> Result<f64> {
    Ok(solve_log_x0(table, eps, tol)?.exp())
}

/// The `W_{−1}` branch of Lambert's function on `[−1/e, 0)`.
pub fn lambert_wm1(z: f64) -> Result<f64> {
    let branch = -(-1f64).exp();
    if !(z >= branch && z < 0.0) {
        return Err(Error::Domain(format!("W_-1 is real only on [-1/e, 0), got {z}")));
    }
    if z == branch {
        return Ok(-1.0);
    }
    let mut w = if z < -0.25 {
        let p = -(2.0 * (1.0 + std::f64::consts::E * z)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-z).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - z;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if dw.abs() <= 1e-15 * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// Unsigned Stirling number of the first kind, `[n k]`.
pub fn stirling_first(n: usize, k: usize) -> Result<u128> {
    if n > 30 {
        return Err(Error::InvalidInput(format!("stirling_first supports n <= 30, got {n}")));
    }
    if k > n {
        return Ok(0);
    }
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=i).rev() {
            row[j] = row[j - 1] + (i as u128 - 1) * row[j];
        }
        row[0] = 0;
    }
    Ok(row[k])
}

/// Asymptotic series for `W_{−1}(−z)` with coefficients
/// `d_{rs} = (−1)^r [r+s, r+1] / s!`, summed over `r ≤ r_max`, `1 ≤ s ≤ s_max`.
pub fn lambert_wm1_series(z: f64, r_max: usize, s_max: usize) -> Result<f64> {
    if !(z > 0.0 && z < (-1f64).exp()) {
        return Err(Error::Domain(format!("series needs 0 < z < 1/e, got {z}")));
    }
    let l1 = z.ln();
    let l2 = (1.0 / z).ln().ln();
    let mut w = l1 - l2;
    let mut s_fact = 1.0;
    for s in 1..=s_max {
        s_fact *= s as f64;
        for r in 0..=r_max {
            let st = stirling_first(r + s, r + 1)? as f64;
            let sign = if r % 2 == 0 { 1.0 } else { -1.0 };
            w += sign * st / s_fact * l2.powi(s as i32) * l1.powi(-((r + s) as i32));
        }
    }
    Ok(w)
}

/// `x_0` for `t_1 = 2` through `W_{−1}`.
pub fn x0_lambert(table: &CoeffTable, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    let g = table.mspec.group(1);
    if g.t != 2 {
        return Err(Error::InvalidInput(format!("Lambert path needs t_1 = 2, got {}", g.t)));
    }
    let (a0, a1) = (table.c1[0][0], table.c1[0][1]);
    let eta = g.eta;
    let z = eta / a1 * (-eta * a0 / a1).exp() * eps;
    let w = lambert_wm1(-z)?;
    Ok((-w / eta - a0 / a1).exp())
}

/// Smallest J with `(ε^{η₂/η₁−1} (log 1/ε)^Δ)^{J+1} < 10⁻³ ε`, capped.
pub fn envelope_order(table: &CoeffTable, eps: f64) -> usize {
    let ms = &table.mspec;
    if ms.g() < 2 {
        return 0;
    }
    let g1 = ms.group(1);
    let delta = ms.groups[1..]
        .iter()
        .map(|g| g.t as f64 - 1.0 - (g1.t as f64 - 1.0) * g.eta / g1.eta)
        .fold(f64::NEG_INFINITY, f64::max);
    let l = (1.0 / eps).ln();
    let log_rate = (ms.group(2).eta / g1.eta - 1.0) * eps.ln() + delta * l.ln();
    let target = (1e-3 * eps).ln();
    if log_rate >= 0.0 {
        return ENVELOPE_ORDER_CAP;
    }
    let j = (target / log_rate).ceil() as i64 - 1;
    j.clamp(1, ENVELOPE_ORDER_CAP as i64) as usize
}

fn sum_f(table: &CoeffTable, x: f64) -> f64 {
    (1..=table.mspec.g()).map(|nu| table.f_group(nu, x)).sum()
}

/// The `y_j` recursion. With `order = None` the envelope rule picks J and the
/// iteration continues until `|ĥ′(x*)/ε − 1| < RESIDUAL_TARGET` or `MAX_ORDER`.
pub fn correction_sequence(table: &CoeffTable, eps: f64, order: Option<usize>) -> Result<ReversionResult> {
    let x_tilde0 = x_tilde0(table, eps)?;
    let x0 = solve_x0(table, eps, X0_TOL)?;
    let j_envelope = envelope_order(table, eps);
    let g1 = table.mspec.group(1);
    let eta = g1.eta;
    let a1 = &table.c1[0];
    let mut ys = Vec::new();
    let mut yplus = 1.0;
    let mut stalled = false;
    if table.mspec.g() >= 2 {
        let max = order.unwrap_or(MAX_ORDER);
        for step in 1..=max {
            let x = x0 * yplus;
            let lx = x.ln();
            let mis = sum_f(table, x) - eps;
            if order.is_none() && step > j_envelope && (mis / eps).abs() < RESIDUAL_TARGET {
                break;
            }
            let dsum: f64 = a1.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a * lx.powi(k as i32 - 1)).sum();
            let den = eta * table.f_group(1, x) - x.powf(-eta) * dsum;
            if den.abs() < 1e-14 * eps {
                return Err(Error::DenominatorCollapse { step, den: den.abs() });
            }
            let y = yplus * mis / den;
            if !(yplus + y > 0.0) || !y.is_finite() {
                stalled = true;
                break;
            }
            ys.push(y);
            yplus += y;
        }
    }
    let mut x_star = x0 * yplus;
    let mut rel = (table.h_eval(x_star, 1) / eps - 1.0).abs();
    let mut newton_polish = None;
    if order.is_none() && (stalled || !(rel < RESIDUAL_TARGET)) {
        let polished = polish(table, eps, x_star)?;
        newton_polish = Some(polished / x_star);
        x_star = polished;
        rel = (table.h_eval(x_star, 1) / eps - 1.0).abs();
    }
    Ok(ReversionResult {
        eps,
        x_tilde0,
        x0,
        j: ys.len(),
        ys,
        x_star,
        residual: rel * eps,
        rel_residual: rel,
        j_envelope,
        newton_polish,
    })
}

/// Safeguarded Newton in `u = log x` on `log ĥ′(x) = log ε`, started at `x`.
fn polish(table: &CoeffTable, eps: f64, x: f64) -> Result<f64> {
    let le = eps.ln();
    let g = |u: f64| -> Option<(f64, f64)> {
        let x = u.exp();
        let h1 = table.h_eval(x, 1);
        (h1 > 0.0 && u > 0.0).then(|| (h1.ln() - le, x * table.h_eval(x, 2) / h1))
    };
    let mut lo = x.ln().max(1e-3);
    let mut hi = lo;
    let step = std::f64::consts::LN_10;
    let mut tries = 0;
    while !matches!(g(lo), Some((v, _)) if v > 0.0) {
        lo = (lo - step).max(0.5 * lo);
        tries += 1;
        if tries > 200 {
            return Err(Error::Domain(format!("h'(x) < eps = {eps} for every scanned x > 1: eps lies above the range of the expansion")));
        }
    }
    while !matches!(g(hi), Some((v, _)) if v < 0.0) {
        hi += step;
        tries += 1;
        if tries > 400 {
            return Err(Error::Domain(format!("no point with h'(x) < eps found at eps = {eps}")));
        }
    }
    let mut u = x.ln().clamp(lo, hi);
    for _ in 0..200 {
        let Some((v, dv)) = g(u) else {
            u = 0.5 * (lo + hi);
            continue;
        };
        if v.abs() < 1e-15 {
            break;
        }
        if v > 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let next = u - v / dv;
        u = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * u {
            break;
        }
    }
    Ok(u.exp())
}

/// The same recursion written for pairwise distinct entries, where
/// `f_ν = a_{ν,0} x^{−η_ν}`.
pub fn correction_sequence_distinct(table: &CoeffTable, eps: f64, order: usize) -> Result<Vec<f64>> {
    let ms = &table.mspec;
    if !ms.is_distinct() {
        return Err(Error::InvalidInput("distinct-entry recursion needs t_nu = 1 for every group".into()));
    }
    let eta1 = ms.group(1).eta;
    let a10 = table.c1[0][0];
    let mut ys = Vec::with_capacity(order);
    let mut yplus: f64 = 1.0;
    for _ in 0..order {
        let mut s = 0.0;
        for (g, c) in ms.groups.iter().zip(&table.c1) {
            let r = g.eta / eta1;
            s += c[0] * a10.powf(-r) * eps.powf(r - 1.0) * yplus.powf(-g.eta);
        }
        let y = yplus.powf(1.0 + eta1) / eta1 * (s - 1.0);
        ys.push(y);
        yplus += y;
    }
    Ok(ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{build_mspec, h_tables};

    #[test]
    fn stirling_values() {
        assert_eq!(stirling_first(0, 0).unwrap(), 1);
        assert_eq!(stirling_first(3, 1).unwrap(), 2);
        assert_eq!(stirling_first(4, 2).unwrap(), 11);
        assert_eq!(stirling_first(5, 5).unwrap(), 1);
        assert_eq!(stirling_first(30, 1).unwrap(), (1..30u128).product::<u128>());
        assert!(stirling_first(31, 2).is_err());
    }

    #[test]
    fn lambert_values() {
        assert_eq!(lambert_wm1(-(-1f64).exp()).unwrap(), -1.0);
        let w = lambert_wm1(-0.1).unwrap();
        assert!((w + 3.577_152_063_957_297).abs() < 1e-13);
        for z in [-0.367, -0.3, -1e-3, -1e-30, -1e-300] {
            let w = lambert_wm1(z).unwrap();
            assert!(w <= -1.0);
            assert!((w * w.exp() - z).abs() < 1e-13 * z.abs(), "z={z}");
        }
        assert!(lambert_wm1(0.1).is_err());
        assert!(lambert_wm1(-0.5).is_err());
    }

    #[test]
    fn t1_closed_form_x0() {
        let t = h_tables(&build_mspec(&[0]).unwrap()).unwrap();
        let a0 = t.c1[0][0];
        let x0 = solve_x0(&t, 0.01, 1e-14).unwrap();
        assert!((x0 / (a0 / 0.01).powi(2) - 1.0).abs() < 1e-13);
        assert!((x_tilde0(&t, 0.01).unwrap() / (1e4 * a0 * a0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn lambert_path_matches_newton() {
        let t = h_tables(&build_mspec(&[0, 0]).unwrap()).unwrap();
        for eps in [1e-2, 1e-4, 1e-8] {
            let a = x0_lambert(&t, eps).unwrap();
            let b = solve_x0(&t, eps, 1e-14).unwrap();
            assert!((a / b - 1.0).abs() < 1e-12, "eps={eps} {a} {b}");
            assert!((t.f_group(1, b) / eps - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn series_matches_newton() {
        for z in [1e-5, 1e-10, 1e-40] {
            let w = lambert_wm1(-z).unwrap();
            let s = lambert_wm1_series(z, 8, 8).unwrap();
            assert!((w - s).abs() < 1e-3 * w.abs(), "z={z} {w} {s}");
        }
    }

    #[test]
    fn first_correction_distinct_form() {
        let t = h_tables(&build_mspec(&[0, 1]).unwrap()).unwrap();
        let eps = 1e-3;
        let r = correction_sequence(&t, eps, Some(3)).unwrap();
        let d = correction_sequence_distinct(&t, eps, 3).unwrap();
        let a10 = t.c1[0][0];
        let g2 = t.mspec.group(2);
        let y1 = 2.0 * t.c1[1][0] * a10.powf(-2.0 * g2.eta) * eps.powf(2.0 * g2.eta - 1.0);
        assert!((r.ys[0] / y1 - 1.0).abs() < 1e-10);
        assert!((d[0] / y1 - 1.0).abs() < 1e-10);
        for (a, b) in r.ys.iter().zip(&d) {
            assert!((a - b).abs() < 1e-10 * y1.abs());
        }
    }

    #[test]
    fn automatic_order_reaches_target() {
        for m in [&[0, 0][..], &[0, 1], &[1, 2], &[0, 0, 0]] {
            let t = h_tables(&build_mspec(m).unwrap()).unwrap();
            for eps in [1e-2, 1e-3, 1e-4] {
                if m == [1, 2] && eps == 1e-2 {
                    // sup of the expansion's h' is about 3.9e-3
                    assert!(correction_sequence(&t, eps, None).is_err());
                    continue;
                }
                let r = correction_sequence(&t, eps, None).unwrap();
                assert!(r.rel_residual < RESIDUAL_TARGET, "m={m:?} eps={eps} {r:?}");
            }
        }
    }

    #[test]
    fn eps_domain() {
        let t = h_tables(&build_mspec(&[0]).unwrap()).unwrap();
        assert!(x_tilde0(&t, 0.5).is_err());
        assert!(x_tilde0(&t, 0.0).is_err());
    }
}
