//! Tie structure of `m`, Laurent data of `L*_m` at its poles, and the
//! coefficient tables of the asymptotic expansions of `L_m`, `h`, `h′`, `h″`.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::laplace;
use crate::mellin;
use crate::series::{self, Series};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Group {
    pub m_bar: u32,
    pub t: usize,
    pub xi: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MSpec {
    pub m: Vec<u32>,
    pub d: usize,
    pub groups: Vec<Group>,
}

impl MSpec {
    pub fn g(&self) -> usize {
        self.groups.len()
    }

    /// Group ν, counted from 1.
    pub fn group(&self, nu: usize) -> &Group {
        &self.groups[nu - 1]
    }

    pub fn is_distinct(&self) -> bool {
        self.groups.iter().all(|g| g.t == 1)
    }

    pub fn label(&self) -> String {
        self.m.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    }
}

pub fn build_mspec(m: &[u32]) -> Result<MSpec> {
    if m.is_empty() {
        return Err(Error::InvalidInput("m must have at least one entry".into()));
    }
    let mut sorted = m.to_vec();
    sorted.sort_unstable();
    let mut groups: Vec<Group> = Vec::new();
    for &v in &sorted {
        match groups.last_mut() {
            Some(g) if g.m_bar == v => g.t += 1,
            _ => {
                let xi = 1.0 / (2.0 * v as f64 + 2.0);
                groups.push(Group { m_bar: v, t: 1, xi, eta: 1.0 - xi });
            }
        }
    }
    Ok(MSpec { d: sorted.len(), m: sorted, groups })
}

/// One numeric Mellin value that went into a coefficient.
#[derive(Debug, Clone, Serialize)]
pub struct MellinInput {
    pub what: &'static str,
    pub m: u32,
    pub s: f64,
    pub deriv: u32,
    pub value: f64,
    pub err_est: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LaurentData {
    pub nu: usize,
    /// Coefficient of `(s + ξ_ν)^{−(k+1)}`, k = 0..t_ν−1.
    pub laurent: Vec<f64>,
    /// `c_{ν,k}` of the expansion of `L_m`.
    pub c_l: Vec<f64>,
    pub inputs: Vec<MellinInput>,
}

fn real_of(v: mellin::MellinValue, what: &'static str, m: u32, s: f64, k: u32, log: &mut Vec<MellinInput>) -> f64 {
    log.push(MellinInput { what, m, s, deriv: k, value: v.value.re, err_est: v.err_est });
    v.value.re
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Laurent coefficients of `L*_m` at `s = −ξ_ν` from the factorization
/// `(s sin πs/π)^{d−1} · Π_{n≠ν} [L*_{m̄_n}]^{t_n} · [−csc(πξ_ν)/(s+ξ_ν) + A_{m̄_ν}(s)]^{t_ν}`.
pub fn laurent_coeffs(mspec: &MSpec, nu: usize) -> Result<LaurentData> {
    if nu == 0 || nu > mspec.g() {
        return Err(Error::InvalidInput(format!("group index {nu} outside 1..={}", mspec.g())));
    }
    if mspec.d < 2 {
        return Err(Error::InvalidInput("laurent_coeffs needs d >= 2; d = 1 is closed form".into()));
    }
    let grp = mspec.group(nu).clone();
    let t = grp.t;
    let s0 = -grp.xi;
    let sc = C64::new(s0, 0.0);
    let mut inputs = Vec::new();

    let p = series::s_sin_pi_s(s0, t).powi(mspec.d - 1);

    let mut q = Series::one(t);
    for (i, other) in mspec.groups.iter().enumerate() {
        if i + 1 == nu {
            continue;
        }
        let mut c = Vec::with_capacity(t);
        for j in 0..t {
            let v = mellin::l_star(other.m_bar, sc, j as u32)?;
            c.push(real_of(v, "lstar", other.m_bar, s0, j as u32, &mut inputs) / factorial(j));
        }
        q = q.mul(&Series(c).powi(other.t));
    }

    // (s+ξ)^{t} [−csc/(s+ξ) + A]^{t} = B(ε)^t with B = −csc + Σ_j A^{(j)}/j! ε^{j+1}
    let csc = 1.0 / (PI * grp.xi).sin();
    let mut b = vec![0.0; t];
    b[0] = -csc;
    for j in 0..t.saturating_sub(1) {
        let v = mellin::a_part(grp.m_bar, sc, j as u32)?;
        b[j + 1] = real_of(v, "apart", grp.m_bar, s0, j as u32, &mut inputs) / factorial(j);
    }
    let prod = p.mul(&q).mul(&Series(b).powi(t));

    let laurent: Vec<f64> = (0..t).map(|k| prod.coeff(t - 1 - k)).collect();
    let c_l = laurent
        .iter()
        .enumerate()
        .map(|(k, e)| if k % 2 == 0 { -e } else { *e } / factorial(k))
        .collect();
    Ok(LaurentData { nu, laurent, c_l, inputs })
}

/// Closed form for `c_{1,t−1}`; `csc(π/(2m+2))` when d = 1.
pub fn lead_coefficient(mspec: &MSpec) -> Result<f64> {
    let g1 = mspec.group(1);
    let (m, t, d) = (g1.m_bar, g1.t, mspec.d);
    let p = 2.0 * m as f64 + 2.0;
    let sin = (PI / p).sin();
    let mut prod = 1.0;
    for other in mspec.groups.iter().skip(1) {
        let v = mellin::l_star(other.m_bar, C64::new(-1.0 / p, 0.0), 0)?.value.re;
        prod *= v.powi(other.t as i32);
    }
    Ok(sin.powi(d as i32 - 1 - t as i32) / ((p * PI).powi(d as i32 - 1) * factorial(t - 1)) * prod)
}

/// `C_ν` for pairwise distinct entries.
pub fn cnu_closed_form(mspec: &MSpec, nu: usize) -> Result<f64> {
    if !mspec.is_distinct() {
        return Err(Error::InvalidInput("closed-form C_nu needs distinct entries".into()));
    }
    let d = mspec.d;
    let g = mspec.group(nu);
    let p = 2.0 * g.m_bar as f64 + 2.0;
    let mut prod = 1.0;
    for (i, other) in mspec.groups.iter().enumerate() {
        if i + 1 != nu {
            prod *= mellin::l_star(other.m_bar, C64::new(-1.0 / p, 0.0), 0)?.value.re;
        }
    }
    Ok((PI / p).sin().powi(d as i32 - 2) * prod / (p * PI).powi(d as i32 - 1))
}

/// `(c_{1,1}, c_{1,0})` for `m = (m, m)`.
pub fn equal_pair_closed_form(m: u32) -> Result<(f64, f64)> {
    let p = 2.0 * m as f64 + 2.0;
    let th = PI / p;
    let csc = 1.0 / th.sin();
    let a = mellin::a_part(m, C64::new(-1.0 / p, 0.0), 0)?.value.re;
    let c11 = csc / (p * PI);
    let c10 = a / ((m as f64 + 1.0) * PI) + csc / PI + th.cos() * csc * csc / p;
    Ok((c11, c10))
}

#[derive(Debug, Clone, Serialize)]
pub struct CoeffTable {
    pub mspec: MSpec,
    /// Per group ν (0-based here), coefficients k = 0..t_ν−1.
    pub c_l: Vec<Vec<f64>>,
    pub c0: Vec<Vec<f64>>,
    pub c1: Vec<Vec<f64>>,
    pub c2: Vec<Vec<f64>>,
    /// Constant term of `L_m` (d = 1 only, else 0).
    pub const_l: f64,
    /// Constant term of `h` (d = 1 only, else 0).
    pub const_h: f64,
    pub provenance: Vec<MellinInput>,
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `c_{ν,k}(0) = 2^{ξ−1} Σ_{ℓ≥k} c_{ν,ℓ} C(ℓ,k) (log 2)^{ℓ−k}`.
pub fn h_coeffs_from_l(xi: f64, c_l: &[f64]) -> Vec<f64> {
    let ln2 = std::f64::consts::LN_2;
    let pre = 2f64.powf(xi - 1.0);
    (0..c_l.len())
        .map(|k| pre * (k..c_l.len()).map(|l| c_l[l] * binom(l, k) * ln2.powi((l - k) as i32)).sum::<f64>())
        .collect()
}

/// One termwise differentiation: `(a_k x^{ξ−j}(log x)^k)′` regrouped.
pub fn differentiate(exponent: f64, c: &[f64]) -> Vec<f64> {
    (0..c.len())
        .map(|k| exponent * c[k] + if k + 1 < c.len() { (k + 1) as f64 * c[k + 1] } else { 0.0 })
        .collect()
}

pub fn h_tables(mspec: &MSpec) -> Result<CoeffTable> {
    let mut c_l = Vec::new();
    let mut provenance = Vec::new();
    let (mut const_l, mut const_h) = (0.0, 0.0);
    if mspec.d == 1 {
        let k = laplace::kernel(mspec.m[0]);
        c_l.push(vec![k.csc]);
        const_l = k.c_asym;
        const_h = 0.5 * k.c_asym;
    } else {
        for nu in 1..=mspec.g() {
            let ld = laurent_coeffs(mspec, nu)?;
            c_l.push(ld.c_l);
            provenance.extend(ld.inputs);
        }
    }
    let mut c0 = Vec::new();
    let mut c1 = Vec::new();
    let mut c2 = Vec::new();
    for (g, cl) in mspec.groups.iter().zip(&c_l) {
        let a = h_coeffs_from_l(g.xi, cl);
        let b = differentiate(g.xi, &a);
        let c = differentiate(g.xi - 1.0, &b);
        c0.push(a);
        c1.push(b);
        c2.push(c);
    }
    Ok(CoeffTable { mspec: mspec.clone(), c_l, c0, c1, c2, const_l, const_h, provenance })
}

/// Memoized `h_tables` keyed by the canonical (sorted) m.
pub fn h_tables_cached(m: &[u32]) -> Result<Arc<CoeffTable>> {
    static CACHE: OnceLock<Mutex<HashMap<Vec<u32>, Arc<CoeffTable>>>> = OnceLock::new();
    let ms = build_mspec(m)?;
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&ms.m) {
        return Ok(t.clone());
    }
    let t = Arc::new(h_tables(&ms)?);
    Ok(cache.lock().unwrap().entry(ms.m.clone()).or_insert(t).clone())
}

impl CoeffTable {
    fn grid(&self, j: u32) -> &Vec<Vec<f64>> {
        match j {
            0 => &self.c0,
            1 => &self.c1,
            2 => &self.c2,
            _ => panic!("h_eval supports derivative orders 0, 1, 2"),
        }
    }

    /// `Σ_ν Σ_k c_{ν,k}(j) x^{ξ_ν−j} (log x)^k`, plus the d = 1 constant for j = 0.
    pub fn h_eval(&self, x: f64, j: u32) -> f64 {
        let lx = x.ln();
        let mut s = if j == 0 { self.const_h } else { 0.0 };
        for (g, c) in self.mspec.groups.iter().zip(self.grid(j)) {
            let base = x.powf(g.xi - j as f64);
            let mut poly = 0.0;
            for ck in c.iter().rev() {
                poly = poly * lx + ck;
            }
            s += base * poly;
        }
        s
    }

    /// Same sum for the expansion of `L_m` itself.
    pub fn l_eval(&self, x: f64) -> f64 {
        let lx = x.ln();
        let mut s = self.const_l;
        for (g, c) in self.mspec.groups.iter().zip(&self.c_l) {
            let mut poly = 0.0;
            for ck in c.iter().rev() {
                poly = poly * lx + ck;
            }
            s += x.powf(g.xi) * poly;
        }
        s
    }

    /// Group-ν piece of `h′`: `x^{ξ_ν−1} Σ_k c_{ν,k}(1) (log x)^k`, ν from 1.
    pub fn f_group(&self, nu: usize, x: f64) -> f64 {
        let g = self.mspec.group(nu);
        let lx = x.ln();
        let mut poly = 0.0;
        for ck in self.c1[nu - 1].iter().rev() {
            poly = poly * lx + ck;
        }
        x.powf(g.xi - 1.0) * poly
    }
}

pub fn h_eval(table: &CoeffTable, x: f64, j: u32) -> Result<f64> {
    if !(x > 1.0) {
        return Err(Error::Domain(format!("h_eval needs log x > 0, got x = {x}")));
    }
    if j > 2 {
        return Err(Error::InvalidInput(format!("derivative order {j} not in 0..=2")));
    }
    Ok(table.h_eval(x, j))
}
