//! One-dimensional log-Laplace transform `L_m(x) = Σ_n log(1 + x/κ_n(m))`
//! through the `(2m+2) x (2m+2)` characteristic determinant.

use num_complex::Complex64 as C64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

use crate::linalg::{self, LogDet, Lu};
use crate::special::hurwitz_zeta;
use crate::spectrum;

/// Matrices whose largest column exponent exceeds this are built column-scaled.
pub const OVERFLOW_RE_BETA: f64 = 300.0;
/// The moment power series is used for `x ≤ SERIES_FRACTION · κ_1`.
pub const SERIES_FRACTION: f64 = 0.4;
/// Once the decaying exponentials drop below this, the remainder is taken
/// as a perturbation of the limiting scaled matrix.
pub const PERTURBATIVE_ENVELOPE: f64 = 1e-3;

const N_MOMENTS: usize = 64;
const MOMENT_REFINED: usize = 20;

/// The roots of unity that define the characteristic matrix.
#[derive(Debug, Clone, Serialize)]
pub struct DetSpec {
    pub m: u32,
    pub omega: Vec<(f64, f64)>,
    pub v: Vec<(f64, f64)>,
}

impl DetSpec {
    pub fn new(m: u32) -> DetSpec {
        let p = 2 * m as usize + 2;
        let omega = (0..p)
            .map(|l| C64::from_polar(1.0, 2.0 * PI * l as f64 / p as f64))
            .map(|c| (c.re, c.im))
            .collect();
        let v = (0..p)
            .map(|l| C64::from_polar(1.0, PI * (2 * l + 1) as f64 / p as f64))
            .map(|c| (c.re, c.im))
            .collect();
        DetSpec { m, omega, v }
    }

    pub fn size(&self) -> usize {
        2 * self.m as usize + 2
    }
}

/// Per-m precomputed data shared by every evaluation.
pub struct Kernel {
    pub m: u32,
    pub p: usize,
    pub xi: f64,
    pub csc: f64,
    /// `sin(π ξ)`: the decay rate of the remainder in `x^ξ`.
    pub decay: f64,
    pub log_det_u: f64,
    /// `2 log|det U| − (m+1) log(2m+2)`.
    pub c_asym: f64,
    /// `(m+1) log(2m+2) = log|det N(0)|`.
    pub log_det0: f64,
    det0: C64,
    roots: Vec<C64>,
    v: Vec<C64>,
    nbar_inf: Lu,
    moments: OnceLock<Vec<f64>>,
    series_max: OnceLock<f64>,
}

fn registry() -> &'static RwLock<HashMap<u32, Arc<Kernel>>> {
    static REG: OnceLock<RwLock<HashMap<u32, Arc<Kernel>>>> = OnceLock::new();
    REG.get_or_init(|| RwLock::new(HashMap::new()))
}

pub fn kernel(m: u32) -> Arc<Kernel> {
    if let Some(k) = registry().read().unwrap().get(&m) {
        return k.clone();
    }
    let k = Arc::new(Kernel::new(m));
    registry().write().unwrap().entry(m).or_insert(k).clone()
}

impl Kernel {
    fn new(m: u32) -> Kernel {
        let p = 2 * m as usize + 2;
        let xi = 1.0 / p as f64;
        let roots: Vec<C64> = (0..p)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / p as f64))
            .collect();
        let v: Vec<C64> = (0..p)
            .map(|l| C64::from_polar(1.0, PI * (2 * l + 1) as f64 / p as f64))
            .collect();
        let mut k = Kernel {
            m,
            p,
            xi,
            csc: 1.0 / (PI * xi).sin(),
            decay: (PI * xi).sin(),
            log_det_u: 0.0,
            c_asym: 0.0,
            log_det0: (m as f64 + 1.0) * (p as f64).ln(),
            det0: C64::new(0.0, 0.0),
            roots,
            v,
            nbar_inf: Lu::factor(vec![C64::new(1.0, 0.0)], 1),
            moments: OnceLock::new(),
            series_max: OnceLock::new(),
        };
        k.log_det_u = vandermonde_log_det(m);
        k.c_asym = 2.0 * k.log_det_u - k.log_det0;
        k.det0 = linalg::log_det(k.matrix(&vec![C64::new(0.0, 0.0); p], false).0, p).value();
        let mut inf = vec![C64::new(0.0, 0.0); p * p];
        let h = m as usize;
        for r in 0..p {
            for l in 0..p {
                let keep = (r <= h) == (l <= h);
                if keep {
                    inf[r * p + l] = k.omega_pow(l, r);
                }
            }
        }
        k.nbar_inf = Lu::factor(inf, p);
        k
    }

    /// `ω_l^k`, taken from the table of p-th roots of unity.
    #[inline]
    pub fn omega_pow(&self, l: usize, k: usize) -> C64 {
        self.roots[(l * k) % self.p]
    }

    /// `β_l` for a given principal root `r = x^{1/(2m+2)}`.
    pub fn betas(&self, r: C64) -> Vec<C64> {
        self.v.iter().map(|v| r * C64::new(0.0, 1.0) * v).collect()
    }

    /// Row-major `N` for the given exponents. With `scale`, every column with
    /// `Re β > 0` is multiplied by `e^{−β}`; the returned shift is the sum of
    /// those `β` so that `det N = det(scaled) · e^{shift}`.
    fn matrix(&self, beta: &[C64], scale: bool) -> (Vec<C64>, C64) {
        let p = self.p;
        let h = self.m as usize;
        let mut a = vec![C64::new(0.0, 0.0); p * p];
        let mut shift = C64::new(0.0, 0.0);
        for l in 0..p {
            let b = beta[l];
            let scaled = scale && b.re > 0.0;
            if scaled {
                shift += b;
            }
            let (lo, hi) = if scaled { ((-b).exp(), C64::new(1.0, 0.0)) } else { (C64::new(1.0, 0.0), b.exp()) };
            for r in 0..p {
                let f = if r > h { hi } else { lo };
                a[r * p + l] = self.omega_pow(l, r) * f;
            }
        }
        (a, shift)
    }

    fn det_from_root(&self, r: C64, force_scale: bool) -> LogDet {
        let beta = self.betas(r);
        let max_re = beta.iter().map(|b| b.re).fold(f64::NEG_INFINITY, f64::max);
        let scale = force_scale || max_re > OVERFLOW_RE_BETA;
        let (a, shift) = self.matrix(&beta, scale);
        let d = linalg::log_det(a, self.p);
        if d.is_zero() {
            return d;
        }
        LogDet { ln_abs: d.ln_abs + shift.re, phase: d.phase * C64::from_polar(1.0, shift.im) }
    }

    /// `det N(−t^{2m+2}) / det N(0)` divided by the positive factor
    /// `exp(Σ_{Re β>0} Re β)`; real, smooth in t, and sign-changing exactly
    /// at the reciprocal eigenvalues.
    pub fn char_scaled(&self, t: f64) -> C64 {
        let r = C64::from_polar(t, PI / self.p as f64);
        let beta = self.betas(r);
        let (a, shift) = self.matrix(&beta, true);
        let d = linalg::log_det(a, self.p).value();
        d * C64::from_polar(1.0, shift.im) / self.det0
    }

    /// Moments `μ_k = Σ_n κ_n^{−k}` for `k = 1..N_MOMENTS`.
    pub fn moments(&self) -> &[f64] {
        self.moments.get_or_init(|| compute_moments(self.m))
    }

    /// Upper end of the power-series regime.
    pub fn series_max(&self) -> f64 {
        *self.series_max.get_or_init(|| {
            let k1 = spectrum::kappa(1, self.m, true, spectrum::DEFAULT_TOL)
                .map(|e| e.kappa)
                .unwrap_or_else(|_| spectrum::kappa_hat(1, self.m));
            SERIES_FRACTION * k1
        })
    }

    /// `r_m(x)` and its first two derivatives from `log det(I + Y)` with
    /// `Y = N̄(∞)^{-1}(N̄(x) − N̄(∞))`.
    fn remainder_perturbative(&self, x: f64, derivs: bool) -> [f64; 3] {
        let p = self.p;
        let h = self.m as usize;
        let r = x.powf(self.xi);
        let beta = self.betas(C64::new(r, 0.0));
        let (xi, zero) = (self.xi, C64::new(0.0, 0.0));
        let mut e0 = vec![zero; p * p];
        let mut e1 = vec![zero; p * p];
        let mut e2 = vec![zero; p * p];
        for l in 0..p {
            // decaying columns feed the lower rows, scaled growing columns the upper rows
            let (b, rows): (C64, std::ops::Range<usize>) = if l <= h { (beta[l], h + 1..p) } else { (-beta[l], 0..h + 1) };
            let eb = b.exp();
            let b1 = b * (xi / x);
            let b2 = b * (xi * (xi - 1.0) / (x * x));
            for row in rows {
                let w = self.omega_pow(l, row) * eb;
                e0[row * p + l] = w;
                e1[row * p + l] = w * b1;
                e2[row * p + l] = w * (b2 + b1 * b1);
            }
        }
        let y0 = self.nbar_inf.solve_matrix(&e0);
        let r0 = linalg::log_det_identity_plus(y0.clone(), p).re;
        if !derivs {
            return [r0, 0.0, 0.0];
        }
        let mut ipy = y0;
        for i in 0..p {
            ipy[i * p + i] += 1.0;
        }
        let lu = Lu::factor(ipy, p);
        let z1 = lu.solve_matrix(&self.nbar_inf.solve_matrix(&e1));
        let z2 = lu.solve_matrix(&self.nbar_inf.solve_matrix(&e2));
        let r1 = linalg::trace(&z1, p).re;
        let r2 = (linalg::trace(&z2, p) - linalg::trace_of_product(&z1, &z1, p)).re;
        [r0, r1, r2]
    }

    /// `log|det N(x)|` and its first two x-derivatives by Jacobi's formula.
    fn log_det_naive(&self, x: f64, derivs: bool) -> [f64; 3] {
        let p = self.p;
        let h = self.m as usize;
        let r = x.powf(self.xi);
        let beta = self.betas(C64::new(r, 0.0));
        let (a, _) = self.matrix(&beta, false);
        let lu = Lu::factor(a, p);
        let l0 = lu.log_det().ln_abs;
        if !derivs {
            return [l0, 0.0, 0.0];
        }
        let xi = self.xi;
        let zero = C64::new(0.0, 0.0);
        let mut n1 = vec![zero; p * p];
        let mut n2 = vec![zero; p * p];
        for l in 0..p {
            let b = beta[l];
            let eb = b.exp();
            let b1 = b * (xi / x);
            let b2 = b * (xi * (xi - 1.0) / (x * x));
            for row in h + 1..p {
                let w = self.omega_pow(l, row) * eb;
                n1[row * p + l] = w * b1;
                n2[row * p + l] = w * (b2 + b1 * b1);
            }
        }
        let z1 = lu.solve_matrix(&n1);
        let z2 = lu.solve_matrix(&n2);
        let l1 = linalg::trace(&z1, p).re;
        let l2 = (linalg::trace(&z2, p) - linalg::trace_of_product(&z1, &z1, p)).re;
        [l0, l1, l2]
    }

    fn series(&self, x: f64) -> [f64; 3] {
        let mu = self.moments();
        let (mut l0, mut l1, mut l2) = (0.0, 0.0, 0.0);
        // Σ (−1)^{k+1} μ_k x^k / k, summed from the small end
        let mut terms = Vec::with_capacity(N_MOMENTS);
        let mut xk = 1.0; // x^{k-1}
        for (i, m) in mu.iter().enumerate() {
            let k = (i + 1) as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let t1 = sign * m * xk;
            terms.push((t1 * x / k, t1, sign * m * (k - 1.0) * if i == 0 { 0.0 } else { xk / x }));
            xk *= x;
            if (m * xk).abs() < 1e-18 * mu[0] * x.max(1e-300) && i > 2 {
                break;
            }
        }
        for (a, b, c) in terms.iter().rev() {
            l0 += a;
            l1 += b;
            l2 += c;
        }
        [l0, l1, l2]
    }

    fn regime(&self, x: f64) -> Regime {
        if x <= self.series_max() {
            Regime::Series
        } else if (-self.decay * x.powf(self.xi)).exp() > PERTURBATIVE_ENVELOPE {
            Regime::Direct
        } else {
            Regime::Perturbative
        }
    }

    pub fn l_asym(&self, x: f64) -> f64 {
        self.csc * x.powf(self.xi) + self.c_asym
    }

    fn l_asym_derivs(&self, x: f64) -> [f64; 3] {
        let xi = self.xi;
        let a = self.csc * x.powf(xi);
        [a + self.c_asym, a * xi / x, a * xi * (xi - 1.0) / (x * x)]
    }

    /// `L_m` and its first two derivatives.
    pub fn l_derivs(&self, x: f64, derivs: bool) -> [f64; 3] {
        if x == 0.0 {
            let mu = self.moments();
            return [0.0, mu[0], -mu[1]];
        }
        match self.regime(x) {
            Regime::Series => self.series(x),
            Regime::Direct => {
                let d = self.log_det_naive(x, derivs);
                [d[0] - self.log_det0, d[1], d[2]]
            }
            Regime::Perturbative => {
                let a = self.l_asym_derivs(x);
                let r = self.remainder_perturbative(x, derivs);
                [a[0] + r[0], a[1] + r[1], a[2] + r[2]]
            }
        }
    }

    pub fn remainder(&self, x: f64) -> f64 {
        match self.regime(x) {
            Regime::Perturbative => self.remainder_perturbative(x, false)[0],
            _ => self.l_derivs(x, false)[0] - self.l_asym(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Regime {
    Series,
    Direct,
    Perturbative,
}

fn compute_moments(m: u32) -> Vec<f64> {
    let p = 2 * m as usize + 2;
    let kap: Vec<f64> = (1..=MOMENT_REFINED)
        .map(|n| {
            spectrum::kappa(n, m, true, spectrum::DEFAULT_TOL)
                .map(|e| e.kappa)
                .unwrap_or_else(|_| spectrum::kappa_hat(n, m))
        })
        .collect();
    (1..=N_MOMENTS)
        .map(|k| {
            let s: f64 = kap.iter().rev().map(|kn| kn.powi(-(k as i32))).sum();
            let e = (p * k) as f64;
            let tail = PI.powf(-e)
                * hurwitz_zeta(C64::new(e, 0.0), MOMENT_REFINED as f64 + 0.5)
                    .map(|z| z.re)
                    .unwrap_or(0.0);
            s + tail
        })
        .collect()
}

/// `log|det U_m|` for the `(m+1) x (m+1)` Vandermonde matrix in the nodes
/// `e^{2πik/(2m+2)}`, `k = 0..m`, from the product of node differences.
pub fn vandermonde_log_det(m: u32) -> f64 {
    let n = m as usize + 1;
    let p = 2.0 * n as f64;
    (1..n).map(|d| (n - d) as f64 * (2.0 * (PI * d as f64 / p).sin()).ln()).sum()
}

pub fn log_det_u(m: u32) -> f64 {
    kernel(m).log_det_u
}

/// `det N(x)` for complex x, principal `(2m+2)`-th root.
pub fn char_det(m: u32, x: C64) -> LogDet {
    let k = kernel(m);
    let r = if x == C64::new(0.0, 0.0) { x } else { x.powf(k.xi) };
    k.det_from_root(r, false)
}

/// Same determinant, always column-scaled.
pub fn char_det_scaled(m: u32, x: C64) -> LogDet {
    let k = kernel(m);
    let r = if x == C64::new(0.0, 0.0) { x } else { x.powf(k.xi) };
    k.det_from_root(r, true)
}

pub fn l_exact(m: u32, x: f64) -> f64 {
    assert!(x >= 0.0, "L_m is defined for x >= 0");
    kernel(m).l_derivs(x, false)[0]
}

/// `[L, L', L'']` at x.
pub fn l_exact_derivs(m: u32, x: f64) -> [f64; 3] {
    assert!(x >= 0.0, "L_m is defined for x >= 0");
    kernel(m).l_derivs(x, true)
}

pub fn l_asym(m: u32, x: f64) -> f64 {
    kernel(m).l_asym(x)
}

pub fn r_remainder(m: u32, x: f64) -> f64 {
    kernel(m).remainder(x)
}

/// `log|det N(x)| − (m+1) log(2m+2)` from the unscaled matrix; overflows
/// once `Re β` approaches 700.
pub fn l_naive(m: u32, x: f64) -> f64 {
    let k = kernel(m);
    k.log_det_naive(x, false)[0] - k.log_det0
}

/// Same quantity from the column-scaled matrix `N̄(x)`.
pub fn l_stabilized(m: u32, x: f64) -> f64 {
    let k = kernel(m);
    k.det_from_root(C64::new(x.powf(k.xi), 0.0), true).ln_abs - k.log_det0
}

/// Moment `Σ_n κ_n(m)^{−k}` for `1 ≤ k ≤ 64`.
pub fn moment(m: u32, k: usize) -> f64 {
    kernel(m).moments()[k - 1]
}
