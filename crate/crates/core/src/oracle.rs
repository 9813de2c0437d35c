//! Independent ground truth: `h`, `h′`, `h″` summed straight from the
//! eigenvalue tensor, and Monte Carlo estimates from the series `Σ a_n ξ_n²`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expansion::MSpec;
use crate::laplace;
use crate::special::hurwitz_zeta;
use crate::spectrum::{kappa_hat, kernel_trace, mixed_kappas};
use num_complex::Complex64 as C64;

/// Eigenvalues below this index are refined roots, above it seeds.
pub const REFINED: usize = 20;
/// Cap on the number of tensor terms touched by one evaluation.
pub const TERM_BUDGET: usize = 100_000_000;
const SERIES_FRACTION: f64 = 0.4;
const MAX_MOMENT: usize = 64;

#[derive(Debug, Clone, Serialize)]
pub struct TensorTruncation {
    /// Per-axis counts of the directly summed box (last axis is exact).
    pub counts: Vec<usize>,
    pub tail_bound: f64,
    /// `Σ` over the complement of the box of the product weights.
    pub tail_mean: f64,
}

struct Axis {
    m: u32,
    p: i32,
    kappas: Vec<f64>,
    mu: Vec<f64>,
    trace: f64,
}

impl Axis {
    fn new(m: u32) -> Result<Axis> {
        let kappas = mixed_kappas(m, REFINED, REFINED)?;
        let mu = (1..=MAX_MOMENT).map(|k| laplace::moment(m, k)).collect();
        Ok(Axis { m, p: 2 * m as i32 + 2, kappas, mu, trace: kernel_trace(m) })
    }

    fn kappa(&self, n: usize) -> f64 {
        if n <= REFINED {
            self.kappas[n - 1]
        } else {
            kappa_hat(n, self.m)
        }
    }

    /// `Σ_{n>N} κ_n^{−k}`.
    fn tail(&self, big_n: usize, k: usize) -> f64 {
        let mut s = 0.0;
        for n in big_n + 1..=REFINED {
            s += self.kappas[n - 1].powi(-(k as i32));
        }
        let from = big_n.max(REFINED) as f64 + 0.5;
        let e = (self.p as usize * k) as f64;
        let z = hurwitz_zeta(C64::new(e, 0.0), from).map(|z| z.re).unwrap_or(0.0);
        s + std::f64::consts::PI.powf(-e) * z
    }
}

/// Nested sums `G_r(y) = Σ_n G_{r+1}(y/κ_n)`, `G_{d−1} = L_{m_d}`, so that
/// `h(x) = ½ G_0(2x)`.
struct Tower {
    axes: Vec<Axis>,
    /// `coef[r][k−1] = (−1)^{k+1}/k · Π_{j≥r} μ_k(m_j)`.
    coef: Vec<Vec<f64>>,
    /// Convergence radius of the power series of `G_r`.
    radius: Vec<f64>,
}

struct Eval {
    g: [f64; 3],
    bound: f64,
    terms: usize,
}

impl Tower {
    fn new(ms: &MSpec) -> Result<Tower> {
        let axes = ms.m.iter().map(|&m| Axis::new(m)).collect::<Result<Vec<_>>>()?;
        let d = axes.len();
        let mut coef = vec![Vec::new(); d];
        let mut radius = vec![0.0; d];
        for r in 0..d {
            coef[r] = (1..=MAX_MOMENT)
                .map(|k| {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / k as f64 * axes[r..].iter().map(|a| a.mu[k - 1]).product::<f64>()
                })
                .collect();
            radius[r] = axes[r..].iter().map(|a| a.kappas[0]).product();
        }
        Ok(Tower { axes, coef, radius })
    }

    /// Power series `Σ_k c_k w_k y^k` and derivatives, with the per-term
    /// weights `w_k` supplied.
    fn series(&self, r: usize, y: f64, w: impl Fn(usize) -> f64) -> Eval {
        let mut g = [0.0; 3];
        let mut last = 0.0;
        for k in 1..=MAX_MOMENT {
            let c = self.coef[r][k - 1] * w(k);
            let kf = k as f64;
            let t0 = c * y.powi(k as i32);
            g[0] += t0;
            g[1] += c * kf * y.powi(k as i32 - 1);
            if k >= 2 {
                g[2] += c * kf * (kf - 1.0) * y.powi(k as i32 - 2);
            }
            last = t0.abs();
            if last < 1e-18 * g[0].abs() {
                break;
            }
        }
        Eval { g, bound: last, terms: 0 }
    }

    fn eval(&self, r: usize, y: f64) -> Result<Eval> {
        let d = self.axes.len();
        if r == d - 1 {
            return Ok(Eval { g: laplace::l_exact_derivs(self.axes[r].m, y), bound: 0.0, terms: 1 });
        }
        if y <= SERIES_FRACTION * self.radius[r] {
            return Ok(self.series(r, y, |_| 1.0));
        }
        let axis = &self.axes[r];
        let inner = SERIES_FRACTION * self.radius[r + 1];
        let mut out = Eval { g: [0.0; 3], bound: 0.0, terms: 0 };
        let mut n = 1;
        while y / axis.kappa(n) > inner {
            let k = axis.kappa(n);
            let e = self.eval(r + 1, y / k)?;
            out.g[0] += e.g[0];
            out.g[1] += e.g[1] / k;
            out.g[2] += e.g[2] / (k * k);
            out.bound += e.bound;
            out.terms += e.terms;
            if out.terms > TERM_BUDGET {
                return Err(Error::Budget(format!("tensor sum exceeds {TERM_BUDGET} terms at y = {y}")));
            }
            n += 1;
        }
        let big_n = n - 1;
        let t = self.series(r + 1, y, |k| axis.tail(big_n, k));
        for i in 0..3 {
            out.g[i] += t.g[i];
        }
        out.bound += t.bound;
        Ok(out)
    }

    /// Box counts along the first path of the recursion at argument y.
    fn counts(&self, y: f64) -> Vec<usize> {
        let d = self.axes.len();
        let mut counts = Vec::with_capacity(d);
        let mut y = y;
        for r in 0..d - 1 {
            let inner = SERIES_FRACTION * self.radius[r + 1];
            let mut n = 0;
            if y > SERIES_FRACTION * self.radius[r] {
                while y / self.axes[r].kappa(n + 1) > inner {
                    n += 1;
                }
            }
            counts.push(n);
            y /= self.axes[r].kappa(1);
        }
        counts
    }
}

fn tower(ms: &MSpec) -> Result<Arc<Tower>> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<Vec<u32>, Arc<Tower>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&ms.m) {
        return Ok(t.clone());
    }
    let t = Arc::new(Tower::new(ms)?);
    Ok(cache.lock().unwrap().entry(ms.m.clone()).or_insert(t).clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct HDirect {
    /// `[h, h′, h″]` at x.
    pub h: [f64; 3],
    pub trunc: TensorTruncation,
}

/// `h`, `h′`, `h″` at x from the eigenvalue tensor. Out-of-box sums are
/// carried by exact moment series, so `tail_bound` is a series remainder.
pub fn h_direct_all(ms: &MSpec, x: f64) -> Result<HDirect> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("h is defined for x >= 0, got {x}")));
    }
    let tw = tower(ms)?;
    let e = tw.eval(0, 2.0 * x)?;
    let counts = tw.counts(2.0 * x);
    let d = ms.m.len();
    let tail_mean = if d == 1 {
        0.0
    } else {
        let rest: f64 = tw.axes[1..].iter().map(|a| a.trace).product();
        tw.axes[0].tail(counts[0], 1) * rest
    };
    Ok(HDirect {
        h: [0.5 * e.g[0], e.g[1], 2.0 * e.g[2]],
        trunc: TensorTruncation { counts, tail_bound: 0.5 * e.bound, tail_mean },
    })
}

pub fn h_direct(ms: &MSpec, x: f64, j: u32) -> Result<f64> {
    if j > 2 {
        return Err(Error::InvalidInput(format!("derivative order {j} not in 0..=2")));
    }
    Ok(h_direct_all(ms, x)?.h[j as usize])
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub chunk: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 1_000_000, seed: 42, chunk: 4096 }
    }
}

/// Rectangular box of product weights, sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct WeightBox {
    pub weights: Vec<f64>,
    pub trunc: TensorTruncation,
}

/// Default box: about 4096 weights in total.
pub fn default_counts(ms: &MSpec) -> Vec<usize> {
    let d = ms.m.len() as f64;
    let n = (4096f64.powf(1.0 / d)).round().max(8.0) as usize;
    vec![n; ms.m.len()]
}

pub fn weight_box(ms: &MSpec, counts: &[usize]) -> Result<WeightBox> {
    if counts.len() != ms.m.len() || counts.contains(&0) {
        return Err(Error::InvalidInput("one positive count per axis required".into()));
    }
    let total: usize = counts.iter().product();
    if total > TERM_BUDGET {
        return Err(Error::Budget(format!("box of {total} weights exceeds {TERM_BUDGET}")));
    }
    let mut weights = vec![1.0];
    let mut mu2_full = 1.0;
    for (&m, &c) in ms.m.iter().zip(counts) {
        let inv: Vec<f64> = mixed_kappas(m, c, REFINED)?.into_iter().map(|k| 1.0 / k).collect();
        weights = weights.iter().flat_map(|w| inv.iter().map(move |v| w * v)).collect();
        mu2_full *= laplace::moment(m, 2);
    }
    weights.sort_by(|a, b| b.total_cmp(a));
    let mean: f64 = ms.m.iter().map(|&m| kernel_trace(m)).product();
    let inside: f64 = weights.iter().rev().sum();
    let inside2: f64 = weights.iter().rev().map(|w| w * w).sum();
    let tail_mean = (mean - inside).max(0.0);
    let tail_bound = (2.0 * (mu2_full - inside2).max(0.0)).sqrt();
    Ok(WeightBox { weights, trunc: TensorTruncation { counts: counts.to_vec(), tail_bound, tail_mean } })
}

#[derive(Debug, Clone, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
    /// Rule-of-three 95% upper bound, set when there are no hits.
    pub upper_bound: Option<f64>,
    pub tail_mean: f64,
    /// Standard deviation of the replaced tail, `√(2 Σ_out a²)`.
    pub tail_sd: f64,
    pub counts: Vec<usize>,
    pub tail_bias_note: String,
}

fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Worker count from `SHEETDEV_THREADS`, if set.
pub fn env_threads() -> Option<usize> {
    std::env::var("SHEETDEV_THREADS").ok()?.parse().ok().filter(|&n: &usize| n > 0)
}

fn run_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads.or_else(env_threads) {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn chunks(cfg: &McConfig) -> Result<Vec<(u64, u64)>> {
    if cfg.chunk == 0 || cfg.samples == 0 {
        return Err(Error::InvalidInput("samples and chunk must be positive".into()));
    }
    Ok((0..cfg.samples.div_ceil(cfg.chunk))
        .map(|c| (c * cfg.chunk, ((c + 1) * cfg.chunk).min(cfg.samples)))
        .collect())
}

/// Fraction of samples with `Σ_box a ξ² + tail_mean ≤ ε`.
pub fn mc_smallball(eps: f64, cfg: &McConfig, wb: &WeightBox, threads: Option<usize>) -> Result<McEstimate> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    if cfg.samples < 10_000 {
        return Err(Error::InvalidInput(format!("at least 10^4 samples required, got {}", cfg.samples)));
    }
    let budget = eps - wb.trunc.tail_mean;
    let ranges = chunks(cfg)?;
    let hits: u64 = run_pool(threads, || {
        ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let mut h = 0u64;
                for i in lo..hi {
                    let mut rng = sample_rng(cfg.seed, i);
                    let mut s = 0.0;
                    let mut ok = budget >= 0.0;
                    for w in &wb.weights {
                        let z: f64 = rng.sample(StandardNormal);
                        s += w * z * z;
                        if s > budget {
                            ok = false;
                            break;
                        }
                    }
                    h += ok as u64;
                }
                h
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum()
    })?;
    let n = cfg.samples as f64;
    let p = hits as f64 / n;
    Ok(McEstimate {
        p_hat: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        hits,
        samples: cfg.samples,
        upper_bound: (hits == 0).then(|| 3.0 / n),
        tail_mean: wb.trunc.tail_mean,
        tail_sd: wb.trunc.tail_bound,
        counts: wb.trunc.counts.clone(),
        tail_bias_note: "tail replaced by its mean; the omitted fluctuation has the reported sd".into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct McLaplace {
    /// Estimate of `h(x) = −log E exp(−x V²)`.
    pub h_hat: f64,
    pub stderr: f64,
}

/// `−log` of the sample mean of `exp(−x V²)`.
pub fn mc_laplace(x: f64, cfg: &McConfig, wb: &WeightBox, threads: Option<usize>) -> Result<McLaplace> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be nonnegative, got {x}")));
    }
    let ranges = chunks(cfg)?;
    let parts: Vec<(f64, f64)> = run_pool(threads, || {
        ranges
            .par_iter()
            .map(|&(lo, hi)| {
                let (mut s1, mut s2) = (0.0, 0.0);
                for i in lo..hi {
                    let mut rng = sample_rng(cfg.seed, i);
                    let v: f64 = wb.weights.iter().map(|w| {
                        let z: f64 = rng.sample(StandardNormal);
                        w * z * z
                    }).sum();
                    let e = (-x * (v + wb.trunc.tail_mean)).exp();
                    s1 += e;
                    s2 += e * e;
                }
                (s1, s2)
            })
            .collect()
    })?;
    let n = cfg.samples as f64;
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    Ok(McLaplace { h_hat: -mean.ln(), stderr: (var / n).sqrt() / mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::build_mspec;

    #[test]
    fn one_dim_closed_form() {
        let ms = build_mspec(&[0]).unwrap();
        let h = h_direct(&ms, 2.0, 0).unwrap();
        assert!((h - 0.5 * 2f64.cosh().ln()).abs() < 1e-13);
    }

    #[test]
    fn zero_and_trace() {
        for m in [&[0, 0][..], &[0, 1], &[1, 2], &[0, 0, 0]] {
            let ms = build_mspec(m).unwrap();
            let r = h_direct_all(&ms, 0.0).unwrap();
            let tr: f64 = m.iter().map(|&k| kernel_trace(k)).product();
            assert_eq!(r.h[0], 0.0);
            assert!((r.h[1] / tr - 1.0).abs() < 1e-12, "{m:?}");
        }
    }

    #[test]
    fn two_axis_against_brute_force() {
        let ms = build_mspec(&[0, 0]).unwrap();
        let x = 50.0;
        let n_max = 20000;
        let mut direct: f64 = (1..=n_max).map(|n| 0.5 * laplace::l_exact(0, 2.0 * x / kappa_hat(n, 0))).sum();
        // first-order tail: x · ½ · Σ_{n>N} 1/((n−½)π)²
        direct += 0.5 * x / (std::f64::consts::PI.powi(2) * n_max as f64);
        let h = h_direct(&ms, x, 0).unwrap();
        assert!((h - direct).abs() < 1e-8, "{h} {direct}");
    }

    #[test]
    fn signs() {
        let ms = build_mspec(&[0, 1]).unwrap();
        for x in [0.5, 5.0, 500.0, 5e4] {
            let r = h_direct_all(&ms, x).unwrap();
            assert!(r.h[1] > 0.0 && r.h[2] < 0.0);
        }
    }

    #[test]
    fn box_tail_mean() {
        let ms = build_mspec(&[0, 0]).unwrap();
        let wb = weight_box(&ms, &[8, 8]).unwrap();
        assert_eq!(wb.weights.len(), 64);
        assert!(wb.weights.windows(2).all(|w| w[0] >= w[1]));
        let expect = 0.25 - wb.weights.iter().sum::<f64>();
        assert!((wb.trunc.tail_mean - expect).abs() < 1e-15);
    }

    #[test]
    fn reproducible_across_workers() {
        let ms = build_mspec(&[0]).unwrap();
        let wb = weight_box(&ms, &[100]).unwrap();
        let cfg = McConfig { samples: 20_000, seed: 7, chunk: 999 };
        let a = mc_smallball(0.1, &cfg, &wb, Some(1)).unwrap();
        let b = mc_smallball(0.1, &cfg, &wb, Some(8)).unwrap();
        assert_eq!(a.hits, b.hits);
        let cfg2 = McConfig { chunk: 4096, ..cfg };
        assert_eq!(mc_smallball(0.1, &cfg2, &wb, Some(3)).unwrap().hits, a.hits);
    }

    #[test]
    fn above_mean_is_near_one() {
        let ms = build_mspec(&[0]).unwrap();
        let wb = weight_box(&ms, &[100]).unwrap();
        let cfg = McConfig { samples: 10_000, seed: 1, chunk: 1000 };
        assert!(mc_smallball(5.0, &cfg, &wb, None).unwrap().p_hat > 0.999);
        let z = mc_smallball(1e-3, &cfg, &wb, None).unwrap();
        assert_eq!(z.hits, 0);
        assert_eq!(z.upper_bound, Some(3e-4));
    }
}
