//! Dense complex LU with log-magnitude determinant bookkeeping.

use num_complex::Complex64 as C64;

/// Determinant stored as `phase * exp(ln_abs)`; a singular matrix has
/// `ln_abs = -inf` and zero phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub ln_abs: f64,
    pub phase: C64,
}

impl LogDet {
    pub fn value(&self) -> C64 {
        if self.ln_abs == f64::NEG_INFINITY {
            C64::new(0.0, 0.0)
        } else {
            self.phase * self.ln_abs.exp()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_abs == f64::NEG_INFINITY
    }
}

/// Row-major LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
    odd: bool,
    singular: bool,
}

impl Lu {
    pub fn factor(mut a: Vec<C64>, n: usize) -> Lu {
        assert_eq!(a.len(), n * n, "matrix storage does not match dimension");
        let mut perm: Vec<usize> = (0..n).collect();
        let mut odd = false;
        let mut singular = false;
        for k in 0..n {
            let mut p = k;
            let mut best = a[k * n + k].norm();
            for i in k + 1..n {
                let v = a[i * n + k].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                singular = true;
                continue;
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                odd = !odd;
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / piv;
                a[i * n + k] = f;
                if f == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in k + 1..n {
                    let t = a[k * n + j];
                    a[i * n + j] -= f * t;
                }
            }
        }
        Lu { n, lu: a, perm, odd, singular }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn log_det(&self) -> LogDet {
        if self.singular {
            return LogDet { ln_abs: f64::NEG_INFINITY, phase: C64::new(0.0, 0.0) };
        }
        let mut ln_abs = 0.0;
        let mut phase = if self.odd { C64::new(-1.0, 0.0) } else { C64::new(1.0, 0.0) };
        for k in 0..self.n {
            let d = self.lu[k * self.n + k];
            let r = d.norm();
            ln_abs += r.ln();
            phase *= d / r;
        }
        phase /= phase.norm();
        LogDet { ln_abs, phase }
    }

    /// Solves `A x = b` in place. Panics on a singular factorization.
    pub fn solve(&self, b: &mut [C64]) {
        assert!(!self.singular, "solve on singular matrix");
        let n = self.n;
        let pb: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&pb);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }

    /// Returns `A^{-1} B` for a row-major `n x n` right-hand side.
    pub fn solve_matrix(&self, b: &[C64]) -> Vec<C64> {
        let n = self.n;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        let mut col = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            for i in 0..n {
                col[i] = b[i * n + j];
            }
            self.solve(&mut col);
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        out
    }
}

pub fn log_det(a: Vec<C64>, n: usize) -> LogDet {
    Lu::factor(a, n).log_det()
}

/// `log(1 + z)` without cancellation for small `z`.
pub fn clog1p(z: C64) -> C64 {
    let re = 0.5 * (2.0 * z.re + z.norm_sqr()).ln_1p();
    let im = z.im.atan2(1.0 + z.re);
    C64::new(re, im)
}

/// `log det(I + Y)` for small `Y`, eliminating without pivoting so the
/// identity stays implicit and each pivot contributes `log1p`.
pub fn log_det_identity_plus(mut y: Vec<C64>, n: usize) -> C64 {
    assert_eq!(y.len(), n * n);
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..n {
        let dk = y[k * n + k];
        acc += clog1p(dk);
        let piv = C64::new(1.0, 0.0) + dk;
        for i in k + 1..n {
            let f = y[i * n + k] / piv;
            for j in k + 1..n {
                let t = y[k * n + j];
                y[i * n + j] -= f * t;
            }
        }
    }
    acc
}

/// Trace of a row-major square matrix.
pub fn trace(a: &[C64], n: usize) -> C64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &[C64], b: &[C64], n: usize) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            s += a[i * n + k] * b[k * n + i];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn det_of_small_matrix() {
        let a = vec![c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)];
        let d = log_det(a, 2).value();
        assert!((d - c(-1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_is_exact_zero() {
        let a = vec![c(1.0, 2.0), c(2.0, 4.0), c(0.5, 1.0), c(1.0, 2.0)];
        let d = log_det(a, 2);
        assert!(d.is_zero());
        assert_eq!(d.value(), c(0.0, 0.0));
    }

    #[test]
    fn solve_recovers_rhs() {
        let a = vec![
            c(2.0, 1.0), c(0.0, 1.0), c(1.0, 0.0),
            c(1.0, 0.0), c(3.0, 0.0), c(0.0, -1.0),
            c(0.0, 2.0), c(1.0, 1.0), c(4.0, 0.0),
        ];
        let x = [c(1.0, -1.0), c(0.5, 2.0), c(-3.0, 0.0)];
        let mut b = vec![c(0.0, 0.0); 3];
        for i in 0..3 {
            for j in 0..3 {
                b[i] += a[i * 3 + j] * x[j];
            }
        }
        let lu = Lu::factor(a, 3);
        lu.solve(&mut b);
        for i in 0..3 {
            assert!((b[i] - x[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_plus_matches_plain_det() {
        let y = vec![c(1e-3, 2e-4), c(-3e-4, 1e-4), c(5e-4, 0.0), c(2e-3, -1e-3)];
        let mut a = y.clone();
        a[0] += 1.0;
        a[3] += 1.0;
        let plain = log_det(a, 2);
        let fast = log_det_identity_plus(y, 2);
        assert!((fast.re - plain.ln_abs).abs() < 1e-15);
        assert!((C64::from_polar(1.0, fast.im) - plain.phase).norm() < 1e-14);
    }

    #[test]
    fn clog1p_is_accurate_for_tiny_arguments() {
        let z = c(1e-20, -3e-20);
        let l = clog1p(z);
        assert!((l.re - 1e-20).abs() < 1e-35);
        assert!((l.im + 3e-20).abs() < 1e-35);
    }
}
