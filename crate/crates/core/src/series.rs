//! Truncated power series with real coefficients.

#[derive(Debug, Clone, PartialEq)]
pub struct Series(pub Vec<f64>);

impl Series {
    pub fn one(len: usize) -> Series {
        let mut c = vec![0.0; len];
        if len > 0 {
            c[0] = 1.0;
        }
        Series(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0.get(k).copied().unwrap_or(0.0)
    }

    /// Product truncated to the shorter length.
    pub fn mul(&self, other: &Series) -> Series {
        let n = self.len().min(other.len());
        let mut c = vec![0.0; n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] += self.0[i] * other.0[j];
            }
        }
        Series(c)
    }

    pub fn powi(&self, e: usize) -> Series {
        let mut acc = Series::one(self.len());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }
}

/// Taylor coefficients of `s sin(πs)/π` at `s0`, up to order `len − 1`.
pub fn s_sin_pi_s(s0: f64, len: usize) -> Series {
    use std::f64::consts::PI;
    // (s sin πs)^{(j)} = s π^j sin(πs + jπ/2) + j π^{j−1} sin(πs + (j−1)π/2)
    let mut c = Vec::with_capacity(len);
    let mut fact = 1.0;
    for j in 0..len {
        if j > 0 {
            fact *= j as f64;
        }
        let jf = j as f64;
        let mut d = s0 * PI.powi(j as i32) * (PI * s0 + jf * PI / 2.0).sin();
        if j > 0 {
            d += jf * PI.powi(j as i32 - 1) * (PI * s0 + (jf - 1.0) * PI / 2.0).sin();
        }
        c.push(d / (PI * fact));
    }
    Series(c)
}
