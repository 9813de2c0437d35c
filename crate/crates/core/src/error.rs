use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no sign change bracketing root n={n} for m={m} in t-range [{lo}, {hi}]")]
    Bracket { m: u32, n: usize, lo: f64, hi: f64 },

    #[error("quadrature did not converge: achieved error {achieved:e} (target {target:e})")]
    Quadrature { achieved: f64, target: f64 },

    #[error("{what} did not converge after {iters} iterations (last residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("s = {re}{im:+}i is within {dist:e} of the pole at {pole}")]
    PoleProximity { re: f64, im: f64, pole: f64, dist: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("correction denominator collapsed at step {step}: |den| = {den:e}")]
    DenominatorCollapse { step: usize, den: f64 },

    #[error("truncation budget exceeded: {0}")]
    Budget(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by the caller's arguments rather than by numerics.
    pub fn is_input(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Domain(_) | Error::PoleProximity { .. })
    }
}
