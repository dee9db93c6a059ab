//! Generalized extreme value distribution.
//!
//! Shape convention: `G(x) = exp[−(1 + τ(x − μ)/σ)^(−1/τ)]`, so `τ > 0` is
//! the heavy (Fréchet) tail, `τ < 0` is bounded above (Weibull) and `τ → 0`
//! is Gumbel. Left tails are modelled as the maxima of negated minima, so a
//! left-tail parameter set describes loss magnitudes directly.

mod fit;

pub use fit::{fit, fit_with, start_point, FitOptions, GevParams, MIN_FIT_SIZE};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |τ| the Gumbel limit (with a first-order correction) is used.
pub const GUMBEL_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gev {
    pub tau: f64,
    pub sigma: f64,
    pub mu: f64,
}

impl Gev {
    pub fn new(tau: f64, sigma: f64, mu: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("scale must be positive, got {sigma}")));
        }
        if !tau.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidInput("GEV parameters must be finite".into()));
        }
        Ok(Gev { tau, sigma, mu })
    }

    /// `(1/τ)·ln(1 + τz)`, i.e. `−ln t(x)`; `None` outside the support.
    fn log_scale(&self, z: f64) -> Option<f64> {
        let tz = self.tau * z;
        if self.tau.abs() < GUMBEL_EPS && tz.abs() < 1e-3 {
            return Some(z * (1.0 - 0.5 * tz));
        }
        if tz <= -1.0 {
            return None;
        }
        Some(tz.ln_1p() / self.tau)
    }

    /// Lower support endpoint, `μ − σ/τ` for τ > 0.
    pub fn lower_bound(&self) -> f64 {
        if self.tau > 0.0 {
            self.mu - self.sigma / self.tau
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn upper_bound(&self) -> f64 {
        if self.tau < 0.0 {
            self.mu - self.sigma / self.tau
        } else {
            f64::INFINITY
        }
    }

    pub fn in_support(&self, x: f64) -> bool {
        self.log_scale((x - self.mu) / self.sigma).is_some()
    }

    /// `t(x) = (1 + τz)^(−1/τ)`; 0 above an upper endpoint, +inf below a
    /// lower one.
    fn t(&self, x: f64) -> f64 {
        match self.log_scale((x - self.mu) / self.sigma) {
            Some(s) => (-s).exp(),
            None if self.tau > 0.0 => f64::INFINITY,
            None => 0.0,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (-self.t(x)).exp()
    }

    /// `1 − cdf(x)` without cancellation in the far tail.
    pub fn survival(&self, x: f64) -> f64 {
        -(-self.t(x)).exp_m1()
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::ProbabilityOutOfRange(q));
        }
        Ok(self.quantile_unchecked(q))
    }

    /// Quantile for `q` already known to lie in (0, 1).
    pub(crate) fn quantile_unchecked(&self, q: f64) -> f64 {
        // y = −ln(−ln q); (−ln q)^(−τ) = exp(τy)
        let y = -(-q.ln()).ln();
        self.from_reduced(y)
    }

    /// Upper quantile with exceedance probability `p`, computed from
    /// `ln(1 − p)` directly so that tiny `p` keeps full precision.
    pub(crate) fn upper_quantile(&self, p: f64) -> f64 {
        let y = -(-(-p).ln_1p()).ln();
        self.from_reduced(y)
    }

    fn from_reduced(&self, y: f64) -> f64 {
        let ty = self.tau * y;
        let k = if self.tau.abs() < GUMBEL_EPS && ty.abs() < 1e-3 {
            y * (1.0 + 0.5 * ty)
        } else {
            ty.exp_m1() / self.tau
        };
        self.mu + self.sigma * k
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self.log_scale((x - self.mu) / self.sigma) {
            Some(s) => -self.sigma.ln() - (self.tau + 1.0) * s - (-s).exp(),
            None => f64::NEG_INFINITY,
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    /// Sum of log densities; `-inf` if any point lies outside the support.
    pub fn loglik(&self, data: &[f64]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::InvalidInput("log-likelihood of an empty sample".into()));
        }
        Ok(self.loglik_unchecked(data))
    }

    pub(crate) fn loglik_unchecked(&self, data: &[f64]) -> f64 {
        let mut total = 0.0;
        for &x in data {
            let l = self.log_density(x);
            if l == f64::NEG_INFINITY {
                return l;
            }
            total += l;
        }
        total
    }

    /// Inverse-CDF draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| self.quantile_unchecked(rng.sample(Open01)))
            .collect()
    }

    /// Probability that a block minimum lies at or below `x`, when `self`
    /// was fitted on negated minima.
    pub fn cdf_min(&self, x: f64) -> f64 {
        self.survival(-x)
    }
}

/// Log-likelihood of `data` under `params`.
pub fn loglik(params: &Gev, data: &[f64]) -> Result<f64> {
    params.loglik(data)
}

/// `count` seeded inverse-CDF draws.
pub fn sample(params: &Gev, count: usize, seed: u64) -> Vec<f64> {
    params.sample(count, seed)
}
