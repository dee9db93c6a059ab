//! Maximum-likelihood GEV estimation.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::Gev;
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::stats;

/// Smallest sample accepted by [`fit`].
pub const MIN_FIT_SIZE: usize = 20;

const EULER_GAMMA: f64 = 0.5772;
const START_TAU: f64 = 0.1;

/// Fitted parameters with standard errors from the observed information.
/// Standard errors are `None` when the numerical Hessian is not positive
/// definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub tau: f64,
    pub sigma: f64,
    pub mu: f64,
    pub se_tau: Option<f64>,
    pub se_sigma: Option<f64>,
    pub se_mu: Option<f64>,
    pub n_fit: usize,
    pub loglik: f64,
}

impl GevParams {
    /// Parameters taken from elsewhere (a reference table, a config) with
    /// no fit diagnostics attached.
    pub fn fixed(tau: f64, sigma: f64, mu: f64) -> Result<Self> {
        Gev::new(tau, sigma, mu)?;
        Ok(GevParams {
            tau,
            sigma,
            mu,
            se_tau: None,
            se_sigma: None,
            se_mu: None,
            n_fit: 0,
            loglik: f64::NAN,
        })
    }

    pub fn dist(&self) -> Gev {
        Gev {
            tau: self.tau,
            sigma: self.sigma,
            mu: self.mu,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub x_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        let nm = NelderMeadOptions::default();
        FitOptions {
            max_iterations: nm.max_iterations,
            x_tolerance: nm.x_tolerance,
        }
    }
}

/// Gumbel method-of-moments start with the shape nudged to 0.1, pulled back
/// toward zero if that would leave a data point outside the support.
pub fn start_point(data: &[f64]) -> Result<Gev> {
    let sd = stats::sample_sd(data);
    if !(sd > 0.0) {
        return Err(Error::Degenerate);
    }
    let sigma = sd * 6f64.sqrt() / std::f64::consts::PI;
    let mu = stats::mean(data) - EULER_GAMMA * sigma;
    let mut tau = START_TAU;
    let lowest = data.iter().copied().fold(f64::INFINITY, f64::min);
    let highest = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    loop {
        let g = Gev { tau, sigma, mu };
        if g.in_support(lowest) && g.in_support(highest) {
            return Ok(g);
        }
        tau *= 0.5;
        if tau < 1e-4 {
            return Ok(Gev { tau: 0.0, sigma, mu });
        }
    }
}

pub fn fit(data: &[f64]) -> Result<GevParams> {
    fit_with(data, FitOptions::default())
}

pub fn fit_with(data: &[f64], opts: FitOptions) -> Result<GevParams> {
    if data.len() < MIN_FIT_SIZE {
        return Err(Error::TooShort {
            needed: MIN_FIT_SIZE,
            got: data.len(),
        });
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in fit sample".into()));
    }
    let start = start_point(data)?;

    // Search over (τ, ln σ, μ) so the scale stays positive.
    let objective = |p: &[f64]| -> f64 {
        let g = Gev {
            tau: p[0],
            sigma: p[1].exp(),
            mu: p[2],
        };
        -g.loglik_unchecked(data)
    };
    let nm_opts = NelderMeadOptions {
        max_iterations: opts.max_iterations,
        x_tolerance: opts.x_tolerance,
    };
    let mut x = vec![start.tau, start.sigma.ln(), start.mu];
    let mut steps = vec![0.05, 0.1, 0.25 * start.sigma];
    let mut total_iterations = 0;
    // A second pass from the first optimum guards against a collapsed simplex.
    for _ in 0..2 {
        let m = nelder_mead(objective, &x, &steps, nm_opts);
        total_iterations += m.iterations;
        if !m.converged || !m.value.is_finite() {
            return Err(Error::NonConvergence {
                iterations: total_iterations,
            });
        }
        x = m.x;
        steps = vec![0.01, 0.02, 0.05 * x[1].exp()];
    }

    let best = Gev {
        tau: x[0],
        sigma: x[1].exp(),
        mu: x[2],
    };
    let loglik = best.loglik_unchecked(data);
    let se = standard_errors(&best, data);
    Ok(GevParams {
        tau: best.tau,
        sigma: best.sigma,
        mu: best.mu,
        se_tau: se.map(|s| s[0]),
        se_sigma: se.map(|s| s[1]),
        se_mu: se.map(|s| s[2]),
        n_fit: data.len(),
        loglik,
    })
}

/// Square roots of the diagonal of the inverse observed information, with
/// the Hessian of −loglik in (τ, σ, μ) taken by central differences.
fn standard_errors(at: &Gev, data: &[f64]) -> Option<[f64; 3]> {
    let theta = Vector3::new(at.tau, at.sigma, at.mu);
    let nll = |p: &Vector3<f64>| -> f64 {
        if p[1] <= 0.0 {
            return f64::INFINITY;
        }
        -Gev {
            tau: p[0],
            sigma: p[1],
            mu: p[2],
        }
        .loglik_unchecked(data)
    };
    let h = theta.map(|v| (1e-4 * v.abs()).max(1e-5));
    let shifted = |i: usize, di: f64, j: usize, dj: f64| {
        let mut p = theta;
        p[i] += di;
        p[j] += dj;
        nll(&p)
    };

    let mut hess = Matrix3::zeros();
    let f0 = nll(&theta);
    for i in 0..3 {
        for j in i..3 {
            let v = if i == j {
                (shifted(i, h[i], i, 0.0) - 2.0 * f0 + shifted(i, -h[i], i, 0.0)) / (h[i] * h[i])
            } else {
                (shifted(i, h[i], j, h[j]) - shifted(i, h[i], j, -h[j]) - shifted(i, -h[i], j, h[j])
                    + shifted(i, -h[i], j, -h[j]))
                    / (4.0 * h[i] * h[j])
            };
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    if hess.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let cov = hess.cholesky()?.inverse();
    let var = cov.diagonal();
    if var.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    Some([var[0].sqrt(), var[1].sqrt(), var[2].sqrt()])
}
