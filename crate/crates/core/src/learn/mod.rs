//! Gaussian-process posteriors over the latent utility.
//!
//! Pairwise preferences enter through a probit likelihood
//! `Φ((ν(w) − ν(l)) / (√2·σ))`. Three approximations are provided: the MAP
//! point estimate, the Laplace approximation around it, and expectation
//! propagation. Choice datasets over several utilities use a Laplace fit of
//! the smoothed non-domination likelihood.
//!
//! The SE kernel matrix on a fine grid is numerically singular, so no fit
//! ever forms `K⁻¹`. Newton runs in whitened coordinates `f = μ₀ + L·z` and
//! EP runs in the space of pair differences.

mod choice;
mod ep;
mod io;
mod newton;
mod objective;

pub use choice::{
    fit_choice, fit_choice_from, fit_choice_multistart, fit_choice_with_prior, neg_log_posterior_choice,
    neg_log_posterior_choice_gradient,
};
pub use ep::{fit_ep, fit_ep_with_prior};
pub use newton::{fit_laplace, fit_laplace_with_prior, fit_map, fit_map_with_prior};
pub use objective::{neg_log_posterior, neg_log_posterior_gradient};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gauss::BivariateBelief;
use crate::linalg::{cholesky_with_jitter, symmetrize};
use crate::world::{ActGrid, KernelConfig, PreferenceDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Map,
    Laplace,
    Ep,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Map, Method::Laplace, Method::Ep];

    pub fn name(self) -> &'static str {
        match self {
            Method::Map => "map",
            Method::Laplace => "laplace",
            Method::Ep => "ep",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "map" => Ok(Method::Map),
            "laplace" => Ok(Method::Laplace),
            "ep" => Ok(Method::Ep),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Optimiser and EP settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_newton_iterations: usize,
    pub grad_tol: f64,
    pub max_backtracks: usize,
    pub ep_tol: f64,
    pub ep_max_sweeps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_newton_iterations: 50, grad_tol: 1e-8, max_backtracks: 50, ep_tol: 1e-6, ep_max_sweeps: 100 }
    }
}

/// How a fit ended.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Diagnostics {
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Prior mean and covariance on a grid with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GpPrior {
    grid: ActGrid,
    kernel: KernelConfig,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl GpPrior {
    pub fn new(kernel: &KernelConfig, grid: &ActGrid) -> Result<Self> {
        kernel.validate()?;
        let mut cov = kernel.covariance(grid);
        let (chol, extra) = cholesky_with_jitter(&cov, 0.0)?;
        for i in 0..cov.nrows() {
            cov[(i, i)] += extra;
        }
        Ok(Self { grid: grid.clone(), kernel: *kernel, mean: kernel.mean_vector(grid), cov, chol: chol.l() })
    }

    pub fn grid(&self) -> &ActGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &KernelConfig {
        &self.kernel
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Prior covariance, equal to `L·Lᵀ` for the stored factor.
    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower Cholesky factor of [`GpPrior::cov`].
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// The prior itself, as a posterior summary with no data.
    pub fn summary(&self, method: Method, sigma_model: f64) -> PosteriorSummary {
        let n = self.len();
        let cov = match method {
            Method::Map => DMatrix::zeros(n, n),
            _ => self.cov.clone(),
        };
        PosteriorSummary {
            method,
            grid: self.grid.clone(),
            mean: self.mean.clone(),
            cov,
            kernel: self.kernel,
            sigma_model,
            diagnostics: Diagnostics { converged: true, ..Diagnostics::default() },
        }
    }
}

pub(crate) fn validate_preferences(data: &PreferenceDataset, n: usize) -> Result<()> {
    if let Some(max) = data.max_index() {
        if max >= n {
            return Err(Error::invalid(format!("preference index {max} outside grid of {n}")));
        }
    }
    if data.pairs.iter().any(|p| p.winner == p.loser) {
        return Err(Error::invalid("preference pairs an act with itself"));
    }
    Ok(())
}

pub(crate) fn validate_sigma(sigma_model: f64) -> Result<()> {
    if !(sigma_model > 0.0) || !sigma_model.is_finite() {
        return Err(Error::invalid(format!("model sigma must be > 0, got {sigma_model}")));
    }
    Ok(())
}

/// Posterior mean and covariance of the latent utility over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub method: Method,
    pub grid: ActGrid,
    pub mean: DVector<f64>,
    /// All zeros for MAP.
    pub cov: DMatrix<f64>,
    pub kernel: KernelConfig,
    pub sigma_model: f64,
    pub diagnostics: Diagnostics,
}

impl PosteriorSummary {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Marginal standard deviations, with round-off negatives clamped.
    pub fn std_devs(&self) -> DVector<f64> {
        self.cov.diagonal().map(|v| v.max(0.0).sqrt())
    }

    /// Grid index of the largest posterior mean (lowest index on ties).
    pub fn argmax_mean(&self) -> usize {
        crate::world::argmax(self.mean.as_slice())
    }

    pub(crate) fn finish_cov(mut cov: DMatrix<f64>) -> DMatrix<f64> {
        symmetrize(&mut cov);
        cov
    }
}

/// Joint marginal of `(ν(x), ν(o))`.
pub fn marginal_pair(post: &PosteriorSummary, x: usize, o: usize) -> Result<BivariateBelief> {
    let n = post.len();
    if x >= n || o >= n {
        return Err(Error::invalid(format!("index outside grid of {n}")));
    }
    if x == o {
        return Err(Error::invalid("marginal pair needs two distinct acts"));
    }
    let c = &post.cov;
    // clamp round-off on the diagonal; off-diagonal kept within the PSD bound
    let k_xx = c[(x, x)].max(0.0);
    let k_oo = c[(o, o)].max(0.0);
    let bound = (k_xx * k_oo).sqrt();
    let k_xo = c[(x, o)].clamp(-bound, bound);
    BivariateBelief::new(post.mean[x], post.mean[o], k_xx, k_oo, k_xo)
}
