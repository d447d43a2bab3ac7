use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::objective::{pair_terms, scatter};
use super::{validate_preferences, validate_sigma, Diagnostics, FitOptions, GpPrior, Method, PosteriorSummary};
use crate::error::{Error, Result};
use crate::world::{ActGrid, KernelConfig, PreferenceDataset};

const ARMIJO_C: f64 = 1e-4;

/// Rows `√h_i·(L[w_i,:] − L[l_i,:])`, the likelihood curvature pushed into
/// whitened coordinates.
fn whitened_rows(l: &DMatrix<f64>, data: &PreferenceDataset, curvature: &[f64]) -> DMatrix<f64> {
    let n = l.ncols();
    let mut m = DMatrix::zeros(data.len(), n);
    for (i, (p, h)) in data.pairs.iter().zip(curvature).enumerate() {
        let s = h.sqrt();
        for j in 0..n {
            m[(i, j)] = s * (l[(p.winner, j)] - l[(p.loser, j)]);
        }
    }
    m
}

/// `I + M·Mᵀ`, factored.
fn inner_factor(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let mut b = m * m.transpose();
    for i in 0..b.nrows() {
        b[(i, i)] += 1.0;
    }
    Cholesky::new(b).ok_or(Error::IndefiniteHessian)
}

struct Mode {
    f: DVector<f64>,
    diagnostics: Diagnostics,
}

fn find_mode(prior: &GpPrior, data: &PreferenceDataset, sigma_model: f64, opts: &FitOptions) -> Result<Mode> {
    validate_sigma(sigma_model)?;
    validate_preferences(data, prior.len())?;
    let n = prior.len();
    let l = prior.chol();
    let c = std::f64::consts::SQRT_2 * sigma_model;
    let to_f = |z: &DVector<f64>| prior.mean() + l * z;
    let objective = |z: &DVector<f64>| 0.5 * z.norm_squared() + pair_terms(&to_f(z), data, c).nll;

    let mut z = DVector::zeros(n);
    let mut psi = objective(&z);
    let mut grad_norm = f64::INFINITY;
    for iter in 0..=opts.max_newton_iterations {
        let f = to_f(&z);
        let terms = pair_terms(&f, data, c);
        let grad = &z + l.transpose() * scatter(data, &terms.slope, n);
        grad_norm = grad.norm();
        if grad_norm < opts.grad_tol {
            return Ok(Mode { f, diagnostics: Diagnostics { iterations: iter, grad_norm, converged: true } });
        }
        if iter == opts.max_newton_iterations {
            break;
        }
        // (I + MᵀM)⁻¹ g = g − Mᵀ (I + M Mᵀ)⁻¹ M g
        let m = whitened_rows(l, data, &terms.curvature);
        let inner = inner_factor(&m)?;
        let mg = &m * &grad;
        let step = -(&grad - m.transpose() * inner.solve(&mg));
        let slope = grad.dot(&step);

        // At the round-off floor the Armijo test is meaningless; the full
        // Newton step is taken inside the quadratic basin.
        if -slope < 1e-13 * psi.abs().max(1.0) {
            z += step;
            psi = objective(&z);
            continue;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            let cand = &z + t * &step;
            let val = objective(&cand);
            if val <= psi + ARMIJO_C * t * slope {
                z = cand;
                psi = val;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::NoConvergence { iterations: iter, grad_norm });
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_newton_iterations, grad_norm })
}

pub fn fit_map(
    data: &PreferenceDataset,
    kernel: &KernelConfig,
    sigma_model: f64,
    grid: &ActGrid,
) -> Result<PosteriorSummary> {
    fit_map_with_prior(&GpPrior::new(kernel, grid)?, data, sigma_model, &FitOptions::default())
}

/// Posterior mode, with an all-zero covariance.
pub fn fit_map_with_prior(
    prior: &GpPrior,
    data: &PreferenceDataset,
    sigma_model: f64,
    opts: &FitOptions,
) -> Result<PosteriorSummary> {
    let mode = find_mode(prior, data, sigma_model, opts)?;
    let n = prior.len();
    Ok(PosteriorSummary {
        method: Method::Map,
        grid: prior.grid().clone(),
        mean: mode.f,
        cov: DMatrix::zeros(n, n),
        kernel: *prior.kernel(),
        sigma_model,
        diagnostics: mode.diagnostics,
    })
}

pub fn fit_laplace(
    data: &PreferenceDataset,
    kernel: &KernelConfig,
    sigma_model: f64,
    grid: &ActGrid,
) -> Result<PosteriorSummary> {
    fit_laplace_with_prior(&GpPrior::new(kernel, grid)?, data, sigma_model, &FitOptions::default())
}

/// Gaussian centred at the mode with covariance `(K⁻¹ + H)⁻¹`, evaluated
/// as `K − K·Sᵀ(I + S·K·Sᵀ)⁻¹·S·K` so that `K` is never inverted.
pub fn fit_laplace_with_prior(
    prior: &GpPrior,
    data: &PreferenceDataset,
    sigma_model: f64,
    opts: &FitOptions,
) -> Result<PosteriorSummary> {
    let mode = find_mode(prior, data, sigma_model, opts)?;
    let l = prior.chol();
    let cov = if data.is_empty() {
        prior.cov().clone()
    } else {
        let c = std::f64::consts::SQRT_2 * sigma_model;
        let terms = pair_terms(&mode.f, data, c);
        let m = whitened_rows(l, data, &terms.curvature);
        let inner = inner_factor(&m)?;
        // V = L Mᵀ; Σ = K − V B⁻¹ Vᵀ = K − (Lb⁻¹Vᵀ)ᵀ(Lb⁻¹Vᵀ)
        let v = l * m.transpose();
        let w = inner.l().solve_lower_triangular(&v.transpose()).ok_or(Error::IndefiniteHessian)?;
        prior.cov() - w.transpose() * w
    };
    Ok(PosteriorSummary {
        method: Method::Laplace,
        grid: prior.grid().clone(),
        mean: mode.f,
        cov: PosteriorSummary::finish_cov(cov),
        kernel: *prior.kernel(),
        sigma_model,
        diagnostics: mode.diagnostics,
    })
}
