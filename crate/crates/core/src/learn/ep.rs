//! Expectation propagation with one probit site per preference.
//!
//! Sites live on the pair differences `g = A·f`, whose prior is
//! `N(0, G = A·K·Aᵀ)` because the constant prior mean cancels. Updates are
//! sequential with rank-one covariance refreshes; the covariance is
//! recomputed from scratch after every sweep to stop round-off drift.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{validate_preferences, validate_sigma, Diagnostics, FitOptions, GpPrior, Method, PosteriorSummary};
use crate::error::{Error, Result};
use crate::gauss::pdf_cdf_ratio;
use crate::world::{ActGrid, KernelConfig, PreferenceDataset};

/// Floor on site and cavity precisions.
const MIN_PRECISION: f64 = 1e-300;

/// `K·Aᵀ`: column `i` is `K[:, w_i] − K[:, l_i]`.
fn k_at(k: &DMatrix<f64>, data: &PreferenceDataset) -> DMatrix<f64> {
    let n = k.nrows();
    let mut u = DMatrix::zeros(n, data.len());
    for (i, p) in data.pairs.iter().enumerate() {
        for r in 0..n {
            u[(r, i)] = k[(r, p.winner)] - k[(r, p.loser)];
        }
    }
    u
}

/// `A·U` for `U = K·Aᵀ`, i.e. `G`.
fn a_times(u: &DMatrix<f64>, data: &PreferenceDataset) -> DMatrix<f64> {
    let m = data.len();
    let mut g = DMatrix::zeros(m, u.ncols());
    for (i, p) in data.pairs.iter().enumerate() {
        for j in 0..u.ncols() {
            g[(i, j)] = u[(p.winner, j)] - u[(p.loser, j)];
        }
    }
    g
}

/// Factor of `B = I + S̃·G·S̃` with `S̃ = diag(√τ̃)`.
fn b_factor(g: &DMatrix<f64>, sqrt_tau: &DVector<f64>) -> Result<Cholesky<f64, Dyn>> {
    let m = g.nrows();
    let mut b = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            b[(i, j)] = sqrt_tau[i] * g[(i, j)] * sqrt_tau[j];
        }
        b[(i, i)] += 1.0;
    }
    Cholesky::new(b).ok_or_else(|| Error::NotPsd("EP inner matrix".into()))
}

/// Posterior over the differences from the current sites.
fn recompute(g: &DMatrix<f64>, tau: &DVector<f64>, nu: &DVector<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let sqrt_tau = tau.map(|t| t.max(0.0).sqrt());
    let lb = b_factor(g, &sqrt_tau)?.l();
    let mut sg = g.clone();
    for i in 0..g.nrows() {
        sg.row_mut(i).scale_mut(sqrt_tau[i]);
    }
    let v = lb.solve_lower_triangular(&sg).ok_or_else(|| Error::NotPsd("EP factor".into()))?;
    let sigma = g - v.transpose() * v;
    let mu = &sigma * nu;
    Ok((sigma, mu))
}

pub fn fit_ep(
    data: &PreferenceDataset,
    kernel: &KernelConfig,
    sigma_model: f64,
    grid: &ActGrid,
) -> Result<PosteriorSummary> {
    fit_ep_with_prior(&GpPrior::new(kernel, grid)?, data, sigma_model, &FitOptions::default())
}

/// EP posterior. A run that hits the sweep limit is still returned, with
/// `diagnostics.converged` false.
pub fn fit_ep_with_prior(
    prior: &GpPrior,
    data: &PreferenceDataset,
    sigma_model: f64,
    opts: &FitOptions,
) -> Result<PosteriorSummary> {
    validate_sigma(sigma_model)?;
    validate_preferences(data, prior.len())?;
    if data.is_empty() {
        return Ok(prior.summary(Method::Ep, sigma_model));
    }
    let m = data.len();
    let c2 = 2.0 * sigma_model * sigma_model;
    let k = prior.cov();
    let u = k_at(k, data);
    let g = a_times(&u, data);

    let mut tau: DVector<f64> = DVector::zeros(m);
    let mut nu: DVector<f64> = DVector::zeros(m);
    let mut sigma = g.clone();
    let mut mu: DVector<f64> = DVector::zeros(m);
    let mut diagnostics = Diagnostics::default();

    for sweep in 1..=opts.ep_max_sweeps {
        let mut max_delta: f64 = 0.0;
        for i in 0..m {
            let s_ii = sigma[(i, i)];
            let tau_cav = 1.0 / s_ii - tau[i];
            if tau_cav <= MIN_PRECISION {
                continue;
            }
            let nu_cav = mu[i] / s_ii - nu[i];
            let v_cav = 1.0 / tau_cav;
            let m_cav = nu_cav * v_cav;
            let den = (c2 + v_cav).sqrt();
            let z = m_cav / den;
            let lam = pdf_cdf_ratio(z);
            let m_hat = m_cav + v_cav * lam / den;
            let v_hat = v_cav - v_cav * v_cav * lam * (z + lam) / (den * den);
            if !(v_hat > 0.0) {
                continue;
            }
            let tau_new = (1.0 / v_hat - tau_cav).max(0.0);
            let nu_new = m_hat / v_hat - nu_cav;
            let d_tau = tau_new - tau[i];
            let d_nu = nu_new - nu[i];
            max_delta = max_delta.max(d_tau.abs()).max(d_nu.abs());
            tau[i] = tau_new;
            nu[i] = nu_new;

            let col = sigma.column(i).clone_owned();
            let scale = d_tau / (1.0 + d_tau * s_ii);
            sigma.ger(-scale, &col, &col, 1.0);
            mu = &sigma * &nu;
        }
        let (s, mean) = recompute(&g, &tau, &nu)?;
        sigma = s;
        mu = mean;
        diagnostics.iterations = sweep;
        diagnostics.grad_norm = max_delta;
        if max_delta < opts.ep_tol {
            diagnostics.converged = true;
            break;
        }
    }

    // f | sites: mean μ₀ + U·(ν̃ − S̃B⁻¹S̃Gν̃), cov K − (U S̃) B⁻¹ (U S̃)ᵀ
    let sqrt_tau = tau.map(|t: f64| t.max(0.0).sqrt());
    let chol_b = b_factor(&g, &sqrt_tau)?;
    let s_g_nu = (&g * &nu).component_mul(&sqrt_tau);
    let alpha = &nu - chol_b.solve(&s_g_nu).component_mul(&sqrt_tau);
    let mean = prior.mean() + &u * alpha;

    let mut us = u;
    for j in 0..m {
        us.column_mut(j).scale_mut(sqrt_tau[j]);
    }
    let w = chol_b.l().solve_lower_triangular(&us.transpose()).ok_or_else(|| Error::NotPsd("EP factor".into()))?;
    let cov = k - w.transpose() * w;

    Ok(PosteriorSummary {
        method: Method::Ep,
        grid: prior.grid().clone(),
        mean,
        cov: PosteriorSummary::finish_cov(cov),
        kernel: *prior.kernel(),
        sigma_model,
        diagnostics,
    })
}
