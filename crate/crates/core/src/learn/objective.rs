use nalgebra::DVector;

use super::{validate_preferences, validate_sigma, GpPrior};
use crate::error::{Error, Result};
use crate::gauss::{ln_std_cdf, pdf_cdf_ratio};
use crate::world::PreferenceDataset;

/// Per-pair values of the probit negative log-likelihood in the pair
/// difference `d = f(w) − f(l)`.
pub(crate) struct PairTerms {
    pub nll: f64,
    /// `∂nll/∂d` per pair.
    pub slope: Vec<f64>,
    /// `∂²nll/∂d²` per pair, always positive.
    pub curvature: Vec<f64>,
}

pub(crate) fn pair_terms(f: &DVector<f64>, data: &PreferenceDataset, c: f64) -> PairTerms {
    let m = data.len();
    let mut nll = 0.0;
    let mut slope = Vec::with_capacity(m);
    let mut curvature = Vec::with_capacity(m);
    for p in &data.pairs {
        let z = (f[p.winner] - f[p.loser]) / c;
        let lam = pdf_cdf_ratio(z);
        nll -= ln_std_cdf(z);
        slope.push(-lam / c);
        curvature.push(lam * (z + lam) / (c * c));
    }
    PairTerms { nll, slope, curvature }
}

/// `Aᵀ·g`: scatters per-pair values onto the grid (+ at winners, − at
/// losers).
pub(crate) fn scatter(data: &PreferenceDataset, g: &[f64], n: usize) -> DVector<f64> {
    let mut out = DVector::zeros(n);
    for (p, gi) in data.pairs.iter().zip(g) {
        out[p.winner] += gi;
        out[p.loser] -= gi;
    }
    out
}

fn check(prior: &GpPrior, nu: &DVector<f64>, data: &PreferenceDataset, sigma_model: f64) -> Result<()> {
    validate_sigma(sigma_model)?;
    validate_preferences(data, prior.len())?;
    if nu.len() != prior.len() {
        return Err(Error::invalid(format!("utility vector has {} entries, grid has {}", nu.len(), prior.len())));
    }
    Ok(())
}

/// `½(ν−μ₀)ᵀK⁻¹(ν−μ₀) − Σ ln Φ((ν(w)−ν(l))/(√2σ))`, dropping constants.
pub fn neg_log_posterior(
    prior: &GpPrior,
    nu: &DVector<f64>,
    data: &PreferenceDataset,
    sigma_model: f64,
) -> Result<f64> {
    check(prior, nu, data, sigma_model)?;
    let r = nu - prior.mean();
    let w = prior.chol().solve_lower_triangular(&r).ok_or_else(|| Error::NotPsd("singular prior factor".into()))?;
    let c = std::f64::consts::SQRT_2 * sigma_model;
    Ok(0.5 * w.norm_squared() + pair_terms(nu, data, c).nll)
}

/// Gradient of [`neg_log_posterior`] with respect to `nu`.
pub fn neg_log_posterior_gradient(
    prior: &GpPrior,
    nu: &DVector<f64>,
    data: &PreferenceDataset,
    sigma_model: f64,
) -> Result<DVector<f64>> {
    check(prior, nu, data, sigma_model)?;
    let r = nu - prior.mean();
    let l = prior.chol();
    let w = l
        .solve_lower_triangular(&r)
        .and_then(|w| l.transpose().solve_upper_triangular(&w))
        .ok_or_else(|| Error::NotPsd("singular prior factor".into()))?;
    let c = std::f64::consts::SQRT_2 * sigma_model;
    let terms = pair_terms(nu, data, c);
    Ok(w + scatter(data, &terms.slope, nu.len()))
}
