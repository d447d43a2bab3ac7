//! Choice datasets over several latent utilities.
//!
//! Each record contributes two factors: chosen items are pairwise
//! non-dominated, and every rejected item is beaten on each utility by some
//! chosen item. Indicators are smoothed to `Φ(Δ/(√2σ))`. Each utility gets
//! an independent GP prior, and the posterior is a Laplace approximation
//! whose likelihood Hessian is taken by finite differences of the analytic
//! gradient and clipped to the PSD cone (the likelihood is not log-concave).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{validate_sigma, Diagnostics, FitOptions, GpPrior, Method, PosteriorSummary};
use crate::error::{Error, Result};
use crate::gauss::{ln_std_cdf, pdf_cdf_ratio, std_cdf, std_pdf};
use crate::linalg::{clip_to_psd, symmetrize};
use crate::world::ChoiceDataset;

const ARMIJO_C: f64 = 1e-4;
const FD_STEP: f64 = 1e-5;
const MIN_PROB: f64 = 1e-300;

fn validate(data: &ChoiceDataset, d: usize, n: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("need at least one utility"));
    }
    for (k, r) in data.records.iter().enumerate() {
        if r.menu.iter().any(|&i| i >= n) {
            return Err(Error::invalid(format!("record {k} indexes outside grid of {n}")));
        }
        if d == 1 && r.chosen.len() > 1 {
            return Err(Error::invalid(format!("record {k} chooses several acts, impossible with a single utility")));
        }
    }
    Ok(())
}

/// Negative log-likelihood and its gradient in `f` (one vector per utility).
fn nll_and_grad(f: &[DVector<f64>], data: &ChoiceDataset, c: f64, want_grad: bool) -> (f64, Vec<DVector<f64>>) {
    let d = f.len();
    let n = f[0].len();
    let mut grad = if want_grad { vec![DVector::zeros(n); d] } else { Vec::new() };
    let mut nll = 0.0;
    let mut a = vec![0.0; d];
    for r in &data.records {
        // chosen items are pairwise non-dominated
        for (ii, &o) in r.chosen.iter().enumerate() {
            for &v in &r.chosen[ii + 1..] {
                for k in 0..d {
                    a[k] = (f[k][o] - f[k][v]) / c;
                }
                let p: f64 = a.iter().map(|&x| std_cdf(x)).product();
                let q: f64 = a.iter().map(|&x| std_cdf(-x)).product();
                let t =
                    if d == 2 { std_cdf(a[0]) * std_cdf(-a[1]) + std_cdf(-a[0]) * std_cdf(a[1]) } else { 1.0 - p - q }
                        .max(MIN_PROB);
                nll -= t.ln();
                if want_grad {
                    for k in 0..d {
                        let others_p: f64 = (0..d).filter(|&j| j != k).map(|j| std_cdf(a[j])).product();
                        let others_q: f64 = (0..d).filter(|&j| j != k).map(|j| std_cdf(-a[j])).product();
                        let dt = std_pdf(a[k]) * (others_q - others_p);
                        let g = -dt / t / c;
                        grad[k][o] += g;
                        grad[k][v] -= g;
                    }
                }
            }
        }
        // each rejected item is beaten on every utility by some chosen item
        for v in r.rejected() {
            for k in 0..d {
                if r.chosen.len() == 1 {
                    let o = r.chosen[0];
                    let b = (f[k][o] - f[k][v]) / c;
                    nll -= ln_std_cdf(b);
                    if want_grad {
                        let g = -pdf_cdf_ratio(b) / c;
                        grad[k][o] += g;
                        grad[k][v] -= g;
                    }
                    continue;
                }
                let s: f64 = r.chosen.iter().map(|&o| ln_std_cdf((f[k][v] - f[k][o]) / c)).sum();
                let u = (-s.exp_m1()).max(MIN_PROB);
                nll -= u.ln();
                if want_grad {
                    let ratio = s.exp() / u;
                    for &o in &r.chosen {
                        let b = (f[k][v] - f[k][o]) / c;
                        let g = ratio * pdf_cdf_ratio(b) / c;
                        grad[k][v] += g;
                        grad[k][o] -= g;
                    }
                }
            }
        }
    }
    (nll, grad)
}

fn check_matrix(prior: &GpPrior, nu: &[DVector<f64>]) -> Result<()> {
    if nu.is_empty() {
        return Err(Error::invalid("need at least one utility"));
    }
    if nu.iter().any(|v| v.len() != prior.len()) {
        return Err(Error::invalid("utility vectors must match the grid"));
    }
    Ok(())
}

/// Sum over utilities of the prior quadratic forms plus the smoothed
/// choice negative log-likelihood, dropping constants.
pub fn neg_log_posterior_choice(
    prior: &GpPrior,
    nu: &[DVector<f64>],
    data: &ChoiceDataset,
    sigma_model: f64,
) -> Result<f64> {
    validate_sigma(sigma_model)?;
    check_matrix(prior, nu)?;
    validate(data, nu.len(), prior.len())?;
    let mut total = 0.0;
    for row in nu {
        let w = prior
            .chol()
            .solve_lower_triangular(&(row - prior.mean()))
            .ok_or_else(|| Error::NotPsd("singular prior factor".into()))?;
        total += 0.5 * w.norm_squared();
    }
    let c = std::f64::consts::SQRT_2 * sigma_model;
    Ok(total + nll_and_grad(nu, data, c, false).0)
}

pub fn neg_log_posterior_choice_gradient(
    prior: &GpPrior,
    nu: &[DVector<f64>],
    data: &ChoiceDataset,
    sigma_model: f64,
) -> Result<Vec<DVector<f64>>> {
    validate_sigma(sigma_model)?;
    check_matrix(prior, nu)?;
    validate(data, nu.len(), prior.len())?;
    let c = std::f64::consts::SQRT_2 * sigma_model;
    let (_, mut grad) = nll_and_grad(nu, data, c, true);
    let l = prior.chol();
    for (g, row) in grad.iter_mut().zip(nu) {
        let w = l
            .solve_lower_triangular(&(row - prior.mean()))
            .and_then(|w| l.transpose().solve_upper_triangular(&w))
            .ok_or_else(|| Error::NotPsd("singular prior factor".into()))?;
        *g += w;
    }
    Ok(grad)
}

fn stack(v: &[DVector<f64>]) -> DVector<f64> {
    DVector::from_iterator(v.iter().map(|x| x.len()).sum(), v.iter().flat_map(|x| x.iter().copied()))
}

fn unstack(v: &DVector<f64>, d: usize) -> Vec<DVector<f64>> {
    let n = v.len() / d;
    (0..d).map(|k| v.rows(k * n, n).clone_owned()).collect()
}

/// Central finite-difference Hessian of the likelihood term, restricted to
/// grid points that appear in the data.
fn likelihood_hessian(f: &[DVector<f64>], data: &ChoiceDataset, c: f64, active: &[usize]) -> DMatrix<f64> {
    let d = f.len();
    let n = f[0].len();
    let mut h = DMatrix::zeros(d * n, d * n);
    let mut work = f.to_vec();
    for k in 0..d {
        for &i in active {
            let step = FD_STEP * f[k][i].abs().max(1.0);
            let base = work[k][i];
            work[k][i] = base + step;
            let gp = stack(&nll_and_grad(&work, data, c, true).1);
            work[k][i] = base - step;
            let gm = stack(&nll_and_grad(&work, data, c, true).1);
            work[k][i] = base;
            let col = (gp - gm) / (2.0 * step);
            h.set_column(k * n + i, &col);
        }
    }
    symmetrize(&mut h);
    clip_to_psd(&h)
}

pub fn fit_choice(
    data: &ChoiceDataset,
    d: usize,
    kernel: &crate::world::KernelConfig,
    sigma_model: f64,
    grid: &crate::world::ActGrid,
) -> Result<Vec<PosteriorSummary>> {
    let opts = FitOptions { max_newton_iterations: 200, ..FitOptions::default() };
    fit_choice_with_prior(&GpPrior::new(kernel, grid)?, data, d, sigma_model, &opts)
}

/// Laplace posterior for `d` independent utilities; returns one marginal
/// summary per utility.
pub fn fit_choice_with_prior(
    prior: &GpPrior,
    data: &ChoiceDataset,
    d: usize,
    sigma_model: f64,
    opts: &FitOptions,
) -> Result<Vec<PosteriorSummary>> {
    fit_choice_from(prior, data, d, sigma_model, opts, None)
}

/// Best of `n_starts` fits: one from the prior mean, the rest from prior
/// draws. The choice likelihood is multimodal (and symmetric under
/// relabelling the utilities), so a single Newton run can stop in a poor
/// mode. Starts that fail are skipped; the error of the first start is
/// returned if all fail.
pub fn fit_choice_multistart<R: Rng + ?Sized>(
    prior: &GpPrior,
    data: &ChoiceDataset,
    d: usize,
    sigma_model: f64,
    opts: &FitOptions,
    n_starts: usize,
    rng: &mut R,
) -> Result<Vec<PosteriorSummary>> {
    if n_starts == 0 {
        return Err(Error::invalid("need at least one start"));
    }
    let n = prior.len();
    let mut inits: Vec<Option<Vec<DVector<f64>>>> = vec![None];
    for _ in 1..n_starts {
        let draw = (0..d)
            .map(|_| {
                let e = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                prior.mean() + prior.chol() * e
            })
            .collect();
        inits.push(Some(draw));
    }
    let fits: Vec<Result<(f64, Vec<PosteriorSummary>)>> = inits
        .par_iter()
        .map(|init| {
            let post = fit_choice_from(prior, data, d, sigma_model, opts, init.as_deref())?;
            let means: Vec<_> = post.iter().map(|p| p.mean.clone()).collect();
            Ok((neg_log_posterior_choice(prior, &means, data, sigma_model)?, post))
        })
        .collect();
    let mut best: Option<(f64, Vec<PosteriorSummary>)> = None;
    let mut first_err = None;
    for fit in fits {
        match fit {
            Ok((v, post)) => {
                if best.as_ref().is_none_or(|(b, _)| v < *b) {
                    best = Some((v, post));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some((_, post)), _) => Ok(post),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("at least one start ran"),
    }
}

/// As [`fit_choice_with_prior`], with Newton started at `init` (one vector
/// per utility) instead of the prior mean.
pub fn fit_choice_from(
    prior: &GpPrior,
    data: &ChoiceDataset,
    d: usize,
    sigma_model: f64,
    opts: &FitOptions,
    init: Option<&[DVector<f64>]>,
) -> Result<Vec<PosteriorSummary>> {
    validate_sigma(sigma_model)?;
    let n = prior.len();
    validate(data, d, n)?;
    let c = std::f64::consts::SQRT_2 * sigma_model;
    let l = prior.chol();
    let mut active: Vec<usize> = data.records.iter().flat_map(|r| r.menu.iter().copied()).collect();
    active.sort_unstable();
    active.dedup();

    let to_f =
        |z: &DVector<f64>| -> Vec<DVector<f64>> { unstack(z, d).iter().map(|zk| prior.mean() + l * zk).collect() };
    let objective = |z: &DVector<f64>| 0.5 * z.norm_squared() + nll_and_grad(&to_f(z), data, c, false).0;
    // Lbᵀ·v for block-diagonal Lb
    let lt_times = |v: &DVector<f64>| -> DVector<f64> {
        stack(&unstack(v, d).iter().map(|vk| l.transpose() * vk).collect::<Vec<_>>())
    };
    let block_l = {
        let mut b = DMatrix::zeros(d * n, d * n);
        for k in 0..d {
            b.view_mut((k * n, k * n), (n, n)).copy_from(l);
        }
        b
    };

    let mut z = match init {
        None => DVector::zeros(d * n),
        Some(f0) => {
            check_matrix(prior, f0)?;
            if f0.len() != d {
                return Err(Error::invalid("initial point must have one vector per utility"));
            }
            let parts = f0
                .iter()
                .map(|fk| {
                    l.solve_lower_triangular(&(fk - prior.mean()))
                        .ok_or_else(|| Error::NotPsd("singular prior factor".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            stack(&parts)
        }
    };
    let mut psi = objective(&z);
    let mut diagnostics = Diagnostics::default();
    let mut hess_f = DMatrix::zeros(d * n, d * n);
    for iter in 0..=opts.max_newton_iterations {
        let f = to_f(&z);
        let grad = &z + lt_times(&stack(&nll_and_grad(&f, data, c, true).1));
        diagnostics.iterations = iter;
        diagnostics.grad_norm = grad.norm();
        hess_f = likelihood_hessian(&f, data, c, &active);
        if diagnostics.grad_norm < opts.grad_tol || iter == opts.max_newton_iterations {
            diagnostics.converged = diagnostics.grad_norm < opts.grad_tol;
            break;
        }
        let mut hess = block_l.transpose() * &hess_f * &block_l;
        for i in 0..d * n {
            hess[(i, i)] += 1.0;
        }
        symmetrize(&mut hess);
        let chol = nalgebra::Cholesky::new(hess).ok_or(Error::IndefiniteHessian)?;
        let step = -chol.solve(&grad);
        let slope = grad.dot(&step);
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
            // no further decrease representable; report where we stopped
            break;
        }
    }
    if !diagnostics.converged && diagnostics.grad_norm > opts.grad_tol.sqrt() {
        return Err(Error::NoConvergence { iterations: diagnostics.iterations, grad_norm: diagnostics.grad_norm });
    }

    // Σ = Lb (I + Lbᵀ H Lb)⁻¹ Lbᵀ
    let mut inner = block_l.transpose() * &hess_f * &block_l;
    for i in 0..d * n {
        inner[(i, i)] += 1.0;
    }
    symmetrize(&mut inner);
    let chol = nalgebra::Cholesky::new(inner).ok_or(Error::IndefiniteHessian)?;
    let w = chol.l().solve_lower_triangular(&block_l.transpose()).ok_or(Error::IndefiniteHessian)?;
    let cov = w.transpose() * w;
    let f = to_f(&z);
    Ok((0..d)
        .map(|k| PosteriorSummary {
            method: Method::Laplace,
            grid: prior.grid().clone(),
            mean: f[k].clone(),
            cov: PosteriorSummary::finish_cov(cov.view((k * n, k * n), (n, n)).clone_owned()),
            kernel: *prior.kernel(),
            sigma_model,
            diagnostics,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::neg_log_posterior;
    use crate::world::{ActGrid, ChoiceRecord, KernelConfig, Preference, PreferenceDataset};

    fn prior() -> GpPrior {
        let grid = ActGrid::linspace(1.0, 9.0, 8).unwrap();
        GpPrior::new(&KernelConfig::new(1.0, 1.5).unwrap(), &grid).unwrap()
    }

    #[test]
    fn binary_single_utility_matches_preference_objective() {
        let p = prior();
        let prefs = PreferenceDataset::new(vec![Preference::new(1, 5).unwrap(), Preference::new(6, 2).unwrap()]);
        let choices = ChoiceDataset::from(&prefs);
        let nu = DVector::from_fn(8, |i, _| (i as f64 * 0.7).sin());
        let a = neg_log_posterior(&p, &nu, &prefs, 0.8).unwrap();
        let b = neg_log_posterior_choice(&p, &[nu], &choices, 0.8).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn all_chosen_menu_has_no_rejection_factor() {
        let p = prior();
        let data = ChoiceDataset::new(vec![ChoiceRecord::new(vec![0, 3], vec![0, 3]).unwrap()]);
        let zero = vec![DVector::zeros(8), DVector::zeros(8)];
        let v = neg_log_posterior_choice(&p, &zero, &data, 1.0).unwrap();
        // 1 − ¼ − ¼ at equal utilities
        assert!((v - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn multistart_needs_a_start_and_checks_the_initial_point() {
        let p = prior();
        let data = ChoiceDataset::new(vec![ChoiceRecord::new(vec![0, 3], vec![3]).unwrap()]);
        let opts = FitOptions::default();
        assert!(fit_choice_multistart(&p, &data, 2, 0.5, &opts, 0, &mut crate::rng::seeded(1)).is_err());
        let short = [DVector::zeros(8)];
        assert!(fit_choice_from(&p, &data, 2, 0.5, &opts, Some(&short)).is_err());
        let fit = fit_choice_multistart(&p, &data, 2, 0.5, &opts, 3, &mut crate::rng::seeded(1)).unwrap();
        assert_eq!(fit.len(), 2);
    }

    #[test]
    fn single_utility_rejects_multi_choice() {
        let p = prior();
        let data = ChoiceDataset::new(vec![ChoiceRecord::new(vec![0, 3], vec![0, 3]).unwrap()]);
        assert!(neg_log_posterior_choice(&p, &[DVector::zeros(8)], &data, 1.0).is_err());
    }
}
