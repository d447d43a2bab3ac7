mod common;

use assistgame_core::harness::{run_fig9, ExperimentConfig};
use assistgame_core::learn::{
    fit_choice_from, fit_choice_multistart, fit_ep, fit_laplace, neg_log_posterior, neg_log_posterior_choice,
    neg_log_posterior_choice_gradient, neg_log_posterior_gradient, FitOptions,
};
use assistgame_core::rng::seeded;
use assistgame_core::stats::kendall_tau;
use assistgame_core::world::{
    generate_choices, generate_preferences, sample_utility, ActGrid, HumanConfig, KernelConfig, Preference,
    PreferenceDataset,
};
use assistgame_core::{GpPrior, Method};
use common::{cdf, integrate};
use nalgebra::DVector;
use rand::Rng;

const FD_STEP: f64 = 1e-6;

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

#[test]
fn preference_gradient_matches_finite_differences() {
    let grid = ActGrid::linspace(1.0, 9.0, 12).unwrap();
    let prior = GpPrior::new(&KernelConfig::new(1.0, 2.0).unwrap(), &grid).unwrap();
    let truth = sample_utility(prior.kernel(), &grid, 1, 1).unwrap();
    let mut rng = seeded(1);
    let data = generate_preferences(&truth, &HumanConfig::probit(0.5).unwrap(), 25, &mut rng).unwrap();
    for _ in 0..20 {
        let nu = DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
        let g = neg_log_posterior_gradient(&prior, &nu, &data, 0.7).unwrap();
        let fd = DVector::from_fn(12, |i, _| {
            let (mut p, mut m) = (nu.clone(), nu.clone());
            p[i] += FD_STEP;
            m[i] -= FD_STEP;
            let f = |v: &DVector<f64>| neg_log_posterior(&prior, v, &data, 0.7).unwrap();
            (f(&p) - f(&m)) / (2.0 * FD_STEP)
        });
        assert!(rel_err(&g, &fd) < 1e-5, "{}", rel_err(&g, &fd));
    }
}

#[test]
fn choice_gradient_matches_finite_differences() {
    let grid = ActGrid::linspace(1.0, 9.0, 10).unwrap();
    let prior = GpPrior::new(&KernelConfig::default(), &grid).unwrap();
    let truth = sample_utility(prior.kernel(), &grid, 2, 2).unwrap();
    let mut rng = seeded(2);
    let data = generate_choices(&truth, 3, 30, &mut rng).unwrap();
    for _ in 0..20 {
        let nu: Vec<DVector<f64>> = (0..2).map(|_| DVector::from_fn(10, |_, _| rng.random_range(-2.0..2.0))).collect();
        let g = neg_log_posterior_choice_gradient(&prior, &nu, &data, 0.5).unwrap();
        for k in 0..2 {
            let fd = DVector::from_fn(10, |i, _| {
                let (mut p, mut m) = (nu.clone(), nu.clone());
                p[k][i] += FD_STEP;
                m[k][i] -= FD_STEP;
                let f = |v: &[DVector<f64>]| neg_log_posterior_choice(&prior, v, &data, 0.5).unwrap();
                (f(&p) - f(&m)) / (2.0 * FD_STEP)
            });
            assert!(rel_err(&g[k], &fd) < 1e-5, "{}", rel_err(&g[k], &fd));
        }
    }
}

#[test]
fn ep_single_pair_matches_tilted_moments() {
    let grid = ActGrid::linspace(0.0, 3.0, 4).unwrap();
    let kernel = KernelConfig::new(1.3, 1.0).unwrap();
    let sigma = 0.6;
    let data = PreferenceDataset::new(vec![Preference::new(1, 3).unwrap()]);
    let post = fit_ep(&data, &kernel, sigma, &grid).unwrap();
    let k = kernel.covariance(&grid);
    let v = k[(1, 1)] + k[(3, 3)] - 2.0 * k[(1, 3)];
    let s = v.sqrt();
    let density = |d: f64| (-0.5 * d * d / v).exp() * cdf(d / (2f64.sqrt() * sigma));
    let z = integrate(density, -12.0 * s, 12.0 * s, &[0.0]);
    let mean = integrate(|d| d * density(d), -12.0 * s, 12.0 * s, &[0.0]) / z;
    let second = integrate(|d| d * d * density(d), -12.0 * s, 12.0 * s, &[0.0]) / z;
    let got_mean = post.mean[1] - post.mean[3];
    let got_var = post.cov[(1, 1)] + post.cov[(3, 3)] - 2.0 * post.cov[(1, 3)];
    assert!((got_mean - mean).abs() < 1e-4, "{got_mean} vs {mean}");
    assert!((got_var - (second - mean * mean)).abs() < 1e-4);
}

#[test]
fn ep_and_laplace_mostly_agree_on_decisions() {
    let cfg = ExperimentConfig { n_sims: 300, methods: vec![Method::Laplace, Method::Ep], ..Default::default() };
    let r = run_fig9(&cfg).unwrap();
    let action = |m: Method, sim: usize| {
        let row = r.rows.iter().find(|row| row.method == m && row.sim == sim).unwrap();
        row.outcome.as_ref().map(|(d, _, _)| d.action).ok()
    };
    let agree = (0..cfg.n_sims).filter(|&s| action(Method::Laplace, s) == action(Method::Ep, s)).count();
    assert!(agree as f64 > 0.8 * cfg.n_sims as f64, "{agree}/{}", cfg.n_sims);
}

#[test]
fn noiseless_preferences_recover_the_ranking() {
    let grid = ActGrid::linspace(1.0, 9.0, 50).unwrap();
    let kernel = KernelConfig::default();
    let truth = sample_utility(&kernel, &grid, 1, 4).unwrap();
    let data = generate_preferences(&truth, &HumanConfig::rational(), 200, &mut seeded(4)).unwrap();
    let post = fit_laplace(&data, &kernel, 0.1, &grid).unwrap();
    let tau = kendall_tau(post.mean.as_slice(), truth.row(0)).unwrap();
    assert!(tau >= 0.9, "tau {tau}");
}

#[test]
fn multistart_is_never_worse_than_one_start() {
    let grid = ActGrid::linspace(1.0, 9.0, 20).unwrap();
    let kernel = KernelConfig::default();
    let prior = GpPrior::new(&kernel, &grid).unwrap();
    let truth = sample_utility(&kernel, &grid, 2, 5).unwrap();
    let data = generate_choices(&truth, 2, 40, &mut seeded(5)).unwrap();
    let opts = FitOptions { max_newton_iterations: 200, ..FitOptions::default() };
    let objective = |fit: &[assistgame_core::PosteriorSummary]| {
        let means: Vec<_> = fit.iter().map(|p| p.mean.clone()).collect();
        neg_log_posterior_choice(&prior, &means, &data, 0.1).unwrap()
    };
    let single = fit_choice_from(&prior, &data, 2, 0.1, &opts, None).unwrap();
    let multi = fit_choice_multistart(&prior, &data, 2, 0.1, &opts, 6, &mut seeded(6)).unwrap();
    assert!(objective(&multi) <= objective(&single) + 1e-9);
}
