use std::hint::black_box;

use assistgame_core::game::{
    decide, expected_payoffs_probit, expected_payoffs_semiorder, mc_expected_payoffs, McSettings,
};
use assistgame_core::learn::{fit_ep, fit_laplace, fit_map};
use assistgame_core::rng::seeded;
use assistgame_core::world::{generate_preferences, sample_utility_with, ActGrid, HumanConfig, KernelConfig};
use assistgame_core::BivariateBelief;
use criterion::{criterion_group, criterion_main, Criterion};

fn belief() -> BivariateBelief {
    BivariateBelief::new(0.3, -0.1, 0.8, 0.5, 0.2).unwrap()
}

fn closed_forms(c: &mut Criterion) {
    let b = belief();
    c.bench_function("probit_payoffs_and_decide", |bn| {
        bn.iter(|| decide(&expected_payoffs_probit(black_box(&b), black_box(0.5))).unwrap())
    });
    c.bench_function("semiorder_payoffs", |bn| {
        bn.iter(|| expected_payoffs_semiorder(black_box(&b), black_box(0.2), black_box(0.1)).unwrap())
    });
}

fn monte_carlo(c: &mut Criterion) {
    let b = belief();
    let settings = McSettings::new(0.5, 100_000, 7).with_semiorder(0.2, 0.1);
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.bench_function("payoffs_100k", |bn| bn.iter(|| mc_expected_payoffs(black_box(&b), &settings).unwrap()));
    g.finish();
}

fn fits(c: &mut Criterion) {
    let kernel = KernelConfig::default();
    let grid = ActGrid::linspace(0.0, 1.0, 30).unwrap();
    let mut rng = seeded(11);
    let nu = sample_utility_with(&kernel, &grid, 1, &mut rng).unwrap();
    let human = HumanConfig::probit(0.1).unwrap();
    let prefs = generate_preferences(&nu, &human, 40, &mut rng).unwrap();

    let mut g = c.benchmark_group("fit_30_acts_40_prefs");
    g.sample_size(20);
    g.bench_function("map", |bn| bn.iter(|| fit_map(black_box(&prefs), &kernel, 0.1, &grid).unwrap()));
    g.bench_function("laplace", |bn| bn.iter(|| fit_laplace(black_box(&prefs), &kernel, 0.1, &grid).unwrap()));
    g.bench_function("ep", |bn| bn.iter(|| fit_ep(black_box(&prefs), &kernel, 0.1, &grid).unwrap()));
    g.finish();
}

criterion_group!(benches, closed_forms, monte_carlo, fits);
criterion_main!(benches);
