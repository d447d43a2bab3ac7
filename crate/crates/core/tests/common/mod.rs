//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use assistgame_core::learn::Diagnostics;
use assistgame_core::world::{ActGrid, KernelConfig};
use assistgame_core::{BivariateBelief, Method, PosteriorSummary};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

const TARGET: f64 = 1e-14;
/// Gaussian mass beyond this many standard deviations is below 1e-300.
pub const TAIL: f64 = 38.0;

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Double-exponential quadrature of `f` over `[lo, hi]`, split at `breaks`.
pub fn integrate(f: impl Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    let mut pts = vec![lo];
    pts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| quadrature::double_exponential::integrate(&f, w[0], w[1], TARGET).integral).sum()
}

/// Standard normal CDF from the series `½ + φ(z)·Σ z^(2n+1)/(2n+1)!!`,
/// whose terms are all positive for `z > 0`. Beyond `|z| = 10` the tail is
/// below 1e-23 and is dropped.
pub fn cdf(z: f64) -> f64 {
    if z < 0.0 {
        return 1.0 - cdf(-z);
    }
    if z > 10.0 {
        return 1.0;
    }
    let (mut term, mut sum, mut k) = (z, z, 1.0);
    while term > 1e-17 * sum {
        k += 2.0;
        term *= z * z / k;
        sum += term;
    }
    0.5 + phi(z) * sum
}

/// Half-width of the range where `φ` carries mass above 1e-30.
const GAUSS_RANGE: f64 = 12.0;

/// `∫ g(x) φ(x) dx` over the real line, in unit panels plus extra
/// breakpoints.
pub fn gauss_expect(g: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let mut b: Vec<f64> = (-11..=11).map(f64::from).collect();
    b.extend_from_slice(breaks);
    integrate(|x| g(x) * phi(x), -GAUSS_RANGE, GAUSS_RANGE, &b)
}

/// A random belief with a nonsingular covariance and correlation in
/// `(-0.9, 0.9)`.
pub fn random_belief<R: Rng>(rng: &mut R) -> BivariateBelief {
    let k_xx: f64 = rng.random_range(0.05..2.0);
    let k_oo: f64 = rng.random_range(0.05..2.0);
    let rho: f64 = rng.random_range(-0.9..0.9);
    BivariateBelief::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        k_xx,
        k_oo,
        rho * (k_xx * k_oo).sqrt(),
    )
    .unwrap()
}

/// A posterior that puts all mass on `values`.
pub fn dirac(values: &[f64]) -> PosteriorSummary {
    let n = values.len();
    PosteriorSummary {
        method: Method::Map,
        grid: ActGrid::linspace(0.0, 1.0, n).unwrap(),
        mean: DVector::from_column_slice(values),
        cov: DMatrix::zeros(n, n),
        kernel: KernelConfig::default(),
        sigma_model: 1.0,
        diagnostics: Diagnostics::default(),
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sample mean and standard error of `g(ν(x), ν(o), n(x), n(o))` over `n`
/// joint draws from the belief and independent `N(0, σ²)` noise.
pub fn mc_mean(
    b: &BivariateBelief,
    sigma: f64,
    n: usize,
    seed: u64,
    g: impl Fn(f64, f64, f64, f64) -> f64,
) -> (f64, f64) {
    use rand_distr::StandardNormal;
    let mut rng = assistgame_core::rng::seeded(seed);
    let l11 = b.k_xx.sqrt();
    let l21 = if l11 > 0.0 { b.k_xo / l11 } else { 0.0 };
    let l22 = (b.k_oo - l21 * l21).max(0.0).sqrt();
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let nx: f64 = rng.sample(StandardNormal);
        let no: f64 = rng.sample(StandardNormal);
        let vx = b.mu_x + l11 * e1;
        let vo = b.mu_o + l21 * e1 + l22 * e2;
        let v = g(vx, vo, sigma * nx, sigma * no);
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sq / n as f64 - mean * mean).max(0.0) * n as f64 / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `|estimate − value|` in standard errors; 0 when both agree exactly.
pub fn z(est: (f64, f64), value: f64) -> f64 {
    let gap = (est.0 - value).abs();
    if gap == 0.0 {
        0.0
    } else {
        gap / est.1
    }
}
