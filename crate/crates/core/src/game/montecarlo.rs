//! Monte Carlo estimates of the game payoffs, used to check every closed
//! form.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ExpectedPayoffs;
use crate::error::{Error, Result};
use crate::gauss::BivariateBelief;
use crate::learn::{marginal_pair, PosteriorSummary};
use crate::rng::substream;
use crate::world::GroundTruthUtility;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 10_000;

/// Band width and imprecision penalty for the semiorder payoffs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiorderSettings {
    pub sigma: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    /// Noise of the human's comparison.
    pub sigma: f64,
    /// Also estimate the semiorder deferral branches.
    pub semiorder: Option<SemiorderSettings>,
    pub n_samples: usize,
    pub seed: u64,
    /// Samples per substream. Results depend on `(seed, n_samples,
    /// block_size)` only, not on the thread count.
    pub block_size: usize,
}

impl McSettings {
    pub fn new(sigma: f64, n_samples: usize, seed: u64) -> Self {
        Self { sigma, semiorder: None, n_samples, seed, block_size: 1 << 16 }
    }

    pub fn with_semiorder(mut self, sigma: f64, epsilon: f64) -> Self {
        self.semiorder = Some(SemiorderSettings { sigma, epsilon });
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples, got {}", self.n_samples)));
        }
        if self.block_size == 0 {
            return Err(Error::invalid("block size must be positive"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if let Some(s) = self.semiorder {
            if !(s.sigma > 0.0) || !s.sigma.is_finite() || !(s.epsilon > 0.0 && s.epsilon <= s.sigma) {
                return Err(Error::invalid(format!(
                    "semiorder needs sigma > 0 and epsilon in (0, sigma], got {} and {}",
                    s.sigma, s.epsilon
                )));
            }
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    /// `|mean − value|` in standard errors; exact agreement with zero SE
    /// gives 0.
    pub fn z_score(&self, value: f64) -> f64 {
        let gap = (self.mean - value).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.se
        }
    }

    pub fn agrees_with(&self, value: f64, n_se: f64) -> bool {
        self.z_score(value) <= n_se
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McReport {
    pub def: Estimate,
    pub imm: Estimate,
    pub don: Estimate,
    /// `P(ν(x)+n(x) > ν(o)+n(o))`.
    pub dominance: Estimate,
    /// `E[ν(x)·1{x wins}]`.
    pub winner_utility: Estimate,
    /// `E[max(ν(x), ν(o))]`.
    pub natural: Estimate,
    /// Semiorder deferral when indifference resolves to `x`.
    pub semiorder_x: Option<Estimate>,
    pub semiorder_o: Option<Estimate>,
    pub n_samples: usize,
}

impl McReport {
    pub fn payoffs(&self) -> ExpectedPayoffs {
        ExpectedPayoffs::scalar(self.def.mean, self.imm.mean, self.don.mean)
    }
}

/// Welford accumulator, merged with Chan's rule.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n / n;
        self.m2 += other.m2 + delta * delta * self.n * other.n / n;
        self.n = n;
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1.0 { (self.m2 / (self.n - 1.0)).max(0.0) } else { 0.0 };
        Estimate { mean: self.mean, se: (var / self.n).sqrt() }
    }
}

const N_STATS: usize = 8;

/// Cholesky factor of the 2×2 belief covariance.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairSampler {
    mu_x: f64,
    mu_o: f64,
    a: f64,
    b: f64,
    c: f64,
}

impl PairSampler {
    pub(crate) fn new(belief: &BivariateBelief) -> Self {
        let a = belief.k_xx.max(0.0).sqrt();
        let (b, c) = if a > 0.0 {
            let b = belief.k_xo / a;
            (b, (belief.k_oo - b * b).max(0.0).sqrt())
        } else {
            (0.0, belief.k_oo.max(0.0).sqrt())
        };
        Self { mu_x: belief.mu_x, mu_o: belief.mu_o, a, b, c }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        (self.mu_x + self.a * z1, self.mu_o + self.b * z1 + self.c * z2)
    }
}

/// `1`, `½` or `0` as the noisy `x` beats, ties or loses to `o`.
pub(crate) fn noisy_win<R: Rng + ?Sized>(vx: f64, vo: f64, sigma: f64, rng: &mut R) -> f64 {
    let (nx, no) = if sigma > 0.0 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        (sigma * a, sigma * b)
    } else {
        (0.0, 0.0)
    };
    let (ux, uo) = (vx + nx, vo + no);
    if ux > uo {
        1.0
    } else if ux < uo {
        0.0
    } else {
        0.5
    }
}

fn semiorder_sample(vx: f64, vo: f64, s: &SemiorderSettings) -> (f64, f64) {
    if vx > vo + s.sigma {
        (vx, vx)
    } else if vo > vx + s.sigma {
        (vo, vo)
    } else {
        (vx - s.epsilon, vo - s.epsilon)
    }
}

fn run_block(sampler: &PairSampler, settings: &McSettings, block: usize, len: usize) -> [Moments; N_STATS] {
    let mut rng = substream(settings.seed, block as u64);
    let mut acc = [Moments::default(); N_STATS];
    for _ in 0..len {
        let (vx, vo) = sampler.sample(&mut rng);
        let w = noisy_win(vx, vo, settings.sigma, &mut rng);
        acc[0].push(w * vx + (1.0 - w) * vo);
        acc[1].push(vx);
        acc[2].push(vo);
        acc[3].push(w);
        acc[4].push(w * vx);
        acc[5].push(vx.max(vo));
        if let Some(s) = &settings.semiorder {
            let (sx, so) = semiorder_sample(vx, vo, s);
            acc[6].push(sx);
            acc[7].push(so);
        }
    }
    acc
}

/// Sample means of every payoff quantity for the belief `(ν(x), ν(o))`.
pub fn mc_expected_payoffs(belief: &BivariateBelief, settings: &McSettings) -> Result<McReport> {
    settings.validate()?;
    let sampler = PairSampler::new(belief);
    let n_blocks = settings.n_samples.div_ceil(settings.block_size);
    let blocks: Vec<[Moments; N_STATS]> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let start = b * settings.block_size;
            let len = settings.block_size.min(settings.n_samples - start);
            run_block(&sampler, settings, b, len)
        })
        .collect();
    let mut total = [Moments::default(); N_STATS];
    for block in &blocks {
        for (t, m) in total.iter_mut().zip(block) {
            t.merge(m);
        }
    }
    let est = |i: usize| total[i].estimate();
    Ok(McReport {
        def: est(0),
        imm: est(1),
        don: est(2),
        dominance: est(3),
        winner_utility: est(4),
        natural: est(5),
        semiorder_x: settings.semiorder.map(|_| est(6)),
        semiorder_o: settings.semiorder.map(|_| est(7)),
        n_samples: settings.n_samples,
    })
}

/// Anything that yields a joint belief over two acts.
pub trait PairSource {
    fn pair(&self, x: usize, o: usize) -> Result<BivariateBelief>;
}

impl PairSource for PosteriorSummary {
    fn pair(&self, x: usize, o: usize) -> Result<BivariateBelief> {
        marginal_pair(self, x, o)
    }
}

/// The first utility row, known exactly.
impl PairSource for GroundTruthUtility {
    fn pair(&self, x: usize, o: usize) -> Result<BivariateBelief> {
        let row = self.row(0);
        if x >= row.len() || o >= row.len() {
            return Err(Error::invalid(format!("index outside grid of {}", row.len())));
        }
        Ok(BivariateBelief::point(row[x], row[o]))
    }
}

/// [`mc_expected_payoffs`] for acts `x` and `o` of a posterior or a known
/// utility.
pub fn mc_expected_payoffs_at<S: PairSource + ?Sized>(
    source: &S,
    x: usize,
    o: usize,
    settings: &McSettings,
) -> Result<McReport> {
    mc_expected_payoffs(&source.pair(x, o)?, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_belief_is_exact() {
        let s = McSettings::new(0.0, MIN_SAMPLES, 1).with_semiorder(1.0, 0.5);
        let r = mc_expected_payoffs(&BivariateBelief::point(2.0, 0.5), &s).unwrap();
        assert_eq!(r.def, Estimate { mean: 2.0, se: 0.0 });
        assert_eq!(r.dominance.mean, 1.0);
        assert_eq!(r.semiorder_x.unwrap().mean, 2.0);
    }

    #[test]
    fn rejects_small_runs() {
        let s = McSettings::new(1.0, 100, 1);
        assert!(mc_expected_payoffs(&BivariateBelief::point(0.0, 0.0), &s).is_err());
    }

    #[test]
    fn same_seed_same_answer() {
        let b = BivariateBelief::new(0.3, 0.0, 1.0, 1.0, 0.2).unwrap();
        let mut s = McSettings::new(0.5, 50_000, 9);
        s.block_size = 7_000;
        assert_eq!(mc_expected_payoffs(&b, &s).unwrap(), mc_expected_payoffs(&b, &s).unwrap());
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut one = Moments::default();
        xs.iter().for_each(|&x| one.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..33].iter().for_each(|&x| a.push(x));
        xs[33..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - one.mean).abs() < 1e-14);
        assert!((a.m2 - one.m2).abs() < 1e-12);
    }
}
