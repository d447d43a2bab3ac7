//! Ground truth and the simulated human.
//!
//! The human holds one or more latent utilities over a discretised act
//! space and answers comparison queries through one of several
//! bounded-rationality mechanisms. Its answers form the message the robot
//! learns from.

mod choice;
mod format;
mod human;

pub use choice::{
    check_path_independence, choose_pareto, choose_scalar, choose_semiorder, choose_union_argmax, find_path_violation,
    Chooser,
};
pub use format::{
    format_choice_dataset, load_act_preferences, parse_act_preferences, parse_choice_dataset, read_choice_dataset,
    write_choice_dataset,
};
pub use human::{generate_binary_choices, generate_choices, generate_preferences, noisy_prefer, scalarized_prefer};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::rng;

/// Separation added to exact ties in sampled ground truth.
pub const TIE_PERTURBATION: f64 = 1e-9;

/// Ordered discretisation of the act space.
#[derive(Debug, Clone, PartialEq)]
pub struct ActGrid {
    points: Vec<f64>,
}

impl ActGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid("act grid needs at least 2 points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("act grid points must be finite"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("act grid must be strictly increasing"));
        }
        Ok(Self { points })
    }

    /// `n` evenly spaced points on `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 2 {
            return Err(Error::invalid(format!("bad grid spec [{lo}, {hi}] x {n}")));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();
        points[n - 1] = hi;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.points[0], self.points[self.points.len() - 1])
    }

    pub fn value(&self, index: usize) -> f64 {
        self.points[index]
    }

    /// Index of the grid point closest to `act`.
    pub fn nearest(&self, act: f64) -> usize {
        match self.points.binary_search_by(|p| p.total_cmp(&act)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.points.len() => i - 1,
            Err(i) => {
                if act - self.points[i - 1] <= self.points[i] - act {
                    i - 1
                } else {
                    i
                }
            }
        }
    }
}

/// Squared-exponential Gaussian-process prior with constant mean.
///
/// `jitter` is relative to `variance`: the prior covariance on a grid is
/// `K + jitter·variance·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub variance: f64,
    pub lengthscale: f64,
    pub mean: f64,
    pub jitter: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { variance: 1.0, lengthscale: 1.0, mean: 0.0, jitter: 1e-8 }
    }
}

impl KernelConfig {
    pub fn new(variance: f64, lengthscale: f64) -> Result<Self> {
        let k = Self { variance, lengthscale, ..Self::default() };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.lengthscale > 0.0 && self.jitter > 0.0) {
            return Err(Error::invalid(format!("kernel variance, lengthscale and jitter must be positive: {self:?}")));
        }
        if !self.mean.is_finite() {
            return Err(Error::invalid("kernel mean must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let r = (a - b) / self.lengthscale;
        self.variance * (-0.5 * r * r).exp()
    }

    /// Prior covariance over the grid, jitter included.
    pub fn covariance(&self, grid: &ActGrid) -> DMatrix<f64> {
        let p = grid.points();
        let n = p.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| self.eval(p[i], p[j]));
        for i in 0..n {
            k[(i, i)] += self.jitter * self.variance;
        }
        k
    }

    pub fn mean_vector(&self, grid: &ActGrid) -> DVector<f64> {
        DVector::from_element(grid.len(), self.mean)
    }
}

/// The human's latent utilities: one row per utility, one column per act.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthUtility {
    rows: Vec<Vec<f64>>,
    grid: ActGrid,
}

impl GroundTruthUtility {
    pub fn new(rows: Vec<Vec<f64>>, grid: ActGrid) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("need at least one utility row"));
        }
        for row in &rows {
            if row.len() != grid.len() {
                return Err(Error::invalid("utility row length must match the grid"));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("utility values must be finite"));
            }
        }
        Ok(Self { rows, grid })
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn grid(&self) -> &ActGrid {
        &self.grid
    }

    /// Utility vector of act `i` across all rows.
    pub fn vector_at(&self, i: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Index of the act with the highest utility in row `k`.
    pub fn argmax(&self, k: usize) -> usize {
        argmax(&self.rows[k])
    }
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Draws `d` independent utilities from the GP prior on `grid`.
pub fn sample_utility(kernel: &KernelConfig, grid: &ActGrid, d: usize, seed: u64) -> Result<GroundTruthUtility> {
    let mut rng = rng::seeded(seed);
    sample_utility_with(kernel, grid, d, &mut rng)
}

pub fn sample_utility_with<R: Rng + ?Sized>(
    kernel: &KernelConfig,
    grid: &ActGrid,
    d: usize,
    rng: &mut R,
) -> Result<GroundTruthUtility> {
    if d == 0 {
        return Err(Error::invalid("need d >= 1 utilities"));
    }
    kernel.validate()?;
    // jitter is already on the diagonal; escalate from there if needed
    let (chol, _) = cholesky_with_jitter(&kernel.covariance(grid), 0.0)?;
    let l = chol.l();
    let n = grid.len();
    let rows = (0..d)
        .map(|_| {
            let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let mut row: Vec<f64> = (&l * eps).iter().map(|v| v + kernel.mean).collect();
            separate_ties(&mut row);
            row
        })
        .collect();
    GroundTruthUtility::new(rows, grid.clone())
}

/// Nudges exactly tied values apart so every act has a distinct utility.
pub fn separate_ties(values: &mut [f64]) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if values[cur] <= values[prev] {
            values[cur] = values[prev] + TIE_PERTURBATION;
        }
    }
}

/// Bounded-rationality mechanism of the simulated human.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    /// Gaussian utility noise; `sigma = 0` is the rational human.
    ProbitNoise { sigma: f64 },
    /// Discernibility band of width `sigma`.
    Semiorder { sigma: f64 },
    /// Two utilities scalarised with a Beta(s·t, s·(1−t)) weight.
    Scalarized { t: f64, s: f64 },
    /// Gaussian noise on every utility, Pareto comparison.
    VectorNoisy { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HumanConfig {
    pub mechanism: Mechanism,
}

impl HumanConfig {
    pub fn probit(sigma: f64) -> Result<Self> {
        Self::new(Mechanism::ProbitNoise { sigma })
    }

    pub fn rational() -> Self {
        Self { mechanism: Mechanism::ProbitNoise { sigma: 0.0 } }
    }

    pub fn new(mechanism: Mechanism) -> Result<Self> {
        match mechanism {
            Mechanism::ProbitNoise { sigma } | Mechanism::VectorNoisy { sigma } => {
                if !(sigma >= 0.0) || !sigma.is_finite() {
                    return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
                }
            }
            Mechanism::Semiorder { sigma } => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(Error::invalid(format!("semiorder sigma must be > 0, got {sigma}")));
                }
            }
            Mechanism::Scalarized { t, s } => {
                if !(t > 0.0 && t < 1.0) {
                    return Err(Error::invalid(format!("t must lie in (0, 1), got {t}")));
                }
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::invalid(format!("s must be > 0, got {s}")));
                }
            }
        }
        Ok(Self { mechanism })
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.mechanism, Mechanism::ProbitNoise { sigma } | Mechanism::VectorNoisy { sigma } if sigma == 0.0)
    }
}

/// A strict pairwise preference `winner ≻ loser` between grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Preference {
    pub winner: usize,
    pub loser: usize,
}

impl Preference {
    pub fn new(winner: usize, loser: usize) -> Result<Self> {
        if winner == loser {
            return Err(Error::invalid(format!("self-preference on index {winner}")));
        }
        Ok(Self { winner, loser })
    }

    pub fn flipped(self) -> Self {
        Self { winner: self.loser, loser: self.winner }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PreferenceDataset {
    pub pairs: Vec<Preference>,
}

impl PreferenceDataset {
    pub fn new(pairs: Vec<Preference>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.pairs.iter().map(|p| p.winner.max(p.loser)).max()
    }
}

/// One observed choice: the menu offered and the nonempty subset chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceRecord {
    pub menu: Vec<usize>,
    pub chosen: Vec<usize>,
}

impl ChoiceRecord {
    pub fn new(mut menu: Vec<usize>, mut chosen: Vec<usize>) -> Result<Self> {
        menu.sort_unstable();
        menu.dedup();
        chosen.sort_unstable();
        chosen.dedup();
        if menu.is_empty() || chosen.is_empty() {
            return Err(Error::invalid("menu and chosen set must be nonempty"));
        }
        if let Some(c) = chosen.iter().find(|c| menu.binary_search(c).is_err()) {
            return Err(Error::invalid(format!("chosen index {c} is not on the menu")));
        }
        Ok(Self { menu, chosen })
    }

    /// Menu items that were not chosen.
    pub fn rejected(&self) -> impl Iterator<Item = usize> + '_ {
        self.menu.iter().copied().filter(|m| self.chosen.binary_search(m).is_err())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChoiceDataset {
    pub records: Vec<ChoiceRecord>,
}

impl ChoiceDataset {
    pub fn new(records: Vec<ChoiceRecord>) -> Self {
        Self { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Strict binary records as preferences; indifferent or larger menus are
    /// skipped.
    pub fn strict_pairs(&self) -> PreferenceDataset {
        let pairs = self
            .records
            .iter()
            .filter(|r| r.menu.len() == 2 && r.chosen.len() == 1)
            .map(|r| {
                let w = r.chosen[0];
                let l = if r.menu[0] == w { r.menu[1] } else { r.menu[0] };
                Preference { winner: w, loser: l }
            })
            .collect();
        PreferenceDataset { pairs }
    }
}

impl From<&PreferenceDataset> for ChoiceDataset {
    fn from(p: &PreferenceDataset) -> Self {
        let records = p
            .pairs
            .iter()
            .map(|pr| {
                let mut menu = vec![pr.winner, pr.loser];
                menu.sort_unstable();
                ChoiceRecord { menu, chosen: vec![pr.winner] }
            })
            .collect();
        ChoiceDataset { records }
    }
}
