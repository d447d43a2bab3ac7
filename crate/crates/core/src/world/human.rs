use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::choice::{choose_semiorder, choose_union_argmax};
use super::{ChoiceDataset, ChoiceRecord, GroundTruthUtility, HumanConfig, Mechanism, Preference, PreferenceDataset};
use crate::error::{Error, Result};

/// Noisy binary comparison: returns the index with the larger
/// `ν + n`, `n ~ N(0, σ²)` drawn independently per act.
pub fn noisy_prefer<R: Rng + ?Sized>(z: usize, y: usize, nu: &[f64], sigma: f64, rng: &mut R) -> usize {
    let (nz, ny) = if sigma > 0.0 {
        (sigma * rng.sample::<f64, _>(StandardNormal), sigma * rng.sample::<f64, _>(StandardNormal))
    } else {
        (0.0, 0.0)
    };
    if nu[z] + nz > nu[y] + ny {
        z
    } else {
        y
    }
}

/// Forced comparison between two utilities resolved by a random linear
/// weight `w ~ Beta(s·t, s·(1−t))`.
pub fn scalarized_prefer<R: Rng + ?Sized>(
    z: usize,
    y: usize,
    nu1: &[f64],
    nu2: &[f64],
    t: f64,
    s: f64,
    rng: &mut R,
) -> Result<usize> {
    let beta = Beta::new(s * t, s * (1.0 - t))
        .map_err(|e| Error::invalid(format!("bad weight distribution (t={t}, s={s}): {e}")))?;
    let w = beta.sample(rng);
    let uz = w * nu1[z] + (1.0 - w) * nu2[z];
    let uy = w * nu1[y] + (1.0 - w) * nu2[y];
    Ok(if uz > uy { z } else { y })
}

fn random_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    (i, j)
}

fn require_dim(nu: &GroundTruthUtility, d: usize) -> Result<()> {
    if nu.dim() < d {
        return Err(Error::invalid(format!("mechanism needs {d} utilities, ground truth has {}", nu.dim())));
    }
    Ok(())
}

/// Resolves one comparison. `None` when the human declares the pair
/// incomparable (semiorder band, or no noisy Pareto dominance).
fn resolve_pair<R: Rng + ?Sized>(
    z: usize,
    y: usize,
    nu: &GroundTruthUtility,
    config: &HumanConfig,
    rng: &mut R,
) -> Result<Option<usize>> {
    Ok(match config.mechanism {
        Mechanism::ProbitNoise { sigma } => Some(noisy_prefer(z, y, nu.row(0), sigma, rng)),
        Mechanism::Semiorder { sigma } => {
            let c = choose_semiorder(z, y, nu.row(0), sigma);
            (c.len() == 1).then(|| c[0])
        }
        Mechanism::Scalarized { t, s } => {
            require_dim(nu, 2)?;
            Some(scalarized_prefer(z, y, nu.row(0), nu.row(1), t, s, rng)?)
        }
        Mechanism::VectorNoisy { sigma } => {
            let mut z_wins = true;
            let mut y_wins = true;
            for row in nu.rows() {
                let nz = sigma * rng.sample::<f64, _>(StandardNormal);
                let ny = sigma * rng.sample::<f64, _>(StandardNormal);
                let diff = row[z] + nz - (row[y] + ny);
                z_wins &= diff > 0.0;
                y_wins &= diff < 0.0;
            }
            if z_wins {
                Some(z)
            } else if y_wins {
                Some(y)
            } else {
                None
            }
        }
    })
}

/// Draws `n` uniformly random distinct pairs and resolves each through the
/// configured mechanism. Pairs the human declares incomparable are
/// dropped, so mechanisms with an indifference outcome may return fewer
/// than `n` preferences.
pub fn generate_preferences<R: Rng + ?Sized>(
    nu: &GroundTruthUtility,
    config: &HumanConfig,
    n: usize,
    rng: &mut R,
) -> Result<PreferenceDataset> {
    let m = nu.grid().len();
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let (z, y) = random_pair(m, rng);
        if let Some(w) = resolve_pair(z, y, nu, config, rng)? {
            let l = if w == z { y } else { z };
            pairs.push(Preference { winner: w, loser: l });
        }
    }
    Ok(PreferenceDataset { pairs })
}

/// Binary menus with the full semiorder answer, indifference included.
pub fn generate_binary_choices<R: Rng + ?Sized>(
    nu: &GroundTruthUtility,
    sigma: f64,
    n: usize,
    rng: &mut R,
) -> Result<ChoiceDataset> {
    if !(sigma > 0.0) {
        return Err(Error::invalid("semiorder band must be positive"));
    }
    let m = nu.grid().len();
    let records = (0..n)
        .map(|_| {
            let (z, y) = random_pair(m, rng);
            ChoiceRecord::new(vec![z, y], choose_semiorder(z, y, nu.row(0), sigma))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChoiceDataset { records })
}

/// `n` menus of `menu_size` distinct acts, each answered with the union of
/// per-utility argmaxes.
pub fn generate_choices<R: Rng + ?Sized>(
    nu: &GroundTruthUtility,
    menu_size: usize,
    n: usize,
    rng: &mut R,
) -> Result<ChoiceDataset> {
    let m = nu.grid().len();
    if menu_size < 2 || menu_size > m {
        return Err(Error::invalid(format!("menu size {menu_size} not in [2, {m}]")));
    }
    let records = (0..n)
        .map(|_| {
            let menu = index::sample(rng, m, menu_size).into_vec();
            let chosen = choose_union_argmax(&menu, nu);
            ChoiceRecord::new(menu, chosen)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChoiceDataset { records })
}
