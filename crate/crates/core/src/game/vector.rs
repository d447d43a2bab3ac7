//! Vector payoffs when the human holds several utilities.
//!
//! Each utility has its own posterior. DEF pays `𝛎(x)` when the noisy `x`
//! beats the noisy `o` in every coordinate and `𝛎(o)` otherwise; IMM and DoN
//! pay the posterior means. The three payoff vectors are then compared by
//! the chosen dominance relation.

use rayon::prelude::*;

use super::montecarlo::{noisy_win, PairSampler, MIN_SAMPLES};
use super::{Action, Decision};
use crate::error::{Error, Result};
use crate::learn::{marginal_pair, PosteriorSummary};
use crate::rng::substream;

const BLOCK: usize = 1 << 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// Keep actions no other action Pareto-dominates.
    Pareto,
    /// Keep actions that maximise at least one coordinate.
    UnionArgmax,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VectorOutcome {
    Decided(Decision),
    /// More than one undominated action with different payoff vectors.
    Incomparable {
        maximal: Vec<Action>,
    },
}

/// Estimated DEF payoff vector.
fn def_vector(samplers: &[PairSampler], sigma: f64, n_samples: usize, seed: u64) -> Vec<f64> {
    let d = samplers.len();
    let n_blocks = n_samples.div_ceil(BLOCK);
    let sums: Vec<Vec<f64>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let len = BLOCK.min(n_samples - b * BLOCK);
            let mut rng = substream(seed, b as u64);
            let mut sum = vec![0.0; d];
            let (mut vx, mut vo) = (vec![0.0; d], vec![0.0; d]);
            for _ in 0..len {
                let mut all = true;
                for k in 0..d {
                    let (a, c) = samplers[k].sample(&mut rng);
                    vx[k] = a;
                    vo[k] = c;
                    all &= noisy_win(a, c, sigma, &mut rng) == 1.0;
                }
                let pick = if all { &vx } else { &vo };
                sum.iter_mut().zip(pick).for_each(|(s, v)| *s += v);
            }
            sum
        })
        .collect();
    let mut total = vec![0.0; d];
    for s in &sums {
        total.iter_mut().zip(s).for_each(|(t, v)| *t += v);
    }
    total.iter().map(|t| t / n_samples as f64).collect()
}

fn pareto_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

fn maximal(payoffs: &[(Action, Vec<f64>)], dominance: Dominance) -> Vec<usize> {
    match dominance {
        Dominance::Pareto => (0..payoffs.len())
            .filter(|&i| !payoffs.iter().any(|(_, other)| pareto_dominates(other, &payoffs[i].1)))
            .collect(),
        Dominance::UnionArgmax => {
            let d = payoffs[0].1.len();
            (0..payoffs.len())
                .filter(|&i| (0..d).any(|k| payoffs.iter().all(|(_, other)| other[k] <= payoffs[i].1[k])))
                .collect()
        }
    }
}

/// Decision under vector payoffs, or `Incomparable` when the dominance
/// relation leaves several distinct payoff vectors. Undominated actions
/// with identical vectors are a tie, broken DEF, then DoN, then IMM.
pub fn vector_decide(
    posts: &[PosteriorSummary],
    x: usize,
    o: usize,
    sigma: f64,
    dominance: Dominance,
    n_samples: usize,
    seed: u64,
) -> Result<VectorOutcome> {
    if posts.len() < 2 {
        return Err(Error::invalid("vector payoffs need at least two utilities"));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::invalid(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let beliefs = posts.iter().map(|p| marginal_pair(p, x, o)).collect::<Result<Vec<_>>>()?;
    let samplers: Vec<PairSampler> = beliefs.iter().map(PairSampler::new).collect();
    let payoffs = vec![
        (Action::Def, def_vector(&samplers, sigma, n_samples, seed)),
        (Action::DoN, beliefs.iter().map(|b| b.mu_o).collect()),
        (Action::Imm, beliefs.iter().map(|b| b.mu_x).collect()),
    ];
    let keep = maximal(&payoffs, dominance);
    let first = &payoffs[keep[0]].1;
    if keep.iter().all(|&i| &payoffs[i].1 == first) {
        return Ok(VectorOutcome::Decided(Decision { action: payoffs[keep[0]].0, tie: keep.len() > 1 }));
    }
    Ok(VectorOutcome::Incomparable { maximal: keep.iter().map(|&i| payoffs[i].0).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{Diagnostics, Method};
    use crate::world::{ActGrid, KernelConfig};
    use nalgebra::{DMatrix, DVector};

    fn dirac(values: &[f64]) -> PosteriorSummary {
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

    #[test]
    fn rational_dominating_suggestion_ties_with_imm() {
        let posts = [dirac(&[2.0, 1.0]), dirac(&[3.0, 0.0])];
        for dom in [Dominance::Pareto, Dominance::UnionArgmax] {
            let out = vector_decide(&posts, 0, 1, 0.0, dom, MIN_SAMPLES, 3).unwrap();
            assert_eq!(out, VectorOutcome::Decided(Decision { action: Action::Def, tie: true }));
        }
    }

    #[test]
    fn noisy_human_loses_to_imm() {
        let posts = [dirac(&[2.0, 1.0]), dirac(&[3.0, 0.0])];
        let out = vector_decide(&posts, 0, 1, 1.0, Dominance::Pareto, 50_000, 3).unwrap();
        assert_eq!(out, VectorOutcome::Decided(Decision { action: Action::Imm, tie: false }));
    }

    #[test]
    fn symmetric_trade_off_is_incomparable() {
        let posts = [dirac(&[1.0, 0.0]), dirac(&[0.0, 1.0])];
        for dom in [Dominance::Pareto, Dominance::UnionArgmax] {
            let out = vector_decide(&posts, 0, 1, 0.5, dom, MIN_SAMPLES, 3).unwrap();
            assert!(matches!(out, VectorOutcome::Incomparable { .. }));
        }
    }
}
