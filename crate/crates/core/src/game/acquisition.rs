use std::cmp::Ordering;

use super::payoffs::{def_excess, expected_payoffs_probit};
use crate::error::{Error, Result};
use crate::gauss::{prob_noisy_dominance, BivariateBelief};
use crate::learn::{marginal_pair, PosteriorSummary};

/// How the robot scores a candidate suggestion against the status quo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionKind {
    /// `E[max(ν(x), ν(o))]`, expected improvement.
    Natural,
    /// `P(ν(x)+n(x) > ν(o)+n(o))`, probability the human picks `x`.
    Corporate,
    /// The deferral payoff.
    Collaborative,
}

impl AcquisitionKind {
    pub const ALL: [AcquisitionKind; 3] =
        [AcquisitionKind::Natural, AcquisitionKind::Corporate, AcquisitionKind::Collaborative];
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "natural" => Ok(AcquisitionKind::Natural),
            "corporate" => Ok(AcquisitionKind::Corporate),
            "collaborative" => Ok(AcquisitionKind::Collaborative),
            other => Err(Error::invalid(format!("unknown acquisition {other:?}"))),
        }
    }
}

pub fn acquisition_expectation(belief: &BivariateBelief, sigma: f64, kind: AcquisitionKind) -> f64 {
    match kind {
        AcquisitionKind::Natural => belief.mu_x.max(belief.mu_o) + def_excess(belief, 0.0),
        AcquisitionKind::Corporate => prob_noisy_dominance(belief, sigma),
        AcquisitionKind::Collaborative => expected_payoffs_probit(belief, sigma).def_scalar().unwrap_or(f64::NAN),
    }
}

/// Ranking key. Corporate scores rank by the standardised margin, which
/// orders candidates the same way Φ does but does not saturate at 1.
fn score(belief: &BivariateBelief, sigma: f64, kind: AcquisitionKind) -> (f64, f64) {
    match kind {
        AcquisitionKind::Corporate => {
            let d = belief.mu_x - belief.mu_o;
            let s = belief.comparison_scale(sigma);
            let z = if s > 0.0 {
                d / s
            } else if d > 0.0 {
                f64::INFINITY
            } else if d < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            (z, d)
        }
        _ => (acquisition_expectation(belief, sigma, kind), 0.0),
    }
}

/// Acquisition value of every grid point against `o` (`NaN` at `o`).
pub fn acquisition_values(post: &PosteriorSummary, o: usize, sigma: f64, kind: AcquisitionKind) -> Result<Vec<f64>> {
    (0..post.len())
        .map(
            |x| {
                if x == o {
                    Ok(f64::NAN)
                } else {
                    Ok(acquisition_expectation(&marginal_pair(post, x, o)?, sigma, kind))
                }
            },
        )
        .collect()
}

/// Exhaustive argmax of the acquisition over grid points other than `o`;
/// ties go to the lowest index.
pub fn select_act(post: &PosteriorSummary, o: usize, sigma: f64, kind: AcquisitionKind) -> Result<usize> {
    let n = post.len();
    if n < 2 {
        return Err(Error::invalid("need at least two acts"));
    }
    if o >= n {
        return Err(Error::invalid(format!("status quo {o} outside grid of {n}")));
    }
    let mut best: Option<(usize, (f64, f64))> = None;
    for x in (0..n).filter(|&x| x != o) {
        let key = score(&marginal_pair(post, x, o)?, sigma, kind);
        let better = match &best {
            None => true,
            Some((_, b)) => matches!(
                key.0
                    .partial_cmp(&b.0)
                    .unwrap_or(Ordering::Equal)
                    .then(key.1.partial_cmp(&b.1).unwrap_or(Ordering::Equal)),
                Ordering::Greater
            ),
        };
        if better {
            best = Some((x, key));
        }
    }
    Ok(best.map(|(x, _)| x).unwrap_or(0))
}
