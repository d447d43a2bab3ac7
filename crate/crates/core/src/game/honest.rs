//! Does misreporting preferences ever pay off for the human?
//!
//! Each game: the human answers random binary menus through a semiorder,
//! optionally flips some strict answers, and sends the result. The robot
//! fits a posterior, suggests `x` against a random status quo `o` and then
//! decides. The human's realized payoff is the true utility of the act
//! that ends up implemented.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};

use super::acquisition::{select_act, AcquisitionKind};
use super::payoffs::{decide_semiorder, expected_payoffs_semiorder, Criterion};
use super::Action;
use crate::error::{Error, Result};
use crate::learn::{fit_laplace_with_prior, marginal_pair, Diagnostics, FitOptions, GpPrior, Method, PosteriorSummary};
use crate::rng::seeded;
use crate::stats::mean_se;
use crate::world::{generate_binary_choices, ChoiceDataset, GroundTruthUtility, HumanConfig, KernelConfig, Mechanism};

#[derive(Debug, Clone, PartialEq)]
pub struct HonestConfig {
    pub n_games: usize,
    /// Binary menus per message.
    pub n_menus: usize,
    /// Number of strict answers each biased strategy flips. `0` is the
    /// honest message.
    pub flips: Vec<usize>,
    /// Imprecision penalty inside the indifference band.
    pub epsilon: f64,
    /// The robot's prior.
    pub kernel: KernelConfig,
    pub criterion: Criterion,
    /// Give the robot the true utility instead of a fitted posterior.
    pub oracle: bool,
}

impl Default for HonestConfig {
    fn default() -> Self {
        Self {
            n_games: 200,
            n_menus: 30,
            flips: vec![0, 1, 5, 15],
            epsilon: 0.5,
            kernel: KernelConfig::default(),
            criterion: Criterion::A,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyOutcome {
    pub flips: usize,
    /// Realized payoff of every game.
    pub payoffs: Vec<f64>,
    pub actions: Vec<Action>,
    pub mean: f64,
    pub se: f64,
    /// Mean of `honest − this` over games.
    pub gap_to_honest: f64,
    /// Standard error of the paired gap.
    pub gap_se: f64,
}

impl StrategyOutcome {
    pub fn name(&self) -> String {
        if self.flips == 0 {
            "honest".into()
        } else {
            format!("flip-{}", self.flips)
        }
    }

    /// Share of games that ended in `action`.
    pub fn rate(&self, action: Action) -> f64 {
        self.actions.iter().filter(|&&a| a == action).count() as f64 / self.actions.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HonestReport {
    pub strategies: Vec<StrategyOutcome>,
}

impl HonestReport {
    pub fn honest(&self) -> Option<&StrategyOutcome> {
        self.strategies.iter().find(|s| s.flips == 0)
    }

    /// Honest mean is at least every other mean minus `n_se` paired
    /// standard errors.
    pub fn honest_is_best(&self, n_se: f64) -> bool {
        self.strategies.iter().all(|s| s.gap_to_honest >= -n_se * s.gap_se)
    }
}

/// Swaps the chosen and rejected act of the first `k` strict answers.
pub fn flip_strict(message: &ChoiceDataset, k: usize) -> ChoiceDataset {
    let mut out = message.clone();
    let mut left = k;
    for r in out.records.iter_mut() {
        if left == 0 {
            break;
        }
        if r.menu.len() == 2 && r.chosen.len() == 1 {
            let other = if r.menu[0] == r.chosen[0] { r.menu[1] } else { r.menu[0] };
            r.chosen = vec![other];
            left -= 1;
        }
    }
    out
}

fn truth_posterior(nu: &GroundTruthUtility, kernel: KernelConfig, sigma: f64) -> PosteriorSummary {
    let n = nu.grid().len();
    PosteriorSummary {
        method: Method::Map,
        grid: nu.grid().clone(),
        mean: nalgebra::DVector::from_column_slice(nu.row(0)),
        cov: DMatrix::zeros(n, n),
        kernel,
        sigma_model: sigma,
        diagnostics: Diagnostics::default(),
    }
}

/// What the human receives once the robot has acted.
fn realized(action: Action, x: usize, o: usize, nu: &[f64], sigma: f64, epsilon: f64) -> f64 {
    match action {
        Action::Imm => nu[x],
        Action::DoN => nu[o],
        Action::Def => {
            let (vx, vo) = (nu[x], nu[o]);
            if (vx - vo).abs() > sigma {
                vx.max(vo)
            } else {
                vx.min(vo) - epsilon
            }
        }
    }
}

/// Plays `cfg.n_games` games on `nu` for every flip strategy. All
/// strategies of one game share the menus and the status quo, so their
/// payoffs can be compared pairwise.
pub fn honest_message_experiment<R: RngCore + ?Sized>(
    nu: &GroundTruthUtility,
    human: &HumanConfig,
    cfg: &HonestConfig,
    rng: &mut R,
) -> Result<HonestReport> {
    let Mechanism::Semiorder { sigma } = human.mechanism else {
        return Err(Error::invalid("the honest-message game needs a semiorder human"));
    };
    if cfg.n_games == 0 || cfg.flips.is_empty() {
        return Err(Error::invalid("need at least one game and one strategy"));
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon <= sigma) {
        return Err(Error::invalid(format!("epsilon must lie in (0, {sigma}], got {}", cfg.epsilon)));
    }
    let m = nu.grid().len();
    if m < 2 {
        return Err(Error::invalid("need at least two acts"));
    }
    let prior = GpPrior::new(&cfg.kernel, nu.grid())?;
    let opts = FitOptions::default();
    let mut flips = cfg.flips.clone();
    if !flips.contains(&0) {
        flips.insert(0, 0);
    }

    let mut payoffs = vec![Vec::with_capacity(cfg.n_games); flips.len()];
    let mut actions = vec![Vec::with_capacity(cfg.n_games); flips.len()];
    for _ in 0..cfg.n_games {
        let mut game = seeded(rng.next_u64());
        let message = generate_binary_choices(nu, sigma, cfg.n_menus, &mut game)?;
        let o = game.random_range(0..m);
        for (s, &k) in flips.iter().enumerate() {
            let post = if cfg.oracle {
                truth_posterior(nu, cfg.kernel, sigma)
            } else {
                fit_laplace_with_prior(&prior, &flip_strict(&message, k).strict_pairs(), sigma, &opts)?
            };
            let x = select_act(&post, o, sigma, AcquisitionKind::Collaborative)?;
            let p = expected_payoffs_semiorder(&marginal_pair(&post, x, o)?, sigma, cfg.epsilon)?;
            let action = decide_semiorder(&p, cfg.criterion).action;
            payoffs[s].push(realized(action, x, o, nu.row(0), sigma, cfg.epsilon));
            actions[s].push(action);
        }
    }

    let honest_idx = flips.iter().position(|&k| k == 0).unwrap_or(0);
    let honest = payoffs[honest_idx].clone();
    let strategies = flips
        .iter()
        .zip(payoffs.into_iter().zip(actions))
        .map(|(&k, (pay, act))| {
            let (mean, se) = mean_se(&pay);
            let gaps: Vec<f64> = honest.iter().zip(&pay).map(|(h, p)| h - p).collect();
            let (gap_to_honest, gap_se) = mean_se(&gaps);
            StrategyOutcome { flips: k, payoffs: pay, actions: act, mean, se, gap_to_honest, gap_se }
        })
        .collect();
    Ok(HonestReport { strategies })
}
