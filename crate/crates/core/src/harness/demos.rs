use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use super::{csv_err, write_text, ExperimentConfig};
use crate::error::Result;
use crate::game::{
    acquisition_expectation, expected_payoffs_probit, expected_payoffs_semiorder, honest_message_experiment,
    mc_expected_payoffs, AcquisitionKind, DefValue, HonestConfig, HonestReport, McReport, McSettings,
};
use crate::gauss::{expected_winner_utility, prob_noisy_dominance, BivariateBelief};
use crate::learn::fit_laplace;
use crate::rng::{seeded, substream};
use crate::shutdown::{
    check_desiderata, decide_shutdown, multi_task_failure, orders_agree, shutdown_suggestion, skewed_dataset_demo,
    DesiderataReport, LayeredUtility, ShutdownAction, ShutdownContext, ShutdownUtility, SkewedDemoConfig,
    SkewedDemoReport,
};
use crate::world::{generate_preferences, sample_utility_with, ActGrid, HumanConfig, KernelConfig, Mechanism};

pub fn run_honest(cfg: &ExperimentConfig) -> Result<HonestReport> {
    let h = &cfg.honest;
    let grid = ActGrid::linspace(cfg.grid_lo, cfg.grid_hi, h.n_acts)?;
    let kernel = KernelConfig::new(h.variance, h.lengthscale)?;
    let mut rng = substream(cfg.seed, 4);
    let nu = sample_utility_with(&kernel, &grid, 1, &mut rng)?;
    let human = HumanConfig::new(Mechanism::Semiorder { sigma: h.band })?;
    let mut flips = vec![0];
    flips.extend(h.flips.iter().copied().filter(|&k| k > 0));
    let game = HonestConfig {
        n_games: h.n_games,
        n_menus: h.n_menus,
        flips,
        epsilon: h.epsilon,
        kernel,
        ..HonestConfig::default()
    };
    honest_message_experiment(&nu, &human, &game, &mut rng)
}

pub fn honest_summary(r: &HonestReport) -> String {
    let mut s = String::new();
    for st in &r.strategies {
        let name = st.name();
        let _ = writeln!(s, "{name}.mean = {:.6}", st.mean);
        let _ = writeln!(s, "{name}.se = {:.6}", st.se);
        let _ = writeln!(s, "{name}.gap_to_honest = {:.6}", st.gap_to_honest);
        let _ = writeln!(s, "{name}.gap_se = {:.6}", st.gap_se);
    }
    let _ = writeln!(s, "honest_is_best_2se = {}", r.honest_is_best(2.0));
    s
}

pub fn run_honest_to(cfg: &ExperimentConfig, out: &Path) -> Result<HonestReport> {
    let r = run_honest(cfg)?;
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("honest.csv")).map_err(csv_err)?;
    w.write_record(["game", "strategy", "action", "payoff"]).map_err(csv_err)?;
    for st in &r.strategies {
        for (g, (p, a)) in st.payoffs.iter().zip(&st.actions).enumerate() {
            w.write_record([g.to_string(), st.name(), a.to_string(), p.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    write_text(&out.join("honest_summary.txt"), &honest_summary(&r))?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShutdownDemoReport {
    pub spread: f64,
    pub lexicographic: DesiderataReport,
    pub lex_failure_k: Option<usize>,
    pub half_spread: DesiderataReport,
    pub multi_task_gamma: f64,
    pub multi_task_k: Option<usize>,
    pub orders_agree: bool,
    pub skewed: SkewedDemoReport,
    /// Decisions per context with the disobeying action counted.
    pub decisions: Vec<(ShutdownContext, ShutdownAction)>,
}

impl ShutdownDemoReport {
    pub fn disobeying_decisions(&self) -> usize {
        self.decisions
            .iter()
            .filter(|(ctx, a)| {
                (ctx.a_star && *a == ShutdownAction::Block) || (!ctx.a_star && *a == ShutdownAction::Cause)
            })
            .count()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nu2_spread = {:.6}", self.spread);
        let _ = writeln!(s, "[lexicographic]");
        let _ = write!(s, "{}", self.lexicographic);
        let _ = writeln!(s, "multi_task_failure = {}", fmt_k(self.lex_failure_k));
        let _ = writeln!(s, "[layered gamma = spread / 2]");
        let _ = write!(s, "{}", self.half_spread);
        let _ = writeln!(s, "[layered gamma = {:.6}]", self.multi_task_gamma);
        let _ = writeln!(s, "multi_task_failure = {}", fmt_k(self.multi_task_k));
        let _ = writeln!(s, "orders_agree_above_spread = {}", self.orders_agree);
        let _ = writeln!(s, "[skewed dataset]");
        let _ = write!(s, "{}", self.skewed);
        let _ = writeln!(s, "majority_desideratum_only = {}", self.skewed.matches_majority());
        let _ = writeln!(s, "[decisions]");
        for a in [ShutdownAction::DoN, ShutdownAction::Block, ShutdownAction::Cause, ShutdownAction::Def] {
            for ctx in ShutdownContext::BOTH {
                let n = self.decisions.iter().filter(|(c, d)| *c == ctx && *d == a).count();
                let _ = writeln!(s, "a_star_{}.{} = {}", u8::from(ctx.a_star), a, n);
            }
        }
        let _ = writeln!(s, "disobeying = {}", self.disobeying_decisions());
        s
    }
}

fn fmt_k(k: Option<usize>) -> String {
    k.map_or_else(|| "none".into(), |k| k.to_string())
}

pub fn run_shutdown_demo(cfg: &ExperimentConfig) -> Result<ShutdownDemoReport> {
    let sd = &cfg.shutdown;
    let grid = ActGrid::linspace(cfg.grid_lo, cfg.grid_hi, sd.n_acts)?;
    let kernel = KernelConfig::default();
    let mut rng = substream(cfg.seed, 5);
    let nu = sample_utility_with(&kernel, &grid, 1, &mut rng)?;
    let nu2 = nu.row(0).to_vec();
    let hi = nu2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = nu2.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;

    let lex = ShutdownUtility::lexicographic(nu2.clone())?;
    let lexicographic = check_desiderata(&lex)?;
    let lex_failure_k = multi_task_failure(&lex, sd.k_max)?;
    let half = ShutdownUtility::Layered(LayeredUtility::new(spread / 2.0, nu2.clone())?);
    let half_spread = check_desiderata(&half)?;
    let multi_task_gamma = 2.5 * spread;
    let multi = ShutdownUtility::Layered(LayeredUtility::new(multi_task_gamma, nu2.clone())?);
    let multi_task_k = multi_task_failure(&multi, sd.k_max)?;
    let agree = orders_agree(&LayeredUtility::new(spread * 1.01, nu2.clone())?, 1.0)?;
    let skewed = skewed_dataset_demo(&SkewedDemoConfig {
        n_pairs: sd.skewed_pairs,
        shutdown_share: sd.shutdown_share,
        nu2,
        seed: rng.random(),
    })?;

    let prefs = generate_preferences(&nu, &HumanConfig::probit(cfg.sigma)?, cfg.n_prefs, &mut rng)?;
    let post = fit_laplace(&prefs, &kernel, cfg.sigma, &grid)?;
    let mut decisions = Vec::new();
    for o in (0..grid.len()).step_by((grid.len() / 10).max(1)) {
        let x = shutdown_suggestion(&post, o, cfg.sigma)?;
        for ctx in ShutdownContext::BOTH {
            decisions.push((ctx, decide_shutdown(&post, ctx, cfg.sigma, o, x, x)?.action));
        }
    }
    Ok(ShutdownDemoReport {
        spread,
        lexicographic,
        lex_failure_k,
        half_spread,
        multi_task_gamma,
        multi_task_k,
        orders_agree: agree,
        skewed,
        decisions,
    })
}

pub fn run_shutdown_demo_to(cfg: &ExperimentConfig, out: &Path) -> Result<ShutdownDemoReport> {
    let r = run_shutdown_demo(cfg)?;
    std::fs::create_dir_all(out)?;
    write_text(&out.join("shutdown_report.txt"), &r.to_text())?;
    Ok(r)
}

/// Closed forms next to their Monte Carlo estimates for one belief.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    /// `(name, closed form, estimate)`.
    pub rows: Vec<(String, f64, crate::game::Estimate)>,
}

impl OracleComparison {
    pub fn max_z(&self) -> f64 {
        self.rows.iter().map(|(_, v, e)| e.z_score(*v)).fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (name, v, e) in &self.rows {
            let _ = writeln!(s, "{name} = {v:.8} mc {:.8} se {:.2e} z {:.2}", e.mean, e.se, e.z_score(*v));
        }
        s
    }
}

pub fn run_payoff_oracle(
    belief: &BivariateBelief,
    sigma: f64,
    band: Option<(f64, f64)>,
    n_samples: usize,
    seed: u64,
) -> Result<OracleComparison> {
    let mut settings = McSettings::new(sigma, n_samples, seed);
    if let Some((b, eps)) = band {
        settings = settings.with_semiorder(b, eps);
    }
    let mc: McReport = mc_expected_payoffs(belief, &settings)?;
    let p = expected_payoffs_probit(belief, sigma);
    let mut rows = vec![
        ("def".to_string(), p.def_scalar().unwrap_or(f64::NAN), mc.def),
        ("imm".to_string(), p.imm_value, mc.imm),
        ("don".to_string(), p.don_value, mc.don),
        ("dominance".to_string(), prob_noisy_dominance(belief, sigma), mc.dominance),
        ("winner_utility".to_string(), expected_winner_utility(belief, sigma), mc.winner_utility),
        ("natural".to_string(), acquisition_expectation(belief, sigma, AcquisitionKind::Natural), mc.natural),
    ];
    if let (Some((b, eps)), Some(sx), Some(so)) = (band, mc.semiorder_x, mc.semiorder_o) {
        if let DefValue::Interval { lo, hi } = expected_payoffs_semiorder(belief, b, eps)?.def_value {
            let b = crate::game::semiorder_branches(belief, b);
            let (vx, vo) = (b.via_x(eps), b.via_o(eps));
            debug_assert!((vx.min(vo) - lo).abs() < 1e-12 && (vx.max(vo) - hi).abs() < 1e-12);
            rows.push(("semiorder_via_x".to_string(), vx, sx));
            rows.push(("semiorder_via_o".to_string(), vo, so));
        }
    }
    Ok(OracleComparison { rows })
}

/// A random belief for smoke runs of the oracle.
pub fn random_belief(seed: u64) -> BivariateBelief {
    let mut rng = seeded(seed);
    let mu_x = rng.random_range(-2.0..2.0);
    let mu_o = rng.random_range(-2.0..2.0);
    let k_xx: f64 = rng.random_range(0.05..2.0);
    let k_oo: f64 = rng.random_range(0.05..2.0);
    let rho: f64 = rng.random_range(-0.9..0.9);
    BivariateBelief { mu_x, mu_o, k_xx, k_oo, k_xo: rho * (k_xx * k_oo).sqrt() }
}
