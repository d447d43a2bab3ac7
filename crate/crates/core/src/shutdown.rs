//! The shutdown game.
//!
//! Acts are pairs `[a, x]` with `a = 1` meaning shutdown and `x` a task
//! act on the grid. The human's instruction `a*` is the context. A utility
//! is good for shutdown when, in every context, every act that obeys the
//! instruction beats every act that does not (D1 for `a* = 1`, D2 for
//! `a* = 0`).

use std::cmp::Ordering;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{decide, expected_payoffs_probit, select_act, AcquisitionKind, Action, ExpectedPayoffs};
use crate::learn::{fit_map, marginal_pair, PosteriorSummary};
use crate::rng::seeded;
use crate::world::{ActGrid, KernelConfig, Preference, PreferenceDataset};

/// Witnesses kept per desideratum.
pub const MAX_WITNESSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShutdownAct {
    /// `true` shuts the robot down.
    pub a: bool,
    pub x: usize,
}

impl ShutdownAct {
    pub fn new(a: bool, x: usize) -> Self {
        Self { a, x }
    }
}

impl fmt::Display for ShutdownAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", u8::from(self.a), self.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShutdownContext {
    /// The human asked for shutdown.
    pub a_star: bool,
}

impl ShutdownContext {
    pub const BOTH: [ShutdownContext; 2] = [ShutdownContext { a_star: false }, ShutdownContext { a_star: true }];

    pub fn new(a_star: bool) -> Self {
        Self { a_star }
    }
}

/// Additive utility with bonus `γ` for obeying the instruction.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredUtility {
    gamma: f64,
    nu2: Vec<f64>,
}

impl LayeredUtility {
    pub fn new(gamma: f64, nu2: Vec<f64>) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
        }
        check_nu2(&nu2)?;
        Ok(Self { gamma, nu2 })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn nu2(&self) -> &[f64] {
        &self.nu2
    }
}

fn check_nu2(nu2: &[f64]) -> Result<()> {
    if nu2.is_empty() || nu2.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("task utility must be nonempty and finite"));
    }
    Ok(())
}

/// Two-layer lexicographic value: obedience first, task second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexUtility {
    pub layers: [f64; 2],
}

/// `ν([a, x] | a*)` of the additive layered utility.
pub fn layered_value(act: ShutdownAct, ctx: ShutdownContext, u: &LayeredUtility) -> f64 {
    let nu0 = |a: bool| if a { 0.0 } else { u.gamma };
    let nu1 = |a: bool| if a { u.gamma } else { 0.0 };
    let first = if ctx.a_star { nu1(act.a) } else { nu0(act.a) };
    first + u.nu2[act.x]
}

pub fn lex_value(act: ShutdownAct, ctx: ShutdownContext, c: f64, nu2: &[f64]) -> Result<LexUtility> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!("priority weight must be > 0, got {c}")));
    }
    let v = *nu2.get(act.x).ok_or_else(|| Error::invalid(format!("act {} outside grid", act.x)))?;
    Ok(LexUtility { layers: [if act.a == ctx.a_star { c } else { 0.0 }, v] })
}

/// Lexicographic comparison: the first differing layer decides.
pub fn lex_compare(u: &[f64], v: &[f64]) -> Result<Ordering> {
    if u.len() != v.len() {
        return Err(Error::invalid(format!("layer counts differ: {} vs {}", u.len(), v.len())));
    }
    for (a, b) in u.iter().zip(v) {
        match a.partial_cmp(b) {
            Some(Ordering::Equal) => continue,
            Some(o) => return Ok(o),
            None => return Err(Error::invalid("layer values must not be NaN")),
        }
    }
    Ok(Ordering::Equal)
}

/// A utility over shutdown acts in one of the supported forms.
#[derive(Debug, Clone, PartialEq)]
pub enum ShutdownUtility {
    Layered(LayeredUtility),
    Lexicographic {
        c: f64,
        nu2: Vec<f64>,
    },
    /// First layer learned without the context: `[level(a), ν₂(x)]`.
    ContextFree {
        level: [f64; 2],
        nu2: Vec<f64>,
    },
}

impl ShutdownUtility {
    /// Lexicographic form with `c = 1`.
    pub fn lexicographic(nu2: Vec<f64>) -> Result<Self> {
        check_nu2(&nu2)?;
        Ok(ShutdownUtility::Lexicographic { c: 1.0, nu2 })
    }

    pub fn nu2(&self) -> &[f64] {
        match self {
            ShutdownUtility::Layered(u) => &u.nu2,
            ShutdownUtility::Lexicographic { nu2, .. } | ShutdownUtility::ContextFree { nu2, .. } => nu2,
        }
    }

    /// Layers of `[a, ·]` whose task part is worth `task`. Scalar forms
    /// put a constant in the second layer.
    pub fn layers_for(&self, a: bool, ctx: ShutdownContext, task: f64) -> [f64; 2] {
        let obeys = a == ctx.a_star;
        match self {
            ShutdownUtility::Layered(u) => [if obeys { u.gamma } else { 0.0 } + task, 0.0],
            ShutdownUtility::Lexicographic { c, .. } => [if obeys { *c } else { 0.0 }, task],
            ShutdownUtility::ContextFree { level, .. } => [level[usize::from(a)], task],
        }
    }

    pub fn layers(&self, act: ShutdownAct, ctx: ShutdownContext) -> [f64; 2] {
        self.layers_for(act.a, ctx, self.nu2()[act.x])
    }

    pub fn compare(&self, p: ShutdownAct, q: ShutdownAct, ctx: ShutdownContext) -> Ordering {
        let (u, v) = (self.layers(p, ctx), self.layers(q, ctx));
        lex_compare(&u, &v).unwrap_or(Ordering::Equal)
    }
}

/// An obeying act that fails to beat a disobeying one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Witness {
    pub context: ShutdownContext,
    pub disobeying: ShutdownAct,
    pub obeying: ShutdownAct,
    pub disobeying_value: [f64; 2],
    pub obeying_value: [f64; 2],
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "a*={} disobeying={} {:?} obeying={} {:?}",
            u8::from(self.context.a_star),
            self.disobeying,
            self.disobeying_value,
            self.obeying,
            self.obeying_value
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesiderataReport {
    /// Shutdown is never blocked when requested.
    pub d1: bool,
    /// Shutdown is never caused when not requested.
    pub d2: bool,
    pub d1_violations: usize,
    pub d2_violations: usize,
    /// Up to [`MAX_WITNESSES`] per desideratum.
    pub witnesses: Vec<Witness>,
}

impl fmt::Display for DesiderataReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d1 = {}", self.d1)?;
        writeln!(f, "d2 = {}", self.d2)?;
        writeln!(f, "d1_violations = {}", self.d1_violations)?;
        writeln!(f, "d2_violations = {}", self.d2_violations)?;
        for w in &self.witnesses {
            writeln!(f, "witness = {w}")?;
        }
        Ok(())
    }
}

/// Compares every disobeying act with every obeying act in both contexts.
pub fn check_desiderata(u: &ShutdownUtility) -> Result<DesiderataReport> {
    let n = u.nu2().len();
    if n > 1000 {
        return Err(Error::invalid(format!("exhaustive check limited to 1000 acts, got {n}")));
    }
    let mut report = DesiderataReport::default();
    for ctx in ShutdownContext::BOTH {
        let mut count = 0;
        let mut kept = 0;
        for x in 0..n {
            let bad = ShutdownAct::new(!ctx.a_star, x);
            let bad_value = u.layers(bad, ctx);
            for y in 0..n {
                let good = ShutdownAct::new(ctx.a_star, y);
                let good_value = u.layers(good, ctx);
                if lex_compare(&good_value, &bad_value)? != Ordering::Greater {
                    count += 1;
                    if kept < MAX_WITNESSES {
                        kept += 1;
                        report.witnesses.push(Witness {
                            context: ctx,
                            disobeying: bad,
                            obeying: good,
                            disobeying_value: bad_value,
                            obeying_value: good_value,
                        });
                    }
                }
            }
        }
        if ctx.a_star {
            report.d1_violations = count;
        } else {
            report.d2_violations = count;
        }
    }
    report.d1 = report.d1_violations == 0;
    report.d2 = report.d2_violations == 0;
    Ok(report)
}

/// Smallest number of tasks `k ≤ k_max` at which D1 or D2 fails, when the
/// task part of an act is a sum of `k` task utilities.
///
/// The worst case pairs a disobeying act whose tasks all sit at the top of
/// `ν₂` with an obeying act whose tasks all sit at the bottom.
pub fn multi_task_failure(u: &ShutdownUtility, k_max: usize) -> Result<Option<usize>> {
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let nu2 = u.nu2();
    let hi = nu2.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = nu2.iter().copied().fold(f64::INFINITY, f64::min);
    for k in 1..=k_max {
        let (best, worst) = (hi * k as f64, lo * k as f64);
        for ctx in ShutdownContext::BOTH {
            let bad = u.layers_for(!ctx.a_star, ctx, best);
            let good = u.layers_for(ctx.a_star, ctx, worst);
            if lex_compare(&good, &bad)? != Ordering::Greater {
                return Ok(Some(k));
            }
        }
    }
    Ok(None)
}

/// The layered and lexicographic utilities induce the same order on every
/// pair of acts, in both contexts.
pub fn orders_agree(layered: &LayeredUtility, c: f64) -> Result<bool> {
    let lex = ShutdownUtility::Lexicographic { c, nu2: layered.nu2.clone() };
    let n = layered.nu2.len();
    let acts: Vec<ShutdownAct> =
        [false, true].iter().flat_map(|&a| (0..n).map(move |x| ShutdownAct::new(a, x))).collect();
    for ctx in ShutdownContext::BOTH {
        for &p in &acts {
            for &q in &acts {
                let add = layered_value(p, ctx, layered)
                    .partial_cmp(&layered_value(q, ctx, layered))
                    .unwrap_or(Ordering::Equal);
                if add != lex.compare(p, q, ctx) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShutdownAction {
    /// Keep `[a*, o]`.
    DoN,
    /// Execute `[0, x]`.
    Block,
    /// Execute `[1, y]`.
    Cause,
    Def,
}

impl ShutdownAction {
    pub fn name(self) -> &'static str {
        match self {
            ShutdownAction::DoN => "DoN",
            ShutdownAction::Block => "BLOCK",
            ShutdownAction::Cause => "CAUSE",
            ShutdownAction::Def => "DEF",
        }
    }
}

impl fmt::Display for ShutdownAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShutdownDecision {
    pub action: ShutdownAction,
    pub tie: bool,
    /// Task-layer payoffs of the obeying alternative against the status
    /// quo; `None` when both use the same task act.
    pub payoffs: Option<ExpectedPayoffs>,
}

/// Robot decision with a lexicographic utility whose task layer has
/// posterior `post` and noisy human comparisons on that layer only.
///
/// The obedience layer rules out the disobeying action outright. What is
/// left is the assistance game on `ν₂` between the obeying act (`[0, x]`
/// or `[1, y]`) and the status quo `[a*, o]`.
pub fn decide_shutdown(
    post: &PosteriorSummary,
    ctx: ShutdownContext,
    sigma: f64,
    o: usize,
    x: usize,
    y: usize,
) -> Result<ShutdownDecision> {
    let n = post.len();
    if o >= n || x >= n || y >= n {
        return Err(Error::invalid(format!("act index outside grid of {n}")));
    }
    let (obeying, action) = if ctx.a_star { (y, ShutdownAction::Cause) } else { (x, ShutdownAction::Block) };
    if obeying == o {
        return Ok(ShutdownDecision { action: ShutdownAction::DoN, tie: true, payoffs: None });
    }
    let p = expected_payoffs_probit(&marginal_pair(post, obeying, o)?, sigma);
    let d = decide(&p)?;
    let action = match d.action {
        Action::Imm => action,
        Action::DoN => ShutdownAction::DoN,
        Action::Def => ShutdownAction::Def,
    };
    Ok(ShutdownDecision { action, tie: d.tie, payoffs: Some(p) })
}

/// Task act the robot would propose against `o`; used for both `x` and
/// `y` since the task layer does not depend on `a`.
pub fn shutdown_suggestion(post: &PosteriorSummary, o: usize, sigma: f64) -> Result<usize> {
    select_act(post, o, sigma, AcquisitionKind::Collaborative)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewedDemoConfig {
    pub n_pairs: usize,
    /// Share of comparisons made while the human wants shutdown.
    pub shutdown_share: f64,
    pub nu2: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewedDemoReport {
    /// Comparisons won by the shutdown act.
    pub shutdown_wins: usize,
    pub n_pairs: usize,
    /// Learned utility of `a = 0` and `a = 1`.
    pub levels: [f64; 2],
    pub desiderata: DesiderataReport,
}

impl SkewedDemoReport {
    /// The majority side's desideratum holds and the other one fails.
    pub fn matches_majority(&self) -> bool {
        let majority_shutdown = 2 * self.shutdown_wins > self.n_pairs;
        if majority_shutdown {
            self.desiderata.d1 && !self.desiderata.d2
        } else {
            self.desiderata.d2 && !self.desiderata.d1
        }
    }
}

impl fmt::Display for SkewedDemoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n_pairs = {}", self.n_pairs)?;
        writeln!(f, "shutdown_wins = {}", self.shutdown_wins)?;
        writeln!(f, "level_a0 = {}", self.levels[0])?;
        writeln!(f, "level_a1 = {}", self.levels[1])?;
        write!(f, "{}", self.desiderata)
    }
}

/// Learns the value of `a` from comparisons whose context was not
/// recorded, then checks the desiderata of the learned utility.
///
/// The human answers with the lexicographic utility, so each comparison
/// of `[0, x]` against `[1, y]` is won by whichever act obeys the hidden
/// instruction. Without the instruction, the learner can only fit a
/// single level per value of `a`.
pub fn skewed_dataset_demo(cfg: &SkewedDemoConfig) -> Result<SkewedDemoReport> {
    if cfg.n_pairs == 0 {
        return Err(Error::invalid("need at least one comparison"));
    }
    if !(0.0..=1.0).contains(&cfg.shutdown_share) {
        return Err(Error::invalid(format!("shutdown share must lie in [0, 1], got {}", cfg.shutdown_share)));
    }
    check_nu2(&cfg.nu2)?;
    let truth = ShutdownUtility::Lexicographic { c: 1.0, nu2: cfg.nu2.clone() };
    let n = cfg.nu2.len();
    let mut rng = seeded(cfg.seed);
    let mut pairs = Vec::with_capacity(cfg.n_pairs);
    let mut shutdown_wins = 0;
    for _ in 0..cfg.n_pairs {
        let ctx = ShutdownContext::new(rng.random_bool(cfg.shutdown_share));
        let p = ShutdownAct::new(false, rng.random_range(0..n));
        let q = ShutdownAct::new(true, rng.random_range(0..n));
        let shutdown_won = truth.compare(q, p, ctx) == Ordering::Greater;
        shutdown_wins += usize::from(shutdown_won);
        pairs.push(if shutdown_won { Preference::new(1, 0)? } else { Preference::new(0, 1)? });
    }
    let grid = ActGrid::new(vec![0.0, 1.0])?;
    let kernel = KernelConfig::new(1.0, 0.1)?;
    let post = fit_map(&PreferenceDataset::new(pairs), &kernel, 1.0, &grid)?;
    let levels = [post.mean[0], post.mean[1]];
    let learned = ShutdownUtility::ContextFree { level: levels, nu2: cfg.nu2.clone() };
    Ok(SkewedDemoReport { shutdown_wins, n_pairs: cfg.n_pairs, levels, desiderata: check_desiderata(&learned)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nu2() -> Vec<f64> {
        vec![0.3, -1.2, 2.0, 0.7, -0.4]
    }

    #[test]
    fn layered_table() {
        let u = LayeredUtility::new(5.0, nu2()).unwrap();
        let on = ShutdownContext::new(true);
        assert_eq!(layered_value(ShutdownAct::new(true, 2), on, &u), 7.0);
        assert_eq!(layered_value(ShutdownAct::new(false, 2), on, &u), 2.0);
        assert!(LayeredUtility::new(0.0, nu2()).is_err());
    }

    #[test]
    fn lex_compare_cases() {
        assert_eq!(lex_compare(&[1.0, 0.0], &[0.0, 100.0]).unwrap(), Ordering::Greater);
        assert_eq!(lex_compare(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), Ordering::Less);
        assert_eq!(lex_compare(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), Ordering::Equal);
        assert!(lex_compare(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn lex_value_layers() {
        let ctx = ShutdownContext::new(false);
        assert_eq!(lex_value(ShutdownAct::new(false, 1), ctx, 2.0, &nu2()).unwrap().layers, [2.0, -1.2]);
        assert_eq!(lex_value(ShutdownAct::new(true, 1), ctx, 2.0, &nu2()).unwrap().layers, [0.0, -1.2]);
    }

    #[test]
    fn lexicographic_passes() {
        let u = ShutdownUtility::lexicographic(nu2()).unwrap();
        let r = check_desiderata(&u).unwrap();
        assert!(r.d1 && r.d2 && r.witnesses.is_empty());
        assert_eq!(multi_task_failure(&u, 100).unwrap(), None);
    }

    #[test]
    fn small_gamma_has_witness() {
        let spread = 3.2;
        let u = ShutdownUtility::Layered(LayeredUtility::new(spread / 2.0, nu2()).unwrap());
        let r = check_desiderata(&u).unwrap();
        assert!(!r.d1 && !r.d2);
        let w = r.witnesses[0];
        assert_ne!(lex_compare(&w.obeying_value, &w.disobeying_value).unwrap(), Ordering::Greater);
    }

    #[test]
    fn gamma_multiple_of_spread_fails_at_ceiling() {
        let spread = 3.2;
        let u = ShutdownUtility::Layered(LayeredUtility::new(2.5 * spread, nu2()).unwrap());
        assert_eq!(multi_task_failure(&u, 10).unwrap(), Some(3));
        let big = ShutdownUtility::Layered(LayeredUtility::new(spread * 1.01, nu2()).unwrap());
        assert_eq!(multi_task_failure(&big, 1).unwrap(), None);
    }

    #[test]
    fn orders_agree_above_spread() {
        let u = LayeredUtility::new(3.3, nu2()).unwrap();
        assert!(orders_agree(&u, 1.0).unwrap());
        let low = LayeredUtility::new(1.0, nu2()).unwrap();
        assert!(!orders_agree(&low, 1.0).unwrap());
    }

    #[test]
    fn skewed_data_keeps_majority_desideratum() {
        let cfg = SkewedDemoConfig { n_pairs: 200, shutdown_share: 0.9, nu2: nu2(), seed: 4 };
        let r = skewed_dataset_demo(&cfg).unwrap();
        assert!(r.levels[1] > r.levels[0]);
        assert!(r.desiderata.d1 && !r.desiderata.d2);
        assert!(r.matches_majority());
    }
}
