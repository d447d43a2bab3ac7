//! The assistance game from the robot's side.
//!
//! Given a posterior belief over `(ν(x), ν(o))`, the robot compares three
//! actions: implement the suggestion `x` (IMM), keep the status quo `o`
//! (DoN), or defer to the human (DEF), who then picks between `x` and `o`
//! through their own noisy or banded comparison.

mod acquisition;
mod honest;
mod montecarlo;
mod payoffs;
mod vector;

pub use acquisition::{acquisition_expectation, acquisition_values, select_act, AcquisitionKind};
pub use honest::{flip_strict, honest_message_experiment, HonestConfig, HonestReport, StrategyOutcome};
pub use montecarlo::{
    mc_expected_payoffs, mc_expected_payoffs_at, Estimate, McReport, McSettings, PairSource, SemiorderSettings,
    MIN_SAMPLES,
};
pub use payoffs::{
    cost_beta, decide, decide_semiorder, def_excess, expected_payoffs_probit, expected_payoffs_semiorder,
    expected_payoffs_with_cost, semiorder_branches, Criterion, SemiorderBranches,
};
pub use vector::{vector_decide, Dominance, VectorOutcome};

use std::fmt;

/// Margin below which a decision is flagged as a tie.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Imm,
    Def,
    DoN,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Imm => "IMM",
            Action::Def => "DEF",
            Action::DoN => "DoN",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    /// The winning margin was below [`TIE_TOLERANCE`].
    pub tie: bool,
}

/// Deferral payoff: a number under noisy comparisons, a set under the
/// semiorder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DefValue {
    Scalar(f64),
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedPayoffs {
    pub def_value: DefValue,
    pub imm_value: f64,
    pub don_value: f64,
    /// `def − max(imm, don)` evaluated without cancellation, so that its
    /// sign survives when the gap is far below the payoffs' ulp.
    def_margin: f64,
}

impl ExpectedPayoffs {
    pub fn scalar(def: f64, imm: f64, don: f64) -> Self {
        Self { def_value: DefValue::Scalar(def), imm_value: imm, don_value: don, def_margin: def - imm.max(don) }
    }

    pub(crate) fn scalar_with_margin(def: f64, imm: f64, don: f64, def_margin: f64) -> Self {
        Self { def_value: DefValue::Scalar(def), imm_value: imm, don_value: don, def_margin }
    }

    pub fn interval(lo: f64, hi: f64, imm: f64, don: f64) -> Self {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        Self { def_value: DefValue::Interval { lo, hi }, imm_value: imm, don_value: don, def_margin: lo - imm.max(don) }
    }

    /// Scalar deferral payoff, or `None` for the interval form.
    pub fn def_scalar(&self) -> Option<f64> {
        match self.def_value {
            DefValue::Scalar(v) => Some(v),
            DefValue::Interval { .. } => None,
        }
    }

    /// `def − max(imm, don)` for the scalar form, the lower endpoint's gap
    /// for the interval form.
    pub fn def_margin(&self) -> f64 {
        self.def_margin
    }

    /// The same payoffs with `c` added to every action.
    pub fn shifted(&self, c: f64) -> Self {
        let def_value = match self.def_value {
            DefValue::Scalar(v) => DefValue::Scalar(v + c),
            DefValue::Interval { lo, hi } => DefValue::Interval { lo: lo + c, hi: hi + c },
        };
        Self { def_value, imm_value: self.imm_value + c, don_value: self.don_value + c, def_margin: self.def_margin }
    }
}

/// Cost of talking: `γ` scales with `|ν(o)|`, the message costs `γ·ℓ` and a
/// deferral one extra unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConfig {
    pub gamma: f64,
    pub message_length: usize,
}

impl CostConfig {
    pub fn new(gamma: f64, message_length: usize) -> crate::Result<Self> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(crate::Error::InvalidArgument(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self { gamma, message_length })
    }

    pub fn cheap_talk() -> Self {
        Self { gamma: 0.0, message_length: 0 }
    }
}
