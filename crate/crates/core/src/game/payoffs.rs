use super::{Action, CostConfig, Decision, DefValue, ExpectedPayoffs, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::gauss::{expected_abs, ln_std_cdf, std_cdf, std_pdf, BivariateBelief};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `E[DEF] − max(μx, μo)` for the noisy comparison, computed as
/// `(q²/s)·φ(z) − |d|·Φ(−z)` with `z = |d|/s`.
///
/// Both terms can underflow when `z` is large; the sign is then recovered
/// in log space and the result is the smallest positive or negative
/// normal number.
pub fn def_excess(belief: &BivariateBelief, sigma: f64) -> f64 {
    let d = belief.mu_x - belief.mu_o;
    let s = belief.comparison_scale(sigma);
    if s == 0.0 {
        return 0.0;
    }
    let q2 = belief.q2();
    let z = d.abs() / s;
    let gain = q2 / s * std_pdf(z);
    let loss = d.abs() * std_cdf(-z);
    if gain != 0.0 || loss != 0.0 {
        return gain - loss;
    }
    let ln_gain = if q2 > 0.0 { (q2 / s).ln() - 0.5 * z * z - LN_SQRT_2PI } else { f64::NEG_INFINITY };
    let ln_loss = if d != 0.0 { d.abs().ln() + ln_std_cdf(-z) } else { f64::NEG_INFINITY };
    if ln_gain > ln_loss {
        f64::MIN_POSITIVE
    } else if ln_gain < ln_loss {
        -f64::MIN_POSITIVE
    } else {
        0.0
    }
}

/// DEF, IMM and DoN payoffs when the human compares `ν + n` with
/// `n ~ N(0, σ²)`.
pub fn expected_payoffs_probit(belief: &BivariateBelief, sigma: f64) -> ExpectedPayoffs {
    let excess = def_excess(belief, sigma);
    let best = belief.mu_x.max(belief.mu_o);
    ExpectedPayoffs::scalar_with_margin(best + excess, belief.mu_x, belief.mu_o, excess)
}

/// `γ·E|ν(o)|`, the extra cost a deferral adds.
pub fn cost_beta(belief: &BivariateBelief, gamma: f64) -> f64 {
    if gamma == 0.0 {
        return 0.0;
    }
    let e_abs = if belief.k_oo > 0.0 {
        expected_abs(belief.mu_o, belief.k_oo.sqrt()).unwrap_or(belief.mu_o.abs())
    } else {
        belief.mu_o.abs()
    };
    gamma * e_abs
}

/// Payoffs under messaging cost. The message cost common to all actions is
/// dropped; DEF pays the extra `β`.
pub fn expected_payoffs_with_cost(belief: &BivariateBelief, sigma: f64, cost: &CostConfig) -> ExpectedPayoffs {
    let base = expected_payoffs_probit(belief, sigma);
    let beta = cost_beta(belief, cost.gamma);
    let def = base.def_scalar().unwrap_or(f64::NAN) - beta;
    ExpectedPayoffs::scalar_with_margin(def, base.imm_value, base.don_value, base.def_margin() - beta)
}

/// Picks the best action, preferring DEF and then DoN on ties.
pub fn decide(p: &ExpectedPayoffs) -> Result<Decision> {
    if p.def_scalar().is_none() {
        return Err(Error::invalid("decide needs a scalar deferral payoff"));
    }
    Ok(resolve(p.def_margin(), p.imm_value, p.don_value))
}

fn resolve(def_margin: f64, imm: f64, don: f64) -> Decision {
    if def_margin >= 0.0 {
        return Decision { action: Action::Def, tie: def_margin < TIE_TOLERANCE };
    }
    let action = if don >= imm { Action::DoN } else { Action::Imm };
    let margin = (imm - don).abs().min(-def_margin);
    Decision { action, tie: margin < TIE_TOLERANCE }
}

/// The pieces of the semiorder deferral payoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiorderBranches {
    /// `E[ν(x)·1{ν(x) > ν(o)+σ} + ν(o)·1{ν(o) > ν(x)+σ}]`.
    pub outside: f64,
    /// `E[ν(x)·1{|ν(x)−ν(o)| ≤ σ}]`.
    pub band_x: f64,
    /// `E[ν(o)·1{|ν(x)−ν(o)| ≤ σ}]`.
    pub band_o: f64,
    /// `P(|ν(x)−ν(o)| ≤ σ)`.
    pub band_prob: f64,
}

impl SemiorderBranches {
    /// Expected payoff when the human's indifference resolves to `x`, with
    /// imprecision penalty `ε` charged inside the band.
    pub fn via_x(&self, epsilon: f64) -> f64 {
        self.outside + self.band_x - epsilon * self.band_prob
    }

    pub fn via_o(&self, epsilon: f64) -> f64 {
        self.outside + self.band_o - epsilon * self.band_prob
    }
}

fn check_band(sigma: f64, epsilon: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("band width must be > 0, got {sigma}")));
    }
    if !(epsilon > 0.0 && epsilon <= sigma) {
        return Err(Error::invalid(format!("epsilon must lie in (0, {sigma}], got {epsilon}")));
    }
    Ok(())
}

pub fn semiorder_branches(belief: &BivariateBelief, sigma: f64) -> SemiorderBranches {
    let d = belief.mu_x - belief.mu_o;
    let q = belief.q2().sqrt();
    if q == 0.0 {
        return if d > sigma {
            SemiorderBranches { outside: belief.mu_x, band_x: 0.0, band_o: 0.0, band_prob: 0.0 }
        } else if -d > sigma {
            SemiorderBranches { outside: belief.mu_o, band_x: 0.0, band_o: 0.0, band_prob: 0.0 }
        } else {
            SemiorderBranches { outside: 0.0, band_x: belief.mu_x, band_o: belief.mu_o, band_prob: 1.0 }
        };
    }
    let up = (d - sigma) / q; // ν(x) clears the band
    let down = (-d - sigma) / q; // ν(o) clears the band
    let cx = (belief.k_xx - belief.k_xo) / q;
    let co = (belief.k_oo - belief.k_xo) / q;
    let outside = belief.mu_x * std_cdf(up) + cx * std_pdf(up) + belief.mu_o * std_cdf(down) + co * std_pdf(down);
    let band_prob = (std_cdf((sigma - d) / q) - std_cdf(down)).max(0.0);
    let phi_gap = std_pdf((sigma + d) / q) - std_pdf((sigma - d) / q);
    SemiorderBranches {
        outside,
        band_x: belief.mu_x * band_prob + cx * phi_gap,
        band_o: belief.mu_o * band_prob - co * phi_gap,
        band_prob,
    }
}

/// Interval deferral payoff under a discernibility band `σ` with
/// imprecision penalty `ε ∈ (0, σ]`.
pub fn expected_payoffs_semiorder(belief: &BivariateBelief, sigma: f64, epsilon: f64) -> Result<ExpectedPayoffs> {
    check_band(sigma, epsilon)?;
    let b = semiorder_branches(belief, sigma);
    Ok(ExpectedPayoffs::interval(b.via_x(epsilon), b.via_o(epsilon), belief.mu_x, belief.mu_o))
}

/// Dominance criterion for set-valued deferral payoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Defer when the worst deferral outcome matches the best alternative.
    A,
    /// Defer when the best deferral outcome matches the best alternative.
    B,
}

pub fn decide_semiorder(p: &ExpectedPayoffs, criterion: Criterion) -> Decision {
    let (lo, hi) = match p.def_value {
        DefValue::Interval { lo, hi } => (lo, hi),
        DefValue::Scalar(v) => (v, v),
    };
    let endpoint = match criterion {
        Criterion::A => lo,
        Criterion::B => hi,
    };
    resolve(endpoint - p.imm_value.max(p.don_value), p.imm_value, p.don_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::expected_winner_utility;

    #[test]
    fn stable_def_matches_lemma_sum() {
        let b = BivariateBelief::new(0.3, -0.2, 1.1, 0.7, 0.25).unwrap();
        for sigma in [0.0, 0.3, 1.0, 2.5] {
            let direct = expected_winner_utility(&b, sigma) + expected_winner_utility(&b.swapped(), sigma);
            let p = expected_payoffs_probit(&b, sigma);
            assert!((p.def_scalar().unwrap() - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn far_apart_means_keep_the_sign() {
        let b = BivariateBelief::point(40.0, 0.0);
        let p = expected_payoffs_probit(&b, 0.5);
        assert!(p.def_margin() < 0.0);
        assert_ne!(decide(&p).unwrap().action, Action::Def);
        let b = BivariateBelief::new(40.0, 0.0, 1e-3, 1e-3, 0.0).unwrap();
        assert!(def_excess(&b, 0.0) > 0.0);
    }

    #[test]
    fn tie_rules() {
        let d = decide(&ExpectedPayoffs::scalar(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(d, Decision { action: Action::Def, tie: true });
        let d = decide(&ExpectedPayoffs::scalar(0.0, 1.0, 1.0)).unwrap();
        assert_eq!(d, Decision { action: Action::DoN, tie: true });
        let d = decide(&ExpectedPayoffs::scalar(0.0, 2.0, 1.0)).unwrap();
        assert_eq!(d, Decision { action: Action::Imm, tie: false });
    }

    #[test]
    fn semiorder_criteria() {
        let p = ExpectedPayoffs::interval(5.0, 7.0, 4.0, 3.0);
        assert_eq!(decide_semiorder(&p, Criterion::A).action, Action::Def);
        let p = ExpectedPayoffs::interval(2.0, 7.0, 4.0, 3.0);
        assert_eq!(decide_semiorder(&p, Criterion::A).action, Action::Imm);
        assert_eq!(decide_semiorder(&p, Criterion::B).action, Action::Def);
    }

    #[test]
    fn semiorder_degenerate_cases() {
        let p = expected_payoffs_semiorder(&BivariateBelief::point(3.0, 1.0), 1.0, 0.5).unwrap();
        assert_eq!(p.def_value, DefValue::Interval { lo: 3.0, hi: 3.0 });
        let p = expected_payoffs_semiorder(&BivariateBelief::point(2.0, 2.0), 1.0, 0.5).unwrap();
        assert_eq!(p.def_value, DefValue::Interval { lo: 1.5, hi: 1.5 });
        assert_eq!(decide_semiorder(&p, Criterion::B).action, Action::DoN);
        assert!(expected_payoffs_semiorder(&BivariateBelief::point(0.0, 0.0), 1.0, 1.5).is_err());
    }

    #[test]
    fn wide_band_holds_all_mass() {
        let b = BivariateBelief::new(0.4, 0.1, 1.0, 0.8, 0.3).unwrap();
        let br = semiorder_branches(&b, 0.7);
        assert!(br.band_prob > 0.0 && br.band_prob < 1.0);
        let wide = semiorder_branches(&b, 1e6);
        assert!((wide.band_prob - 1.0).abs() < 1e-12);
        assert!((wide.band_x - b.mu_x).abs() < 1e-9);
        assert!((wide.band_o - b.mu_o).abs() < 1e-9);
    }
}
