//! Scalar Gaussian closed forms.
//!
//! Every payoff in the game module is a composition of the standard normal
//! density and distribution function, so the accuracy of [`std_cdf`] bounds
//! everything downstream. Φ is evaluated through the fdlibm `erfc` port in
//! `libm`, which is accurate to within an ulp or two across the real line.

use crate::error::{Error, Result};

pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point Φ is evaluated through the continued fraction for the
/// Mills ratio instead of `erfc`, which starts losing relative precision.
const MILLS_CF_THRESHOLD: f64 = -25.0;

/// Standard normal density φ(x).
#[inline]
pub fn std_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function Φ(x).
#[inline]
pub fn std_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `ln Φ(x)`, finite for all finite `x`.
pub fn ln_std_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-std_cdf(-x)).ln_1p()
    } else if x >= MILLS_CF_THRESHOLD {
        std_cdf(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI - pdf_cdf_ratio(x).ln()
    }
}

/// The hazard φ(x)/Φ(x) (inverse Mills ratio of −x), stable in the far
/// left tail where both numerator and denominator underflow.
pub fn pdf_cdf_ratio(x: f64) -> f64 {
    if x >= MILLS_CF_THRESHOLD {
        return std_pdf(x) / std_cdf(x);
    }
    // Φ(x)/φ(x) = R(t), t = −x, with R(t) = 1/(t + 1/(t + 2/(t + 3/(t + …)))).
    let t = -x;
    let mut tail = t;
    for k in (1..=60).rev() {
        tail = t + k as f64 / tail;
    }
    tail
}

/// ∫ φ(x) φ(a + b x) dx.
pub fn pdf_pdf_integral(a: f64, b: f64) -> f64 {
    let r = (1.0 + b * b).sqrt();
    std_pdf(a / r) / r
}

/// ∫ Φ(a + b x) φ(x) dx.
pub fn cdf_pdf_integral(a: f64, b: f64) -> f64 {
    std_cdf(a / (1.0 + b * b).sqrt())
}

/// ∫ x Φ(a + b x) φ(x) dx.
pub fn x_cdf_pdf_integral(a: f64, b: f64) -> f64 {
    let r = (1.0 + b * b).sqrt();
    b / r * std_pdf(a / r)
}

/// Φ and φ at a possibly infinite standardised bound.
#[inline]
fn cdf_pdf_at(z: f64) -> (f64, f64) {
    if z == f64::INFINITY {
        (1.0, 0.0)
    } else if z == f64::NEG_INFINITY {
        (0.0, 0.0)
    } else {
        (std_cdf(z), std_pdf(z))
    }
}

fn standardise(bound: f64, m: f64, s: f64) -> f64 {
    if bound.is_infinite() {
        bound
    } else {
        (bound - m) / s
    }
}

/// `E[x·1{a ≤ x ≤ b}]` for `x ~ N(m, s²)`. Either bound may be infinite.
pub fn truncated_mean(m: f64, s: f64, a: f64, b: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {s}")));
    }
    if a.is_nan() || b.is_nan() || a > b {
        return Err(Error::invalid(format!("need a <= b, got [{a}, {b}]")));
    }
    let (cdf_b, pdf_b) = cdf_pdf_at(standardise(b, m, s));
    let (cdf_a, pdf_a) = cdf_pdf_at(standardise(a, m, s));
    Ok(m * (cdf_b - cdf_a) - s * (pdf_b - pdf_a))
}

/// `E[|x|]` for `x ~ N(m, s²)`.
pub fn expected_abs(m: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {s}")));
    }
    let z = -m / s;
    Ok(m * (1.0 - 2.0 * std_cdf(z)) + 2.0 * s * std_pdf(z))
}

/// Joint Gaussian belief over the utilities of the suggested act `x` and the
/// status quo `o`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateBelief {
    pub mu_x: f64,
    pub mu_o: f64,
    pub k_xx: f64,
    pub k_oo: f64,
    pub k_xo: f64,
}

/// Relative slack allowed on `k_xo² ≤ k_xx·k_oo` for covariances assembled
/// from floating-point posteriors.
const PSD_TOL: f64 = 1e-8;

impl BivariateBelief {
    pub fn new(mu_x: f64, mu_o: f64, k_xx: f64, k_oo: f64, k_xo: f64) -> Result<Self> {
        let all = [mu_x, mu_o, k_xx, k_oo, k_xo];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("belief entries must be finite"));
        }
        if k_xx < 0.0 || k_oo < 0.0 {
            return Err(Error::NotPsd(format!("negative variance ({k_xx}, {k_oo})")));
        }
        let bound = k_xx * k_oo;
        if k_xo * k_xo > bound + PSD_TOL * bound.max(1e-300).max(k_xo * k_xo) {
            return Err(Error::NotPsd(format!("k_xo² = {} exceeds k_xx·k_oo = {bound}", k_xo * k_xo)));
        }
        Ok(Self { mu_x, mu_o, k_xx, k_oo, k_xo })
    }

    /// A Dirac belief: the utilities are known exactly.
    pub fn point(mu_x: f64, mu_o: f64) -> Self {
        Self { mu_x, mu_o, k_xx: 0.0, k_oo: 0.0, k_xo: 0.0 }
    }

    /// Variance of `ν(x) − ν(o)`, clamped at zero.
    pub fn q2(&self) -> f64 {
        (self.k_xx - 2.0 * self.k_xo + self.k_oo).max(0.0)
    }

    /// The same belief with the roles of `x` and `o` exchanged.
    pub fn swapped(&self) -> Self {
        Self { mu_x: self.mu_o, mu_o: self.mu_x, k_xx: self.k_oo, k_oo: self.k_xx, k_xo: self.k_xo }
    }

    pub fn has_uncertainty(&self) -> bool {
        self.k_xx > 0.0 || self.k_oo > 0.0
    }

    /// Standard deviation of the noisy comparison `ν(x)+n(x) − ν(o)−n(o)`.
    pub fn comparison_scale(&self, sigma: f64) -> f64 {
        (2.0 * sigma * sigma + self.q2()).sqrt()
    }
}

/// `P(ν(x)+n(x) > ν(o)+n(o))` with independent `n ~ N(0, σ²)`.
///
/// When the comparison is deterministic (σ = 0 and q² = 0) this returns the
/// pointwise limit: 1, 0 or ½ on equal means.
pub fn prob_noisy_dominance(belief: &BivariateBelief, sigma: f64) -> f64 {
    let diff = belief.mu_x - belief.mu_o;
    let scale = belief.comparison_scale(sigma);
    if scale > 0.0 {
        std_cdf(diff / scale)
    } else if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// `E[ν(x)·1{ν(x)+n(x) > ν(o)+n(o)}]`.
///
/// Degenerate comparisons follow [`prob_noisy_dominance`]: `mu_x`, 0, or
/// `mu_x/2`.
pub fn expected_winner_utility(belief: &BivariateBelief, sigma: f64) -> f64 {
    let diff = belief.mu_x - belief.mu_o;
    let scale = belief.comparison_scale(sigma);
    if scale > 0.0 {
        let z = diff / scale;
        belief.mu_x * std_cdf(z) + (belief.k_xx - belief.k_xo) / scale * std_pdf(z)
    } else {
        belief.mu_x * prob_noisy_dominance(belief, sigma)
    }
}
