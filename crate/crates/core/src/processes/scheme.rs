//! Coefficient sequences `alpha_0, alpha_1, ...` of linear processes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numerics::{hurwitz_diff, hurwitz_zeta, power_diff, smooth_tail_integral};

/// Base sequence `a_j` of a difference scheme `alpha_j = a_j - a_{j-1}`
/// (`a_0 = 0`, so `alpha_1 = a_1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "sequence")]
pub enum DifferenceBase {
    /// `a_j = j^{-beta}`, `beta` in `(0, 1/2)`.
    Power { beta: f64 },
    /// `a_j = 1 / log(j + 1)`.
    Log,
}

impl DifferenceBase {
    fn at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match self {
            DifferenceBase::Power { beta } => x.powf(-beta),
            DifferenceBase::Log => 1.0 / x.ln_1p(),
        }
    }

    /// `a(x + n) - a(x)` for `x >= 1`, accurate when `n << x`.
    fn increment(&self, x: f64, n: f64) -> f64 {
        match self {
            DifferenceBase::Power { beta } => -power_diff(x, n, *beta),
            DifferenceBase::Log => {
                let (l0, l1) = (x.ln_1p(), (x + n).ln_1p());
                -(n / (1.0 + x)).ln_1p() / (l0 * l1)
            }
        }
    }
}

/// Coefficients of `X_k = sum_j alpha_j eps_{k-j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum CoefficientScheme {
    /// Finite list `alpha_0, ..., alpha_{L-1}`; zero afterwards.
    Explicit { coefficients: Vec<f64> },
    /// `alpha_0 = 0`, `alpha_j = j^{-exponent}`.
    PowerLaw { exponent: f64 },
    /// `alpha_j = ratio^j`.
    Geometric { ratio: f64 },
    /// Cancellation construction `alpha_j = a_j - a_{j-1}`.
    Difference { base: DifferenceBase },
}

impl CoefficientScheme {
    pub fn identity() -> Self {
        CoefficientScheme::Explicit {
            coefficients: vec![1.0],
        }
    }

    pub fn power_law(exponent: f64) -> Self {
        CoefficientScheme::PowerLaw { exponent }
    }

    pub fn geometric(ratio: f64) -> Self {
        CoefficientScheme::Geometric { ratio }
    }

    pub fn difference_power(beta: f64) -> Self {
        CoefficientScheme::Difference {
            base: DifferenceBase::Power { beta },
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CoefficientScheme::Explicit { coefficients } => {
                if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("explicit scheme needs at least one finite coefficient"));
                }
            }
            CoefficientScheme::PowerLaw { exponent } => {
                if !(*exponent > 0.5) {
                    return Err(invalid(format!("power-law exponent {exponent} must exceed 1/2")));
                }
            }
            CoefficientScheme::Geometric { ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(invalid(format!("geometric ratio {ratio} must lie in (0, 1)")));
                }
            }
            CoefficientScheme::Difference { base } => {
                if let DifferenceBase::Power { beta } = base {
                    if !(*beta > 0.0 && *beta < 0.5) {
                        return Err(invalid(format!("difference exponent {beta} must lie in (0, 1/2)")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of nonzero-able coefficients, `None` for infinite schemes.
    pub fn finite_len(&self) -> Option<usize> {
        match self {
            CoefficientScheme::Explicit { coefficients } => Some(coefficients.len()),
            _ => None,
        }
    }

    pub fn coefficient(&self, j: usize) -> f64 {
        match self {
            CoefficientScheme::Explicit { coefficients } => coefficients.get(j).copied().unwrap_or(0.0),
            CoefficientScheme::PowerLaw { exponent } => {
                if j == 0 {
                    0.0
                } else {
                    (j as f64).powf(-exponent)
                }
            }
            CoefficientScheme::Geometric { ratio } => ratio.powi(j as i32),
            CoefficientScheme::Difference { base } => {
                if j == 0 {
                    0.0
                } else if j == 1 {
                    base.at(1.0)
                } else {
                    base.increment(j as f64 - 1.0, 1.0)
                }
            }
        }
    }

    pub fn coefficients(&self, len: usize) -> Vec<f64> {
        match self {
            CoefficientScheme::Geometric { ratio } => {
                let mut v = Vec::with_capacity(len);
                let mut c = 1.0;
                for _ in 0..len {
                    v.push(c);
                    c *= ratio;
                }
                v
            }
            _ => (0..len).map(|j| self.coefficient(j)).collect(),
        }
    }

    /// `sum_{j=0}^{m} alpha_j`.
    pub fn partial_sum(&self, m: usize) -> f64 {
        match self {
            CoefficientScheme::Explicit { coefficients } => {
                coefficients.iter().take(m + 1).sum()
            }
            CoefficientScheme::PowerLaw { exponent } => {
                if m == 0 {
                    0.0
                } else {
                    hurwitz_diff(*exponent, 1.0, m as f64)
                }
            }
            CoefficientScheme::Geometric { ratio } => (1.0 - ratio.powi(m as i32 + 1)) / (1.0 - ratio),
            CoefficientScheme::Difference { base } => base.at(m as f64),
        }
    }

    /// `sum_{j >= 0} alpha_j`, `None` when the series diverges.
    pub fn total_sum(&self) -> Option<f64> {
        match self {
            CoefficientScheme::Explicit { coefficients } => Some(coefficients.iter().sum()),
            CoefficientScheme::PowerLaw { exponent } => {
                (*exponent > 1.0).then(|| hurwitz_zeta(*exponent, 1.0))
            }
            CoefficientScheme::Geometric { ratio } => Some(1.0 / (1.0 - ratio)),
            CoefficientScheme::Difference { .. } => Some(0.0),
        }
    }

    /// `sum_{j=i+1}^{i+n} alpha_j`, the weight of `eps_{-i}` in `S_n`.
    /// Defined for real `x >= 0` on the analytic schemes.
    pub fn window_sum(&self, x: f64, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            CoefficientScheme::Explicit { coefficients } => {
                let i = x as usize;
                coefficients.iter().skip(i + 1).take(n).sum()
            }
            CoefficientScheme::PowerLaw { exponent } => hurwitz_diff(*exponent, x + 1.0, nf),
            CoefficientScheme::Geometric { ratio } => {
                ratio.powf(x + 1.0) * (1.0 - ratio.powi(n as i32)) / (1.0 - ratio)
            }
            CoefficientScheme::Difference { base } => {
                if x < 1.0 {
                    base.at(x + nf) - base.at(x)
                } else {
                    base.increment(x, nf)
                }
            }
        }
    }

    /// `sum_{j >= J} alpha_j^2`.
    pub fn square_tail(&self, depth: usize) -> f64 {
        match self {
            CoefficientScheme::Explicit { coefficients } => {
                coefficients.iter().skip(depth).map(|c| c * c).sum()
            }
            CoefficientScheme::PowerLaw { exponent } => hurwitz_zeta(2.0 * exponent, depth.max(1) as f64),
            CoefficientScheme::Geometric { ratio } => {
                ratio.powi(2 * depth as i32) / (1.0 - ratio * ratio)
            }
            CoefficientScheme::Difference { base } => {
                let start = depth.max(2);
                let exact = 4096usize;
                let head: f64 = (0..exact)
                    .map(|i| {
                        let a = self.coefficient(start + i);
                        a * a
                    })
                    .sum();
                let lead = if depth <= 1 { base.at(1.0).powi(2) } else { 0.0 };
                lead + head
                    + smooth_tail_integral(
                        |x| base.increment(x - 1.0, 1.0).powi(2),
                        (start + exact) as f64 - 0.5,
                    )
            }
        }
    }

    /// Smallest depth `J` with `sqrt(sum_{j>=J} alpha_j^2) <= tolerance`.
    pub fn depth_for_tolerance(&self, tolerance: f64) -> usize {
        if let Some(len) = self.finite_len() {
            // trailing coefficients below tolerance may still be dropped
            let mut j = len;
            while j > 1 && self.square_tail(j - 1).sqrt() <= tolerance {
                j -= 1;
            }
            return j;
        }
        let ok = |j: usize| self.square_tail(j).sqrt() <= tolerance;
        let mut hi = 1usize;
        while !ok(hi) {
            hi *= 2;
            if hi > 1 << 40 {
                return hi;
            }
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi.max(1)
    }

    /// Explicit scheme holding the first `len` coefficients.
    pub fn truncated(&self, len: usize) -> Self {
        CoefficientScheme::Explicit {
            coefficients: self.coefficients(len.max(1)),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            CoefficientScheme::Explicit { coefficients } => format!("explicit[{}]", coefficients.len()),
            CoefficientScheme::PowerLaw { exponent } => format!("power-law(a={exponent})"),
            CoefficientScheme::Geometric { ratio } => format!("geometric(rho={ratio})"),
            CoefficientScheme::Difference { base: DifferenceBase::Power { beta } } => {
                format!("difference(power beta={beta})")
            }
            CoefficientScheme::Difference { base: DifferenceBase::Log } => "difference(log)".into(),
        }
    }
}
