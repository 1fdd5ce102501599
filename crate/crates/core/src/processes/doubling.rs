//! Observables of the doubling map `T x = 2x mod 1` in its binary
//! representation `x_k = sum_j 2^{-j-1} zeta_{k-j}`.
//!
//! The state is kept as a 64-bit fixed-point register whose most significant
//! bit is the newest bit `zeta_k`; advancing the map by one step is a shift.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoublingObservable {
    /// `cos(2 pi x)`
    Cos2pi,
    /// `x - 1/2`
    CenteredX,
    /// `1_{[0, 1/2)}(x) - 1/2`
    IndicatorHalf,
}

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;
const TABLE_BITS: u32 = 12;

fn turn_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let size = 1usize << TABLE_BITS;
        (0..size)
            .map(|i| {
                let a = TAU * i as f64 / size as f64;
                (a.cos(), a.sin())
            })
            .collect()
    })
}

/// `cos(2 pi u / 2^64)` from a table of the top bits and short Taylor series
/// for the remainder angle (below `2 pi / 4096`).
#[inline]
pub fn turn_cos(u: u64) -> f64 {
    let (c, s) = turn_table()[(u >> (64 - TABLE_BITS)) as usize];
    let rest = u & ((1u64 << (64 - TABLE_BITS)) - 1);
    let d = TAU * rest as f64 / TWO_POW_64;
    let d2 = d * d;
    let cd = 1.0 - d2 / 2.0 * (1.0 - d2 / 12.0 * (1.0 - d2 / 30.0));
    let sd = d * (1.0 - d2 / 6.0 * (1.0 - d2 / 20.0 * (1.0 - d2 / 42.0)));
    c * cd - s * sd
}

impl DoublingObservable {
    pub fn name(&self) -> &'static str {
        match self {
            DoublingObservable::Cos2pi => "cos2pi",
            DoublingObservable::CenteredX => "centered-x",
            DoublingObservable::IndicatorHalf => "indicator-half",
        }
    }

    /// `f(x)` at real `x` in `[0, 1)`.
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            DoublingObservable::Cos2pi => (TAU * x).cos(),
            DoublingObservable::CenteredX => x - 0.5,
            DoublingObservable::IndicatorHalf => {
                if x < 0.5 {
                    0.5
                } else {
                    -0.5
                }
            }
        }
    }

    /// `f(u / 2^64)`.
    #[inline]
    pub fn apply_fixed(&self, u: u64) -> f64 {
        match self {
            DoublingObservable::Cos2pi => turn_cos(u),
            DoublingObservable::CenteredX => u as f64 / TWO_POW_64 - 0.5,
            DoublingObservable::IndicatorHalf => {
                if u >> 63 == 0 {
                    0.5
                } else {
                    -0.5
                }
            }
        }
    }

    /// `int_0^1 f(x + h u) du`, the conditional mean given the leading bits
    /// (so `x` is a multiple of `h`).
    pub fn cell_average(&self, x: f64, h: f64) -> f64 {
        match self {
            DoublingObservable::Cos2pi => {
                // (sin 2pi(x+h) - sin 2pi x) / (2 pi h) without cancellation
                let s = std::f64::consts::PI * h;
                (TAU * (x + 0.5 * h)).cos() * if s == 0.0 { 1.0 } else { s.sin() / s }
            }
            DoublingObservable::CenteredX => x + 0.5 * h - 0.5,
            DoublingObservable::IndicatorHalf => ((0.5 - x) / h).clamp(0.0, 1.0) - 0.5,
        }
    }

    /// Lipschitz constant, or `None` for the discontinuous indicator.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            DoublingObservable::Cos2pi => Some(TAU),
            DoublingObservable::CenteredX => Some(1.0),
            DoublingObservable::IndicatorHalf => None,
        }
    }

    /// `int_0^1 f(x) dx`.
    pub fn mean(&self) -> f64 {
        0.0
    }

    /// `int_0^1 f(x) f(2^k x mod 1) dx`.
    pub fn autocovariance(&self, k: usize) -> f64 {
        match self {
            DoublingObservable::Cos2pi => {
                if k == 0 {
                    0.5
                } else {
                    0.0
                }
            }
            // x - 1/2 = -sum_j 2^{-j-1} r_j with Rademacher digits r_j = 1 - 2 zeta_j,
            // and the shift drops k digits
            DoublingObservable::CenteredX => 2f64.powi(-(k as i32)) / 12.0,
            DoublingObservable::IndicatorHalf => {
                if k == 0 {
                    0.25
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fixed-point register holding the newest `depth` bits of the window whose
/// offset-`j` entry is `bits(j)`.
pub(crate) fn register_from_bits(depth: usize, bits: impl Fn(usize) -> u64) -> u64 {
    let mut u = 0u64;
    for j in 0..depth.min(64) {
        u |= (bits(j) & 1) << (63 - j);
    }
    u
}

pub(crate) fn depth_mask(depth: usize) -> u64 {
    if depth >= 64 {
        u64::MAX
    } else if depth == 0 {
        0
    } else {
        !((1u64 << (64 - depth)) - 1)
    }
}
