//! Log-norm cocycle of a random walk on `GL_d` acting on directions.
//!
//! Each step draws `g = R(phi) diag(e^lambda, e^-lambda, 1, ...)` with
//! `lambda` uniform on `[-lambda_max, lambda_max]` and `R` a product of
//! Givens rotations in the coordinate planes `(i-1, i)` with uniform angles.
//! Innovation lanes: lane 0 drives `lambda`, lanes `1..d` the angles.

use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{invalid, Result};
use crate::innovations::{CoupledStream, InnovationLaw, Series};
use crate::numerics::integrate;

const BURN_IN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GlWalkModel {
    dim: usize,
    lambda_max: f64,
    start: Vec<f64>,
    /// `E X_k` for `k = 1..=BURN_IN`; the last entry is used beyond.
    means: Vec<f64>,
    exact_means: bool,
}

impl GlWalkModel {
    /// Walk from the direction `start` (normalized here). In dimension 2 the
    /// means are computed by quadrature; otherwise by a Monte Carlo pre-pass
    /// with `pilot_paths` paths keyed by `pilot_seed`.
    pub fn new(dim: usize, lambda_max: f64, start: Vec<f64>, pilot_seed: u64, pilot_paths: usize) -> Result<Self> {
        if dim < 2 {
            return Err(invalid("dimension must be at least 2"));
        }
        if !(lambda_max >= 0.0 && lambda_max.is_finite()) {
            return Err(invalid("lambda_max must be finite and non-negative"));
        }
        if start.len() != dim {
            return Err(invalid(format!("start direction has {} coordinates, expected {dim}", start.len())));
        }
        let norm = start.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("start direction must be a nonzero finite vector"));
        }
        let start: Vec<f64> = start.iter().map(|x| x / norm).collect();
        let mut model = Self {
            dim,
            lambda_max,
            start,
            means: vec![0.0; BURN_IN],
            exact_means: dim == 2,
        };
        model.means = if dim == 2 {
            model.quadrature_means()
        } else {
            model.pilot_means(pilot_seed, pilot_paths.max(1))
        };
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn start(&self) -> &[f64] {
        &self.start
    }

    pub fn law(&self) -> InnovationLaw {
        InnovationLaw::UnitUniform { lanes: self.dim }
    }

    pub fn means_are_exact(&self) -> bool {
        self.exact_means
    }

    /// Centering subtracted from the raw log-gain at step `k >= 1`.
    pub fn mean(&self, k: usize) -> f64 {
        self.means[k.clamp(1, BURN_IN) - 1]
    }

    // E over lambda of h(lambda)
    fn lambda_average(&self, h: impl Fn(f64) -> f64) -> f64 {
        if self.lambda_max == 0.0 {
            return h(0.0);
        }
        integrate(h, -self.lambda_max, self.lambda_max, 64) / (2.0 * self.lambda_max)
    }

    fn log_gain_2d(lambda: f64, c2: f64, s2: f64) -> f64 {
        0.5 * ((2.0 * lambda).exp() * c2 + (-2.0 * lambda).exp() * s2).ln()
    }

    fn quadrature_means(&self) -> Vec<f64> {
        let (c2, s2) = (self.start[0].powi(2), self.start[1].powi(2));
        let first = self.lambda_average(|l| Self::log_gain_2d(l, c2, s2));
        // after one step the direction is uniform on the circle, where the
        // angular average of the log-gain is log cosh(lambda)
        let later = self.lambda_average(|l| l.cosh().ln());
        let mut means = vec![later; BURN_IN];
        means[0] = first;
        means
    }

    fn pilot_means(&self, seed: u64, paths: usize) -> Vec<f64> {
        let law = self.law();
        let mut sums = vec![0.0; BURN_IN];
        let mut y = vec![0.0; self.dim];
        for r in 0..paths {
            let stream = CoupledStream::new(seed, r as u64, law);
            y.copy_from_slice(&self.start);
            for (k, s) in sums.iter_mut().enumerate() {
                *s += self.step(&stream, Series::Base, k as i64 + 1, &mut y);
            }
        }
        // beyond the burn-in the chain is treated as stationary
        sums.iter().map(|s| s / paths as f64).collect()
    }

    /// Exact stationary variance of the log-gain in dimension 2, where the
    /// increments after the first are i.i.d.
    pub fn stationary_variance_2d(&self) -> Option<f64> {
        if self.dim != 2 {
            return None;
        }
        let m = self.mean(2);
        let second = self.lambda_average(|l| {
            integrate(
                |t| {
                    let g = Self::log_gain_2d(l, t.cos().powi(2), t.sin().powi(2)) - m;
                    g * g
                },
                0.0,
                FRAC_PI_2,
                16,
            ) / FRAC_PI_2
        });
        Some(second)
    }

    /// Apply the matrix keyed at `time` to `y` (unit vector, updated in
    /// place); returns the raw log-gain.
    #[inline]
    pub(crate) fn step(&self, stream: &CoupledStream, series: Series, time: i64, y: &mut [f64]) -> f64 {
        let lambda = self.lambda_max * (2.0 * stream.uniform(series, time, 0) - 1.0);
        self.apply(lambda, |i| TAU * stream.uniform(series, time, i), y)
    }

    #[inline]
    fn apply(&self, lambda: f64, angle: impl Fn(usize) -> f64, y: &mut [f64]) -> f64 {
        y[0] *= lambda.exp();
        y[1] *= (-lambda).exp();
        for i in 1..self.dim {
            let (s, c) = angle(i).sin_cos();
            let (a, b) = (y[i - 1], y[i]);
            y[i - 1] = c * a - s * b;
            y[i] = s * a + c * b;
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in y.iter_mut() {
            *v /= norm;
        }
        norm.ln()
    }

    /// Centered `X_k` from a window anchored at `k` holding (at least) the
    /// innovations at times `1..=k`, i.e. depth `>= k`.
    pub(crate) fn evaluate_lanes(&self, k: usize, lane: impl Fn(usize, usize) -> f64) -> f64 {
        let mut y = self.start.clone();
        let mut x = 0.0;
        for t in 1..=k {
            let offset = k - t;
            let lambda = self.lambda_max * (2.0 * lane(offset, 0) - 1.0);
            x = self.apply(lambda, |i| TAU * lane(offset, i), &mut y);
        }
        x - self.mean(k)
    }

    /// Centered path `X_1..X_n` started at `start` (or another direction).
    pub fn path_from(&self, stream: &CoupledStream, series: Series, start: &[f64], n: usize) -> Vec<f64> {
        let mut y = start.to_vec();
        (1..=n)
            .map(|k| self.step(stream, series, k as i64, &mut y) - self.mean(k))
            .collect()
    }

    pub(crate) fn sum_from_start(&self, stream: &CoupledStream, n: usize, y: &mut Vec<f64>) -> f64 {
        y.clear();
        y.extend_from_slice(&self.start);
        let mut s = 0.0;
        for k in 1..=n {
            s += self.step(stream, Series::Base, k as i64, y) - self.mean(k);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_rotations_have_zero_gain() {
        let m = GlWalkModel::new(2, 0.0, vec![1.0, 0.0], 1, 10).unwrap();
        let s = CoupledStream::new(3, 0, m.law());
        assert!(m.path_from(&s, Series::Base, m.start(), 50).iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn quadrature_means_match_pilot() {
        let exact = GlWalkModel::new(2, 1.0, vec![0.6, 0.8], 1, 1).unwrap();
        let mut pilot = exact.clone();
        pilot.means = pilot.pilot_means(11, 200_000);
        for k in [1, 2, 5] {
            // log-gain is bounded by lambda_max, so the pilot error is below 4 / sqrt(R)
            assert!((exact.mean(k) - pilot.mean(k)).abs() < 4.0 / 200_000f64.sqrt(), "k={k}");
        }
    }

    #[test]
    fn higher_dimension_runs_and_centers() {
        let m = GlWalkModel::new(3, 1.0, vec![1.0, 1.0, 1.0], 5, 20_000).unwrap();
        assert!(!m.means_are_exact());
        let r = 20_000;
        let mut acc = 0.0;
        for i in 0..r {
            let s = CoupledStream::new(99, i, m.law());
            acc += m.path_from(&s, Series::Base, m.start(), 4)[3];
        }
        assert!((acc / r as f64).abs() < 0.03);
    }
}
