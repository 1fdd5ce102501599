//! `Delta_n` over dyadic grids of `n` and log-log rate fits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bedistance::{
    empirical_delta, exact_delta_for_model, write_estimates_csv, BEEstimate, DeltaMethod, Normalization,
};
use crate::error::{invalid, Error, Result};
use crate::innovations::InnovationLaw;
use crate::numerics::{line_fit, weighted_line_fit};
use crate::processes::ProcessModel;
use crate::variance::MonteCarlo;

/// Minimum number of usable grid points of a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// `2^lo, 2^{lo+1}, ..., 2^hi`.
pub fn dyadic_n_grid(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

fn is_dyadic_grid(grid: &[usize]) -> bool {
    grid.iter().all(|n| n.is_power_of_two()) && grid.windows(2).all(|w| w[1] == 2 * w[0])
}

/// Settings of one rate experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSettings {
    pub normalization: Normalization,
    pub seed: u64,
    pub replications: usize,
    pub confidence_delta: f64,
    /// Variance behind the normalization when the model has no exact one
    /// (`ss^2`; ignored under `sqrt-ESn2` unless the model lacks `E S_n^2`).
    pub scale: Option<f64>,
    /// Use the closed form for Gaussian linear models.
    pub allow_closed_form: bool,
}

/// One estimate per grid point; grid point `i` owns the replications
/// `[i R, (i + 1) R)`.
pub fn run_rate_experiment(model: &ProcessModel, grid: &[usize], settings: &RateSettings) -> Result<Vec<BEEstimate>> {
    if grid.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: grid.len(),
        });
    }
    if !is_dyadic_grid(grid) {
        return Err(invalid("the n-grid must be consecutive powers of two"));
    }
    let closed = settings.allow_closed_form
        && matches!(model, ProcessModel::Linear(l) if l.law() == InnovationLaw::StandardGaussian);
    grid.iter()
        .enumerate()
        .map(|(i, &n)| {
            if closed {
                exact_delta_for_model(model, n, settings.normalization)
            } else {
                let mc = MonteCarlo {
                    seed: settings.seed,
                    first: i as u64 * settings.replications as u64,
                    replications: settings.replications,
                };
                let scale = match settings.normalization {
                    Normalization::SqrtNSs2 => settings.scale,
                    Normalization::SqrtESn2 => None,
                };
                empirical_delta(model, n, settings.normalization, mc, scale, settings.confidence_delta)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// Weights `(delta / (high - low))^2`.
    InverseRelativeBand,
    /// All points exact: ordinary least squares.
    Unweighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub n: usize,
    pub delta: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Half-width of the 95% slope interval (Student t).
    pub slope_halfwidth: f64,
    pub r_squared: f64,
    pub points: Vec<FitPoint>,
    pub censored: Vec<FitPoint>,
    pub weighting: Weighting,
    pub notes: Vec<String>,
}

impl RateFit {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Weighted log-log regression of `delta` on `n`. Zero estimates and
/// Monte Carlo estimates within their band half-width of zero are censored.
pub fn fit_rate(estimates: &[BEEstimate]) -> Result<RateFit> {
    let mut points = Vec::new();
    let mut censored = Vec::new();
    let mut notes = Vec::new();
    for e in estimates {
        let p = FitPoint {
            n: e.n,
            delta: e.delta,
            low: e.low,
            high: e.high,
        };
        if e.delta <= 0.0 {
            notes.push(format!("n = {}: zero estimate excluded", e.n));
            censored.push(p);
        } else if e.method == DeltaMethod::Empirical && e.delta <= e.halfwidth() {
            notes.push(format!(
                "n = {}: estimate {:.3e} below its band half-width {:.3e}, censored",
                e.n,
                e.delta,
                e.halfwidth()
            ));
            censored.push(p);
        } else {
            points.push(p);
        }
    }
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::TooFewPoints {
            need: MIN_FIT_POINTS,
            got: points.len(),
        });
    }
    let exact = estimates
        .iter()
        .all(|e| e.method == DeltaMethod::GaussianClosedForm);
    let x: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|p| p.delta.ln()).collect();
    let (fit, weighting) = if exact {
        (line_fit(&x, &y), Weighting::Unweighted)
    } else {
        let w: Vec<f64> = points
            .iter()
            .map(|p| {
                let width = p.high - p.low;
                if width > 0.0 {
                    (p.delta / width).powi(2)
                } else {
                    1.0
                }
            })
            .collect();
        (weighted_line_fit(&x, &y, &w), Weighting::InverseRelativeBand)
    };
    let fit = fit.ok_or_else(|| invalid("degenerate n-grid"))?;
    Ok(RateFit {
        slope: fit.slope,
        intercept: fit.intercept,
        slope_stderr: fit.slope_stderr,
        slope_halfwidth: fit.slope_halfwidth(0.95),
        r_squared: fit.r_squared,
        points,
        censored,
        weighting,
        notes,
    })
}

/// Combined `(n, delta, band)` table.
pub fn write_rate_csv(path: impl AsRef<Path>, estimates: &[BEEstimate]) -> Result<()> {
    write_estimates_csv(path, estimates)
}
