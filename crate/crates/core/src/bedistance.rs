//! Kolmogorov distance between the normalized partial sum and the standard
//! normal law.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::innovations::InnovationLaw;
use crate::numerics::{golden_section_max, normal_cdf};
use crate::processes::{CoefficientScheme, ProcessModel};
use crate::variance::{
    autocovariance, exact_longrun_variance_linear, exact_sum_variance_linear, variance_identity, AutocovMethod,
    MonteCarlo, DEGENERACY_THRESHOLD,
};

/// Default `delta_conf` of the confidence bands.
pub const DEFAULT_CONFIDENCE_DELTA: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Normalization {
    /// `S_n / sqrt(n ss^2)`
    #[serde(rename = "sqrt-n-ss2")]
    SqrtNSs2,
    /// `S_n / sqrt(E S_n^2)`
    #[serde(rename = "sqrt-ESn2")]
    SqrtESn2,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::SqrtNSs2 => "sqrt-n-ss2",
            Normalization::SqrtESn2 => "sqrt-ESn2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaMethod {
    Empirical,
    GaussianClosedForm,
}

impl DeltaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DeltaMethod::Empirical => "empirical",
            DeltaMethod::GaussianClosedForm => "gaussian-closed-form",
        }
    }
}

/// One measurement of `Delta_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BEEstimate {
    pub n: usize,
    pub normalization: Normalization,
    pub delta: f64,
    pub low: f64,
    pub high: f64,
    pub method: DeltaMethod,
    /// Replications (0 in closed form).
    pub replications: usize,
    pub seed: u64,
    pub first_replication: u64,
}

impl BEEstimate {
    /// Half-width of the band (0 in closed form).
    pub fn halfwidth(&self) -> f64 {
        match self.method {
            DeltaMethod::GaussianClosedForm => 0.0,
            DeltaMethod::Empirical => self.high - self.delta,
        }
    }
}

/// Dvoretzky-Kiefer-Wolfowitz half-width `sqrt(ln(2/delta) / (2R))`.
pub fn dkw_halfwidth(replications: usize, confidence_delta: f64) -> f64 {
    ((2.0 / confidence_delta).ln() / (2.0 * replications as f64)).sqrt()
}

/// `sup_x |F_R(x) - Phi(x)|` of the empirical distribution of `samples`,
/// evaluated at the jump points (both one-sided gaps). Sorts in place.
pub fn kolmogorov_distance(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let r = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let phi = normal_cdf(t);
            (((i + 1) as f64 / r) - phi).max(phi - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

/// Exact variance used by a normalization: `ss^2` or `E S_n^2`.
pub fn exact_scale(model: &ProcessModel, n: usize, normalization: Normalization) -> Result<f64> {
    let missing = || Error::Unsupported {
        operation: "exact normalization (supply an estimated scale)",
        model: model.describe(),
    };
    let value = match normalization {
        Normalization::SqrtNSs2 => model.exact_longrun_variance().ok_or_else(missing)?,
        Normalization::SqrtESn2 => match model {
            ProcessModel::Linear(lin) => exact_sum_variance_linear(&lin.simulated_scheme(), n),
            ProcessModel::Doubling(_) => {
                let table = autocovariance(model, n.max(2) - 1, AutocovMethod::ExactDoubling, None)?;
                variance_identity(&table.gamma, n)
            }
            _ => return Err(missing()),
        },
    };
    Ok(value)
}

fn denominator(scale: f64, n: usize, normalization: Normalization) -> Result<f64> {
    if !(scale > DEGENERACY_THRESHOLD) {
        return Err(Error::DegenerateVariance { value: scale });
    }
    Ok(match normalization {
        Normalization::SqrtNSs2 => (n as f64 * scale).sqrt(),
        Normalization::SqrtESn2 => scale.sqrt(),
    })
}

/// Monte Carlo `Delta_n` over the replications `mc.range()`. `scale` is the
/// variance behind the normalization (`ss^2` or `E S_n^2`); when `None` it is
/// taken exactly from the simulated model.
pub fn empirical_delta(
    model: &ProcessModel,
    n: usize,
    normalization: Normalization,
    mc: MonteCarlo,
    scale: Option<f64>,
    confidence_delta: f64,
) -> Result<BEEstimate> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    if mc.replications < 2 {
        return Err(invalid("empirical Delta_n needs at least 2 replications"));
    }
    let scale = match scale {
        Some(s) => s,
        None => exact_scale(model, n, normalization)?,
    };
    let denom = denominator(scale, n, normalization)?;
    let kernel = model.sum_kernel(n);
    let mut t: Vec<f64> = mc
        .range()
        .into_par_iter()
        .map(|r| kernel.sum(mc.seed, r) / denom)
        .collect();
    let delta = kolmogorov_distance(&mut t);
    let h = dkw_halfwidth(mc.replications, confidence_delta);
    Ok(BEEstimate {
        n,
        normalization,
        delta,
        low: (delta - h).max(0.0),
        high: (delta + h).min(1.0),
        method: DeltaMethod::Empirical,
        replications: mc.replications,
        seed: mc.seed,
        first_replication: mc.first,
    })
}

/// `sup_x |Phi(x / r) - Phi(x)|`.
pub fn gaussian_closed_form_delta(r: f64) -> f64 {
    assert!(r > 0.0, "scale ratio must be positive");
    if r == 1.0 {
        return 0.0;
    }
    let gap = |x: f64| (normal_cdf(x / r) - normal_cdf(x)).abs();
    golden_section_max(gap, 0.0, 10.0, 1e-9).1
}

/// Exact `Delta_n` of a Gaussian linear process with coefficients `scheme`:
/// `S_n` is centered normal with variance `E S_n^2`.
pub fn exact_delta_gaussian_linear(scheme: &CoefficientScheme, n: usize, normalization: Normalization) -> Result<BEEstimate> {
    scheme.validate()?;
    let esn2 = exact_sum_variance_linear(scheme, n);
    let delta = match normalization {
        Normalization::SqrtESn2 => {
            denominator(esn2, 1, normalization)?;
            0.0
        }
        Normalization::SqrtNSs2 => {
            let ss2 = exact_longrun_variance_linear(scheme)?;
            gaussian_closed_form_delta((esn2 / (n as f64 * ss2)).sqrt())
        }
    };
    Ok(BEEstimate {
        n,
        normalization,
        delta,
        low: delta,
        high: delta,
        method: DeltaMethod::GaussianClosedForm,
        replications: 0,
        seed: 0,
        first_replication: 0,
    })
}

/// Closed form for a Gaussian linear model (its simulated coefficients).
pub fn exact_delta_for_model(model: &ProcessModel, n: usize, normalization: Normalization) -> Result<BEEstimate> {
    match model {
        ProcessModel::Linear(lin) if lin.law() == InnovationLaw::StandardGaussian => {
            exact_delta_gaussian_linear(&lin.simulated_scheme(), n, normalization)
        }
        _ => Err(Error::Unsupported {
            operation: "closed-form Delta_n (needs a Gaussian linear model)",
            model: model.describe(),
        }),
    }
}

pub fn write_estimates_csv(path: impl AsRef<Path>, estimates: &[BEEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "normalization", "delta", "low", "high", "method", "R", "seed", "first_replication"])?;
    for e in estimates {
        w.write_record([
            e.n.to_string(),
            e.normalization.name().to_string(),
            e.delta.to_string(),
            e.low.to_string(),
            e.high.to_string(),
            e.method.name().to_string(),
            e.replications.to_string(),
            e.seed.to_string(),
            e.first_replication.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
