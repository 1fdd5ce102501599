//! Autocovariances, long-run variances and exact partial-sum variances.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::{hurwitz_zeta, line_fit, smooth_tail_integral};
use crate::processes::{CoefficientScheme, DoublingObservable, ProcessModel};

/// Long-run variances at or below this value are treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;
/// Allowed residual of the block variance identity in exact mode.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;
/// Steps dropped before lagged products are collected on non-stationary models.
const GL_BURN_IN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutocovMethod {
    ExactLinear,
    ExactDoubling,
    MonteCarlo,
}

impl AutocovMethod {
    pub fn is_exact(&self) -> bool {
        !matches!(self, AutocovMethod::MonteCarlo)
    }
}

/// Seed and replication count of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub seed: u64,
    /// First replication index used; estimates own `first..first + replications`.
    #[serde(default)]
    pub first: u64,
    pub replications: usize,
}

impl MonteCarlo {
    pub fn new(seed: u64, replications: usize) -> Self {
        Self {
            seed,
            first: 0,
            replications,
        }
    }

    pub fn range(&self) -> std::ops::Range<u64> {
        self.first..self.first + self.replications as u64
    }
}

/// `gamma(k) = E X_0 X_k` for `k = 0..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutocovarianceTable {
    pub gamma: Vec<f64>,
    pub stderr: Vec<f64>,
    pub method: AutocovMethod,
}

impl AutocovarianceTable {
    pub fn max_lag(&self) -> usize {
        self.gamma.len() - 1
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lag", "gamma", "stderr", "method"])?;
        let method = serde_json::to_value(self.method)?;
        let method = method.as_str().unwrap_or_default().to_string();
        for (k, (g, s)) in self.gamma.iter().zip(&self.stderr).enumerate() {
            w.write_record([k.to_string(), g.to_string(), s.to_string(), method.clone()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sum_{k in Z} gamma(k)` of the doubling-map observables.
pub fn doubling_longrun_variance(observable: DoublingObservable) -> f64 {
    match observable {
        DoublingObservable::Cos2pi => 0.5,
        // (1/12)(1 + 2 sum_k 2^-k)
        DoublingObservable::CenteredX => 0.25,
        DoublingObservable::IndicatorHalf => 0.25,
    }
}

/// Autocovariances up to lag `max_lag`.
pub fn autocovariance(
    model: &ProcessModel,
    max_lag: usize,
    method: AutocovMethod,
    mc: Option<MonteCarlo>,
) -> Result<AutocovarianceTable> {
    if max_lag < 1 {
        return Err(invalid("autocovariance needs max lag K >= 1"));
    }
    let mismatch = || Error::Unsupported {
        operation: "this autocovariance method",
        model: model.describe(),
    };
    let gamma = match (method, model) {
        (AutocovMethod::ExactLinear, ProcessModel::Linear(lin)) => linear_autocovariances(lin.coefficients(), max_lag),
        (AutocovMethod::ExactDoubling, ProcessModel::Doubling(d)) => {
            if d.projection().is_some() || d.depth() != 64 {
                return Err(mismatch());
            }
            (0..=max_lag).map(|k| d.observable().autocovariance(k)).collect()
        }
        (AutocovMethod::MonteCarlo, _) => {
            let mc = mc.ok_or_else(|| invalid("Monte Carlo autocovariance needs a seed and replication count"))?;
            return monte_carlo_autocovariance(model, max_lag, mc);
        }
        _ => return Err(mismatch()),
    };
    Ok(AutocovarianceTable {
        stderr: vec![0.0; gamma.len()],
        gamma,
        method,
    })
}

/// `gamma(k) = sum_j alpha_j alpha_{j+k}` for unit-variance innovations.
pub fn linear_autocovariances(alpha: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag)
        .map(|k| {
            if k >= alpha.len() {
                0.0
            } else {
                alpha.iter().zip(&alpha[k..]).map(|(a, b)| a * b).sum()
            }
        })
        .collect()
}

fn monte_carlo_autocovariance(model: &ProcessModel, max_lag: usize, mc: MonteCarlo) -> Result<AutocovarianceTable> {
    if mc.replications < 2 {
        return Err(invalid("Monte Carlo autocovariance needs at least 2 replications"));
    }
    let burn = if model.is_stationary() { 0 } else { GL_BURN_IN };
    let span = 4 * (max_lag + 1);
    let len = burn + span + max_lag;
    let per_rep: Vec<Vec<f64>> = mc
        .range()
        .into_par_iter()
        .map(|r| {
            let path = model.sample_path(mc.seed, r, len);
            let x = &path[burn..];
            (0..=max_lag)
                .map(|k| (0..span).map(|i| x[i] * x[i + k]).sum::<f64>() / span as f64)
                .collect()
        })
        .collect();
    let r = per_rep.len() as f64;
    let mut gamma = vec![0.0; max_lag + 1];
    for row in &per_rep {
        for (g, v) in gamma.iter_mut().zip(row) {
            *g += v;
        }
    }
    gamma.iter_mut().for_each(|g| *g /= r);
    let mut var = vec![0.0; max_lag + 1];
    for row in &per_rep {
        for ((s, v), g) in var.iter_mut().zip(row).zip(&gamma) {
            *s += (v - g) * (v - g);
        }
    }
    let stderr = var.iter().map(|s| (s / (r - 1.0) / r).sqrt()).collect();
    Ok(AutocovarianceTable {
        gamma,
        stderr,
        method: AutocovMethod::MonteCarlo,
    })
}

/// `sum_{k in Z} gamma(k)` from a table, with the tail beyond `K` extrapolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRunVariance {
    pub value: f64,
    /// `gamma(0) + 2 sum_{k=1}^{K} gamma(k)`.
    pub partial: f64,
    pub tail_correction: f64,
    /// Fitted decay exponent of `|gamma(k)|` over the last octave of lags.
    pub tail_exponent: Option<f64>,
    pub note: String,
}

pub fn longrun_variance(table: &AutocovarianceTable) -> Result<LongRunVariance> {
    let g = &table.gamma;
    let k_max = table.max_lag();
    let partial = g[0] + 2.0 * g[1..].iter().sum::<f64>();
    let (tail_correction, tail_exponent, note) = tail_fit(table);
    let value = partial + tail_correction;
    if value <= DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateVariance { value });
    }
    let note = format!("lags 0..={k_max}; {note}");
    Ok(LongRunVariance {
        value,
        partial,
        tail_correction,
        tail_exponent,
        note,
    })
}

// power-law extrapolation of the lags beyond K from the last octave
fn tail_fit(table: &AutocovarianceTable) -> (f64, Option<f64>, String) {
    let k_max = table.max_lag();
    if k_max < 8 {
        return (0.0, None, "too few lags for a tail fit".into());
    }
    let lo = k_max / 2;
    let lags = lo..=k_max;
    let g = &table.gamma;
    let sign = g[k_max].signum();
    let usable = lags.clone().all(|k| {
        g[k] != 0.0 && g[k].signum() == sign && (table.method.is_exact() || g[k].abs() > 2.0 * table.stderr[k])
    });
    if g[k_max] == 0.0 {
        return (0.0, None, "autocovariances vanish at the last lag; no tail".into());
    }
    if !usable {
        return (0.0, None, "last octave not of one sign or not significant; no tail correction".into());
    }
    let x: Vec<f64> = lags.clone().map(|k| (k as f64).ln()).collect();
    let y: Vec<f64> = lags.map(|k| g[k].abs().ln()).collect();
    let Some(fit) = line_fit(&x, &y) else {
        return (0.0, None, "tail fit failed".into());
    };
    let b = fit.slope;
    if b >= -1.0 {
        return (0.0, Some(b), format!("tail exponent {b:.3} not summable; no correction"));
    }
    let c = sign * fit.intercept.exp();
    let tail = 2.0 * c * hurwitz_zeta(-b, k_max as f64 + 1.0);
    (tail, Some(b), format!("power-law tail exponent {b:.3}"))
}

/// `(sum_j alpha_j)^2` of the untruncated scheme.
pub fn exact_longrun_variance_linear(scheme: &CoefficientScheme) -> Result<f64> {
    let total = scheme.total_sum().ok_or_else(|| Error::Unsupported {
        operation: "exact long-run variance (coefficients not summable)",
        model: scheme.describe(),
    })?;
    let value = total * total;
    if value <= DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateVariance { value });
    }
    Ok(value)
}

/// `E S_n^2` of the linear process with unit-variance innovations, from the
/// weights of the individual innovations in `S_n`: `P_i = sum_{j<=i} alpha_j`
/// for `eps_{n-i}`, `W_i = sum_{j=i+1}^{i+n} alpha_j` for `eps_{-i}`.
pub fn exact_sum_variance_linear(scheme: &CoefficientScheme, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut inner = 0.0;
    let mut p = 0.0;
    match scheme {
        CoefficientScheme::Explicit { coefficients } => {
            for i in 0..n {
                p += coefficients.get(i).copied().unwrap_or(0.0);
                inner += p * p;
            }
        }
        _ => {
            let alpha = scheme.coefficients(n);
            for a in alpha {
                p += a;
                inner += p * p;
            }
        }
    }
    inner + past_weights_square_sum(scheme, n)
}

/// `sum_{i >= 0} W_i^2`.
fn past_weights_square_sum(scheme: &CoefficientScheme, n: usize) -> f64 {
    match scheme {
        CoefficientScheme::Explicit { coefficients } => {
            let len = coefficients.len();
            let mut prefix = vec![0.0; len + 1];
            for (j, a) in coefficients.iter().enumerate() {
                prefix[j + 1] = prefix[j] + a;
            }
            // W_i = P_{min(i+n, L-1)} - P_i, zero once i >= L - 1
            (0..len.saturating_sub(1))
                .map(|i| {
                    let w = prefix[(i + n).min(len - 1) + 1] - prefix[i + 1];
                    w * w
                })
                .sum()
        }
        CoefficientScheme::Geometric { ratio } => {
            let r = *ratio;
            let q = 1.0 - r.powi(n as i32);
            r * r * q * q / ((1.0 - r) * (1.0 - r) * (1.0 - r * r))
        }
        _ => {
            let exact = 4 * n + 4096;
            let mut acc = 0.0;
            let mut w = 0.0;
            let next_sum = |i: usize, w: f64| -> f64 {
                if i % 1024 == 0 {
                    scheme.window_sum(i as f64, n)
                } else {
                    w - scheme.coefficient(i) + scheme.coefficient(i + n)
                }
            };
            for i in 0..exact {
                w = next_sum(i, w);
                acc += w * w;
            }
            acc + smooth_tail_integral(|x| scheme.window_sum(x, n).powi(2), exact as f64 - 0.5)
        }
    }
}

/// `n sum_k gamma(k) - sum_k min(n, |k|) gamma(k)` over all lags in the table
/// (two-sided), which equals `E S_n^2` when the table covers every nonzero lag.
pub fn variance_identity(gamma: &[f64], n: usize) -> f64 {
    let total = gamma[0] + 2.0 * gamma[1..].iter().sum::<f64>();
    let correction: f64 = 2.0
        * gamma
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, g)| k.min(n) as f64 * g)
            .sum::<f64>();
    n as f64 * total - correction
}

/// Both sides of the block variance identity for an `m`-dependent table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaHat {
    pub m: usize,
    /// `(2m)^{-1} sum_{k,l=1}^{m} gamma_m(k - l)`.
    pub value: f64,
    /// `(m ss_m^2 - sum_k min(m, |k|) gamma_m(k)) / (2m)`.
    pub expansion: f64,
    pub residual: f64,
    /// `ss_m^2`.
    pub longrun: f64,
}

pub fn sigma_hat_m(table: &AutocovarianceTable, m: usize) -> Result<SigmaHat> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let g = &table.gamma;
    if table.max_lag() + 1 < m {
        return Err(invalid(format!(
            "table covers lags up to {}, need {} for m = {m}",
            table.max_lag(),
            m - 1
        )));
    }
    let mf = m as f64;
    let double: f64 = mf * g[0] + 2.0 * (1..m).map(|k| (mf - k as f64) * g[k]).sum::<f64>();
    let value = double / (2.0 * mf);
    let longrun = g[0] + 2.0 * g[1..].iter().sum::<f64>();
    let correction = 2.0 * g.iter().enumerate().skip(1).map(|(k, v)| k.min(m) as f64 * v).sum::<f64>();
    let expansion = (mf * longrun - correction) / (2.0 * mf);
    let residual = (value - expansion).abs();
    if table.method.is_exact() && residual > IDENTITY_TOLERANCE {
        return Err(Error::IdentityResidual {
            residual,
            tolerance: IDENTITY_TOLERANCE,
        });
    }
    Ok(SigmaHat {
        m,
        value,
        expansion,
        residual,
        longrun,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub model: String,
    /// Long-run variance `ss^2`.
    pub longrun: f64,
    /// Exact `(sum alpha)^2` of the untruncated linear scheme, when available.
    pub longrun_exact: Option<f64>,
    pub n: usize,
    /// `n^{-1} E S_n^2`.
    pub sn2: Option<f64>,
    pub sigma_hat: Option<SigmaHat>,
    pub tail_note: String,
}

impl VarianceReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
