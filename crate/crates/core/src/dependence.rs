//! Physical dependence coefficients `theta'_l(p) = ||X_l - X_l'||_p` and
//! `theta*_l(p) = ||X_l - X_l*||_p`, and fit-based summability checks.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::innovations::{CoupledStream, InnovationLaw, InnovationWindow, Series};
use crate::numerics::line_fit;
use crate::processes::{GlWalkModel, LinearModel, ProcessModel};
use crate::variance::MonteCarlo;

/// Bootstrap resamples behind every Monte Carlo standard error.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// `B(p) = 1/2 + min(p, 3) / (2p) - 1/p`; NaN at `p = 0`.
pub fn boundary_b(p: f64) -> f64 {
    if p == 0.0 {
        return f64::NAN;
    }
    // one rounding: exact at the integer points
    (p + p.min(3.0) - 2.0) / (2.0 * p)
}

/// Dyadic grid `1, 2, 4, ..., 2^levels`.
pub fn dyadic_grid(levels: u32) -> Vec<usize> {
    (0..=levels).map(|i| 1usize << i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMode {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEntry {
    pub l: usize,
    pub theta_prime: f64,
    pub theta_star: f64,
    pub se_prime: f64,
    pub se_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceProfile {
    pub p: f64,
    pub entries: Vec<ThetaEntry>,
    pub mode: ProfileMode,
    /// Replications per entry (0 in closed form).
    pub replications: usize,
}

impl DependenceProfile {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["l", "theta_prime", "theta_star", "se_prime", "se_star"])?;
        for e in &self.entries {
            w.write_record([
                e.l.to_string(),
                e.theta_prime.to_string(),
                e.theta_star.to_string(),
                e.se_prime.to_string(),
                e.se_star.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `||eps - eps'||_p` for unit-variance innovations, where known exactly.
fn coupling_norm(law: InnovationLaw, p: f64) -> Result<f64> {
    match law {
        // eps - eps' ~ N(0, 2)
        InnovationLaw::StandardGaussian => Ok(2f64.sqrt() * law.abs_moment(p).powf(1.0 / p)),
        _ if p == 2.0 => Ok(2f64.sqrt()),
        _ => Err(invalid(format!(
            "closed-form coefficients for {} innovations need p = 2",
            law.name()
        ))),
    }
}

/// Exact coefficients of a (truncated) linear model: `theta'_l = c_p |alpha_l|`,
/// `theta*_l = c_p sqrt(sum_{j >= l} alpha_j^2)` with `c_p = ||eps - eps'||_p`
/// (the second formula needs Gaussian innovations unless `p = 2`).
pub fn closed_form_profile(model: &LinearModel, ls: &[usize], p: f64) -> Result<DependenceProfile> {
    let c = coupling_norm(model.law(), p)?;
    let alpha = model.coefficients();
    let entries = ls
        .iter()
        .map(|&l| {
            let tail: f64 = alpha.iter().skip(l).map(|a| a * a).sum();
            ThetaEntry {
                l,
                theta_prime: c * alpha.get(l).copied().unwrap_or(0.0).abs(),
                theta_star: c * tail.sqrt(),
                se_prime: 0.0,
                se_star: 0.0,
            }
        })
        .collect();
    Ok(DependenceProfile {
        p,
        entries,
        mode: ProfileMode::ClosedForm,
        replications: 0,
    })
}

/// Monte Carlo estimate of `theta'_l(p)` and `theta*_l(p)`.
pub fn theta_mc(model: &ProcessModel, l: usize, p: f64, mc: MonteCarlo) -> Result<ThetaEntry> {
    Ok(theta_profile(model, &[l], p, mc)?.entries[0])
}

/// Monte Carlo profile over the lags `ls`, sharing one base and one prime
/// draw per replication across all lags.
pub fn theta_profile(model: &ProcessModel, ls: &[usize], p: f64, mc: MonteCarlo) -> Result<DependenceProfile> {
    if !(p >= 1.0) {
        return Err(invalid(format!("moment order p = {p} must be at least 1")));
    }
    if mc.replications < 2 {
        return Err(invalid("theta estimation needs at least 2 replications"));
    }
    if ls.is_empty() {
        return Err(invalid("empty lag grid"));
    }
    let depth = model.required_depth().ok_or_else(|| Error::Unsupported {
        operation: "theta_mc (use the walk surrogate)",
        model: model.describe(),
    })?;
    let law = model.law();
    let lanes = law.lanes();
    let l_max = *ls.iter().max().unwrap();
    let samples: Vec<Vec<(f64, f64)>> = mc
        .range()
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let stream = CoupledStream::new(mc.seed, r, law);
            // base: times l_max down to -depth+1; prime: times 0 down to -depth+1
            let base = stream.draw_window(Series::Base, l_max as i64, l_max + depth);
            let prime = stream.draw_window(Series::Prime, 0, depth);
            ls.iter()
                .map(|&l| {
                    let shift = (l_max - l) * lanes;
                    let values = base.values()[shift..shift + depth * lanes].to_vec();
                    let w = InnovationWindow::from_parts(stream, l as i64, values);
                    let x = model.evaluate(&w)?;
                    if l >= depth {
                        // the replaced innovations lie beyond the filter's reach
                        return Ok((0.0, 0.0));
                    }
                    let mut primed = w.values().to_vec();
                    primed[l * lanes..(l + 1) * lanes].copy_from_slice(&prime.values()[..lanes]);
                    let mut starred = w.values().to_vec();
                    starred[l * lanes..].copy_from_slice(&prime.values()[..(depth - l) * lanes]);
                    let xp = model.evaluate(&InnovationWindow::from_parts(stream, l as i64, primed))?;
                    let xs = model.evaluate(&InnovationWindow::from_parts(stream, l as i64, starred))?;
                    Ok(((x - xp).abs().powf(p), (x - xs).abs().powf(p)))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let entries = ls
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let prime: Vec<f64> = samples.iter().map(|s| s[i].0).collect();
            let star: Vec<f64> = samples.iter().map(|s| s[i].1).collect();
            let (theta_prime, se_prime) = power_mean_with_se(&prime, p, bootstrap_seed(mc.seed, l, 0));
            let (theta_star, se_star) = power_mean_with_se(&star, p, bootstrap_seed(mc.seed, l, 1));
            ThetaEntry {
                l,
                theta_prime,
                theta_star,
                se_prime,
                se_star,
            }
        })
        .collect();
    Ok(DependenceProfile {
        p,
        entries,
        mode: ProfileMode::MonteCarlo,
        replications: mc.replications,
    })
}

fn bootstrap_seed(seed: u64, l: usize, which: u64) -> u64 {
    seed ^ (l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (which << 62)
}

/// `(mean^{1/p}, bootstrap standard error)` of the p-th powers `v`.
fn power_mean_with_se(v: &[f64], p: f64, seed: u64) -> (f64, f64) {
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let boots: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let s: f64 = (0..n).map(|_| v[rng.gen_range(0..n)]).sum();
            (s / n as f64).powf(1.0 / p)
        })
        .collect();
    let bm = boots.iter().sum::<f64>() / boots.len() as f64;
    let var = boots.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (boots.len() - 1) as f64;
    (mean.powf(1.0 / p), var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateEstimate {
    pub k: usize,
    pub value: f64,
    pub stderr: f64,
    /// Indices into the probe set of the maximizing pair.
    pub pair: (usize, usize),
}

/// Probe directions at angles `j pi / 8` in the first coordinate plane.
pub fn probe_directions(dim: usize) -> Vec<Vec<f64>> {
    (0..8)
        .map(|j| {
            let a = j as f64 * std::f64::consts::PI / 8.0;
            let mut v = vec![0.0; dim];
            v[0] = a.cos();
            v[1] = a.sin();
            v
        })
        .collect()
}

/// `max_{pairs} ||X_{k x} - X_{k y}||_p` over the probe directions, the walks
/// from both starts driven by the same matrices.
pub fn theta_gl_surrogate(model: &GlWalkModel, k: usize, p: f64, mc: MonteCarlo) -> Result<SurrogateEstimate> {
    if mc.replications < 2 {
        return Err(invalid("surrogate needs at least 2 replications"));
    }
    if k == 0 {
        return Ok(SurrogateEstimate { k, value: 0.0, stderr: 0.0, pair: (0, 0) });
    }
    let probes = probe_directions(model.dim());
    let pairs: Vec<(usize, usize)> = (0..probes.len())
        .flat_map(|i| (i + 1..probes.len()).map(move |j| (i, j)))
        .collect();
    let rows: Vec<Vec<f64>> = mc
        .range()
        .into_par_iter()
        .map(|r| {
            let stream = CoupledStream::new(mc.seed, r, model.law());
            let xs: Vec<f64> = probes
                .iter()
                .map(|x| model.path_from(&stream, Series::Base, x, k)[k - 1])
                .collect();
            pairs.iter().map(|&(i, j)| (xs[i] - xs[j]).abs().powf(p)).collect()
        })
        .collect();
    let n = rows.len() as f64;
    let mut best = (0.0, 0.0, (0, 0));
    for (q, &pair) in pairs.iter().enumerate() {
        let mean = rows.iter().map(|row| row[q]).sum::<f64>() / n;
        if mean > best.0 || q == 0 {
            let var = rows.iter().map(|row| (row[q] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            best = (mean, (var / n).sqrt(), pair);
        }
    }
    let (mean, se_mean, pair) = best;
    let value = mean.powf(1.0 / p);
    // delta method for mean^{1/p}
    let stderr = if mean > 0.0 { value * se_mean / (p * mean) } else { 0.0 };
    Ok(SurrogateEstimate { k, value, stderr, pair })
}

/// Summability exponents to check and the fit settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionSpec {
    pub p: f64,
    /// Weight exponent of the `theta*` condition.
    pub a: f64,
    /// Weight exponent of the `theta'` condition; must exceed `B(p)`.
    pub b: f64,
    /// Fraction of the grid (from the top) used for the tail fit.
    pub tail_fraction: f64,
    pub confidence: f64,
}

impl AssumptionSpec {
    pub fn new(p: f64, a: f64, b: f64) -> Result<Self> {
        let spec = Self {
            p,
            a,
            b,
            tail_fraction: 0.5,
            confidence: 0.95,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0) {
            return Err(invalid(format!("p = {} must be positive", self.p)));
        }
        if !(self.a > 0.0) {
            return Err(invalid(format!("a = {} must be positive", self.a)));
        }
        let bound = boundary_b(self.p);
        if !(self.b > bound) {
            return Err(invalid(format!(
                "b = {} must exceed B(p) = {bound} at p = {}",
                self.b, self.p
            )));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(invalid("tail fraction must lie in (0, 1]"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid("confidence must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SatisfiedByFit,
    ViolatedByFit,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub exponent: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    /// Exponent `e` of the weight `k^e`.
    pub weight: f64,
    /// Sum over the tabulated range, each entry standing for its dyadic cell.
    pub partial_sum: f64,
    pub tail: TailFit,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub spec: AssumptionSpec,
    pub boundary: f64,
    /// `sum k^b theta'_k`.
    pub prime: ConditionCheck,
    /// `sum k^a theta*_k`.
    pub star: ConditionCheck,
    /// `sum_k k^a sqrt(sum_{l >= k} theta'_l^2)` over the tabulated range.
    pub prime_square_tail_sum: f64,
    /// `b > 1` and the `theta'` condition holds by fit, which alone suffices.
    pub prime_alone_sufficient: bool,
}

impl AssumptionReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn check_assumptions(profile: &DependenceProfile, spec: &AssumptionSpec) -> Result<AssumptionReport> {
    spec.validate()?;
    let e = &profile.entries;
    if e.len() < 8 {
        return Err(Error::TooFewPoints { need: 8, got: e.len() });
    }
    let ls: Vec<usize> = e.iter().map(|x| x.l).collect();
    if ls.windows(2).any(|w| w[1] <= w[0]) || ls[0] == 0 {
        return Err(invalid("profile lags must be positive and increasing"));
    }
    let widths: Vec<f64> = ls
        .iter()
        .enumerate()
        .map(|(i, &l)| if i == 0 { l as f64 } else { (l - ls[i - 1]) as f64 })
        .collect();
    let prime: Vec<f64> = e.iter().map(|x| x.theta_prime).collect();
    let star: Vec<f64> = e.iter().map(|x| x.theta_star).collect();
    let check = |theta: &[f64], weight: f64| {
        let partial_sum = ls
            .iter()
            .zip(theta)
            .zip(&widths)
            .map(|((&l, t), w)| w * (l as f64).powf(weight) * t)
            .sum();
        let tail = fit_tail(&ls, theta, spec);
        let boundary = -(weight + 1.0);
        let verdict = if tail.ci_high < boundary {
            Verdict::SatisfiedByFit
        } else if tail.ci_low > boundary {
            Verdict::ViolatedByFit
        } else {
            Verdict::Inconclusive
        };
        ConditionCheck {
            weight,
            partial_sum,
            tail,
            verdict,
        }
    };
    let prime_check = check(&prime, spec.b);
    let star_check = check(&star, spec.a);
    // inner tail sums with the same cell weights
    let mut inner = vec![0.0; ls.len()];
    let mut acc = 0.0;
    for i in (0..ls.len()).rev() {
        acc += widths[i] * prime[i] * prime[i];
        inner[i] = acc;
    }
    let prime_square_tail_sum = (0..ls.len())
        .map(|i| widths[i] * (ls[i] as f64).powf(spec.a) * inner[i].sqrt())
        .sum();
    Ok(AssumptionReport {
        spec: *spec,
        boundary: boundary_b(spec.p),
        prime_alone_sufficient: spec.b > 1.0 && prime_check.verdict == Verdict::SatisfiedByFit,
        prime: prime_check,
        star: star_check,
        prime_square_tail_sum,
    })
}

fn fit_tail(ls: &[usize], theta: &[f64], spec: &AssumptionSpec) -> TailFit {
    let count = ((ls.len() as f64 * spec.tail_fraction).ceil() as usize).clamp(3.min(ls.len()), ls.len());
    let start = ls.len() - count;
    let (ls, theta) = (&ls[start..], &theta[start..]);
    if theta.iter().any(|t| *t == 0.0) {
        return TailFit {
            exponent: f64::NEG_INFINITY,
            ci_low: f64::NEG_INFINITY,
            ci_high: f64::NEG_INFINITY,
            points: count,
            note: "exact zeros in the tail: finitely many nonzero coefficients".into(),
        };
    }
    let x: Vec<f64> = ls.iter().map(|&l| (l as f64).ln()).collect();
    let y: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
    match line_fit(&x, &y) {
        Some(fit) => {
            let h = fit.slope_halfwidth(spec.confidence);
            TailFit {
                exponent: fit.slope,
                ci_low: fit.slope - h,
                ci_high: fit.slope + h,
                points: count,
                note: format!("log-log fit over l in [{}, {}]", ls[0], ls[ls.len() - 1]),
            }
        }
        None => TailFit {
            exponent: f64::NAN,
            ci_low: f64::NEG_INFINITY,
            ci_high: f64::INFINITY,
            points: count,
            note: "tail fit failed".into(),
        },
    }
}
