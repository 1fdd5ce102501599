//! Experiment description: one JSON document per experiment.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use weakdep::bedistance::{Normalization, DEFAULT_CONFIDENCE_DELTA};
use weakdep::blocks::{make_layout, BlockMode};
use weakdep::dependence::AssumptionSpec;
use weakdep::innovations::InnovationLaw;
use weakdep::processes::{
    CoefficientScheme, DoublingObservable, GlWalkModel, HolderModel, HolderObservable, LinearModel, ProcessModel,
    Truncation,
};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Master seed; every draw of the run is keyed by it.
    pub seed: u64,
    pub model: ModelSpec,
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub scheme: CoefficientScheme,
    pub law: InnovationLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Truncation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSpec {
    Linear {
        scheme: CoefficientScheme,
        law: InnovationLaw,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        truncation: Option<Truncation>,
    },
    HolderOfLinear {
        linear: LinearSpec,
        observable: HolderObservable,
    },
    Doubling {
        observable: DoublingObservable,
    },
    GlWalk {
        dim: usize,
        lambda_max: f64,
        /// Starting direction; the first basis vector by default.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start: Option<Vec<f64>>,
        /// Paths of the centering pre-pass (dimension above 2 only).
        #[serde(default = "default_pilot_paths")]
        pilot_paths: usize,
    },
}

fn default_pilot_paths() -> usize {
    100_000
}

fn default_p() -> f64 {
    2.0
}

fn default_confidence() -> f64 {
    DEFAULT_CONFIDENCE_DELTA
}

fn default_normalizations() -> Vec<Normalization> {
    vec![Normalization::SqrtNSs2]
}

fn default_true() -> bool {
    true
}

fn default_block_mode() -> BlockMode {
    BlockMode::ExactLinear
}

fn default_one() -> usize {
    1
}

fn default_threshold() -> f64 {
    weakdep::variance::DEGENERACY_THRESHOLD
}

/// Dyadic grid `2^lo ..= 2^hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: u32,
    pub hi: u32,
}

impl Grid {
    pub fn points(&self) -> Vec<usize> {
        weakdep::rates::dyadic_n_grid(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Dependence profile on the lags `1, 2, ..., 2^levels` (for the linear-group
    /// walk: the surrogate at `k = 1..=levels`).
    Depcoef {
        levels: u32,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default)]
        replications: usize,
        #[serde(default)]
        closed_form: bool,
    },
    Variance {
        max_lag: usize,
        #[serde(default)]
        replications: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        m: Option<usize>,
    },
    Bedist {
        n: usize,
        normalization: Normalization,
        replications: usize,
        #[serde(default = "default_confidence")]
        confidence_delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    Rate {
        grid: Grid,
        replications: usize,
        #[serde(default = "default_normalizations")]
        normalizations: Vec<Normalization>,
        #[serde(default = "default_confidence")]
        confidence_delta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
        #[serde(default = "default_true")]
        closed_form: bool,
    },
    Blocks {
        n: usize,
        m: usize,
        #[serde(default = "default_block_mode")]
        mode: BlockMode,
        /// Replications of the degeneracy frequency.
        #[serde(default = "default_one")]
        replications: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Closed-form rate of a Gaussian linear model under both normalizations.
    Counterexample { grid: Grid },
    Assumptions {
        levels: u32,
        p: f64,
        a: f64,
        b: f64,
        #[serde(default)]
        replications: usize,
        #[serde(default)]
        closed_form: bool,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Depcoef { .. } => "depcoef",
            TaskSpec::Variance { .. } => "variance",
            TaskSpec::Bedist { .. } => "bedist",
            TaskSpec::Rate { .. } => "rate",
            TaskSpec::Blocks { .. } => "blocks",
            TaskSpec::Counterexample { .. } => "counterexample",
            TaskSpec::Assumptions { .. } => "assumptions",
        }
    }
}

/// Parse a config document; errors carry line and column.
pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Parse {
        message: e.to_string(),
        line: e.line(),
        column: e.column(),
    })
}

fn precondition(field: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Precondition {
        field: field.to_string(),
        message: err.to_string(),
    }
}

fn core(field: &str, err: weakdep::Error) -> CliError {
    match err {
        weakdep::Error::DegenerateVariance { .. } => CliError::DegenerateVariance {
            message: format!("{field}: {err}"),
        },
        _ => precondition(field, err),
    }
}

fn build_linear(scheme: &CoefficientScheme, law: InnovationLaw, truncation: Option<Truncation>) -> Result<LinearModel, CliError> {
    LinearModel::new(scheme.clone(), law, truncation).map_err(|e| core("model", e))
}

impl ModelSpec {
    pub fn build(&self, seed: u64) -> Result<ProcessModel, CliError> {
        Ok(match self {
            ModelSpec::Linear { scheme, law, truncation } => ProcessModel::Linear(build_linear(scheme, *law, *truncation)?),
            ModelSpec::HolderOfLinear { linear, observable } => {
                let lin = build_linear(&linear.scheme, linear.law, linear.truncation)?;
                ProcessModel::HolderOfLinear(HolderModel::new(lin, *observable, seed).map_err(|e| core("model", e))?)
            }
            ModelSpec::Doubling { observable } => ProcessModel::doubling(*observable),
            ModelSpec::GlWalk {
                dim,
                lambda_max,
                start,
                pilot_paths,
            } => {
                let start = start.clone().unwrap_or_else(|| {
                    let mut e = vec![0.0; *dim];
                    if let Some(first) = e.first_mut() {
                        *first = 1.0;
                    }
                    e
                });
                ProcessModel::GlWalk(
                    GlWalkModel::new(*dim, *lambda_max, start, seed, *pilot_paths).map_err(|e| core("model", e))?,
                )
            }
        })
    }
}

fn need_replications(r: usize) -> Result<(), CliError> {
    if r < 2 {
        return Err(precondition("task.replications", format!("need at least 2 replications, got {r}")));
    }
    Ok(())
}

fn check_grid(grid: &Grid) -> Result<(), CliError> {
    if grid.hi > 40 || grid.lo > grid.hi {
        return Err(precondition("task.grid", format!("need lo <= hi <= 40, got {}..{}", grid.lo, grid.hi)));
    }
    let points = (grid.hi - grid.lo + 1) as usize;
    if points < weakdep::rates::MIN_FIT_POINTS {
        return Err(precondition(
            "task.grid",
            format!("a rate fit needs at least {} grid points, got {points}", weakdep::rates::MIN_FIT_POINTS),
        ));
    }
    Ok(())
}

fn check_confidence(delta: f64) -> Result<(), CliError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(precondition("task.confidence_delta", format!("{delta} must lie in (0, 1)")));
    }
    Ok(())
}

fn check_p(p: f64) -> Result<(), CliError> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(precondition("task.p", format!("moment order {p} must be at least 1")));
    }
    Ok(())
}

/// Whether `normalization` can be computed for `model`, given an optional scale.
fn check_normalization(model: &ProcessModel, norm: Normalization, scale: Option<f64>) -> Result<(), CliError> {
    let ok = match norm {
        Normalization::SqrtNSs2 => {
            scale.is_some()
                || model.exact_longrun_variance().is_some()
                || matches!(model, ProcessModel::GlWalk(g) if g.stationary_variance_2d().is_some())
        }
        Normalization::SqrtESn2 => matches!(model, ProcessModel::Linear(_) | ProcessModel::Doubling(_)),
    };
    if !ok {
        return Err(precondition(
            "task.normalization",
            format!("{} is not available for {} (give task.scale for sqrt-n-ss2)", norm.name(), model.describe()),
        ));
    }
    if let Some(s) = scale {
        if !(s > 0.0 && s.is_finite()) {
            return Err(precondition("task.scale", format!("scale {s} must be positive")));
        }
    }
    Ok(())
}

/// Fail-fast check of every parameter the task will use. Returns the model.
pub fn validate(config: &ExperimentConfig) -> Result<ProcessModel, CliError> {
    if config.name.is_empty() || config.name.contains(['/', '\\']) || config.name == ".." {
        return Err(precondition("name", "experiment name must be a plain non-empty file name"));
    }
    if config.threads == Some(0) {
        return Err(precondition("threads", "thread count must be positive"));
    }
    let model = config.model.build(config.seed)?;
    match &config.task {
        TaskSpec::Depcoef {
            levels,
            p,
            replications,
            closed_form,
        } => {
            check_p(*p)?;
            if *levels > 20 {
                return Err(precondition("task.levels", "at most 20 levels"));
            }
            if *closed_form {
                if !matches!(model, ProcessModel::Linear(_)) {
                    return Err(precondition("task.closed_form", "closed-form profiles need a linear model"));
                }
            } else {
                need_replications(*replications)?;
            }
        }
        TaskSpec::Variance { max_lag, replications, n, m } => {
            if *max_lag < 1 {
                return Err(precondition("task.max_lag", "max lag must be at least 1"));
            }
            // the m-projection of a non-linear model is tabulated by Monte Carlo
            let exact = match &model {
                ProcessModel::Linear(_) => true,
                ProcessModel::Doubling(_) => m.is_none(),
                _ => false,
            };
            if !exact {
                need_replications(*replications)?;
            }
            if *n == Some(0) {
                return Err(precondition("task.n", "n must be positive"));
            }
            if let Some(m) = m {
                if *m == 0 || *m > max_lag + 1 {
                    return Err(precondition("task.m", format!("m = {m} must lie in 1..=max_lag + 1")));
                }
            }
        }
        TaskSpec::Bedist {
            n,
            normalization,
            replications,
            confidence_delta,
            scale,
        } => {
            if *n == 0 {
                return Err(precondition("task.n", "n must be positive"));
            }
            need_replications(*replications)?;
            check_confidence(*confidence_delta)?;
            check_normalization(&model, *normalization, *scale)?;
        }
        TaskSpec::Rate {
            grid,
            replications,
            normalizations,
            confidence_delta,
            scale,
            closed_form,
        } => {
            check_grid(grid)?;
            let gaussian_linear =
                matches!(&model, ProcessModel::Linear(l) if l.law() == InnovationLaw::StandardGaussian);
            if !(gaussian_linear && *closed_form) {
                need_replications(*replications)?;
            }
            check_confidence(*confidence_delta)?;
            if normalizations.is_empty() {
                return Err(precondition("task.normalizations", "list at least one normalization"));
            }
            for norm in normalizations {
                check_normalization(&model, *norm, *scale)?;
            }
        }
        TaskSpec::Blocks {
            n,
            m,
            mode,
            replications,
            threshold,
        } => {
            make_layout(*n, *m).map_err(|e| core("task.n", e))?;
            match mode {
                BlockMode::ExactLinear if !matches!(model, ProcessModel::Linear(_)) => {
                    return Err(precondition("task.mode", "exact-linear mode needs a linear model"));
                }
                BlockMode::NestedMc { inner } if *inner < 2 => {
                    return Err(precondition("task.mode", "nested mode needs at least 2 inner draws"));
                }
                _ => {}
            }
            if matches!(model, ProcessModel::GlWalk(_)) {
                return Err(precondition("model", "block decomposition needs a stationary model"));
            }
            if *replications == 0 {
                return Err(precondition("task.replications", "need at least 1 replication"));
            }
            if !(*threshold >= 0.0) {
                return Err(precondition("task.threshold", "threshold must be non-negative"));
            }
        }
        TaskSpec::Counterexample { grid } => {
            check_grid(grid)?;
            if !matches!(&model, ProcessModel::Linear(l) if l.law() == InnovationLaw::StandardGaussian) {
                return Err(precondition("model", "the counterexample task needs a Gaussian linear model"));
            }
            check_normalization(&model, Normalization::SqrtNSs2, None)?;
        }
        TaskSpec::Assumptions {
            levels,
            p,
            a,
            b,
            replications,
            closed_form,
        } => {
            check_p(*p)?;
            AssumptionSpec::new(*p, *a, *b).map_err(|e| precondition("task.b", e))?;
            if !(7..=20).contains(levels) {
                return Err(precondition("task.levels", "the tail fit needs 7 to 20 levels (8 or more lags)"));
            }
            if matches!(model, ProcessModel::GlWalk(_)) {
                return Err(precondition("model", "assumption checks need a Bernoulli-shift model"));
            }
            if *closed_form {
                if !matches!(model, ProcessModel::Linear(_)) {
                    return Err(precondition("task.closed_form", "closed-form profiles need a linear model"));
                }
            } else {
                need_replications(*replications)?;
            }
        }
    }
    Ok(model)
}
