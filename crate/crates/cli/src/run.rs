//! Task execution, output files and the run manifest.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use weakdep::bedistance::{
    empirical_delta, exact_delta_for_model, exact_delta_gaussian_linear, write_estimates_csv, BEEstimate, Normalization,
};
use weakdep::blocks::{conditional_variances, degeneracy_probability, make_layout, BlockMode};
use weakdep::dependence::{
    check_assumptions, closed_form_profile, dyadic_grid, theta_gl_surrogate, theta_profile, AssumptionSpec,
    DependenceProfile,
};
use weakdep::processes::{CoefficientScheme, ProcessModel};
use weakdep::rates::{fit_rate, run_rate_experiment, RateSettings};
use weakdep::variance::{
    autocovariance, exact_longrun_variance_linear, exact_sum_variance_linear, longrun_variance, sigma_hat_m,
    variance_identity, AutocovMethod, MonteCarlo, VarianceReport,
};

use crate::config::{validate, ExperimentConfig, TaskSpec};
use crate::error::CliError;
use crate::plotdata::{emit_plotdata, profile_curve, rate_curve, surrogate_curve, Curve};

pub const OUTPUT_ENV: &str = "WEAKDEP_OUT";

/// Command-line overrides of the config.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Replications `[first, end)` behind an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicationRange {
    pub first: u64,
    pub end: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub seed: u64,
    /// Empty for outputs that involve no random draws.
    pub replications: Vec<ReplicationRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub task: String,
    pub config_digest: String,
    pub artifact_version: String,
    pub master_seed: u64,
    pub threads: usize,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<OutputRecord>,
    pub warnings: Vec<String>,
}

/// SHA-256 of the config with the options that cannot change results removed.
pub fn config_digest(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output_dir = None;
    c.threads = None;
    let bytes = serde_json::to_vec(&c).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory: `--out`, then the config, then the environment, then `./weakdep-out`;
/// the experiment gets its own subdirectory.
pub fn output_dir(config: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    let base = opts
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("weakdep-out"));
    base.join(&config.name)
}

struct Sink<'a> {
    dir: &'a Path,
    seed: u64,
    outputs: Vec<OutputRecord>,
    warnings: Vec<String>,
}

impl Sink<'_> {
    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    fn record(&mut self, path: &Path, replications: Vec<ReplicationRange>) {
        let file = path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.outputs.push(OutputRecord {
            file,
            seed: self.seed,
            replications,
        });
    }

    fn json(&mut self, file: &str, value: &impl Serialize, replications: Vec<ReplicationRange>) -> Result<(), CliError> {
        let path = self.path(file);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        self.record(&path, replications);
        Ok(())
    }

    fn plots(&mut self, curves: &[Curve], replications: Vec<ReplicationRange>) -> Result<(), CliError> {
        for path in emit_plotdata(self.dir, curves, &mut self.warnings)? {
            self.record(&path, replications.clone());
        }
        Ok(())
    }
}

fn range(mc: MonteCarlo) -> Vec<ReplicationRange> {
    vec![ReplicationRange {
        first: mc.first,
        end: mc.first + mc.replications as u64,
    }]
}

fn estimate_ranges(estimates: &[BEEstimate]) -> Vec<ReplicationRange> {
    estimates
        .iter()
        .filter(|e| e.replications > 0)
        .map(|e| ReplicationRange {
            first: e.first_replication,
            end: e.first_replication + e.replications as u64,
        })
        .collect()
}

/// `ss^2` of a walk whose stationary variance is known in closed form.
fn default_scale(model: &ProcessModel, scale: Option<f64>) -> Option<f64> {
    scale.or(match model {
        ProcessModel::GlWalk(g) => g.stationary_variance_2d(),
        _ => None,
    })
}

fn profile(model: &ProcessModel, levels: u32, p: f64, replications: usize, closed_form: bool, seed: u64) -> Result<(DependenceProfile, Option<MonteCarlo>), CliError> {
    let ls = dyadic_grid(levels);
    match model {
        ProcessModel::Linear(lin) if closed_form => Ok((closed_form_profile(lin, &ls, p)?, None)),
        _ => {
            let mc = MonteCarlo::new(seed, replications);
            Ok((theta_profile(model, &ls, p, mc)?, Some(mc)))
        }
    }
}

fn fit_json(estimates: &[BEEstimate], reference_slope: Option<f64>, sink: &mut Sink) -> serde_json::Value {
    match fit_rate(estimates) {
        Ok(fit) => json!({ "fit": fit, "reference_slope": reference_slope }),
        Err(err) => {
            sink.warnings.push(format!("rate fit unavailable: {err}"));
            json!({ "fit": null, "error": err.to_string(), "reference_slope": reference_slope })
        }
    }
}

fn execute(config: &ExperimentConfig, model: &ProcessModel, sink: &mut Sink) -> Result<(), CliError> {
    let seed = config.seed;
    match &config.task {
        TaskSpec::Depcoef {
            levels,
            p,
            replications,
            closed_form,
        } => {
            if let ProcessModel::GlWalk(gl) = model {
                let mc = MonteCarlo::new(seed, *replications);
                let est = (1..=*levels as usize)
                    .map(|k| theta_gl_surrogate(gl, k, *p, mc))
                    .collect::<weakdep::Result<Vec<_>>>()?;
                sink.json("surrogate.json", &est, range(mc))?;
                sink.plots(&[surrogate_curve(&est)], range(mc))?;
                return Ok(());
            }
            let (prof, mc) = profile(model, *levels, *p, *replications, *closed_form, seed)?;
            let ranges = mc.map(range).unwrap_or_default();
            let path = sink.path("depcoef.csv");
            prof.write_csv(&path)?;
            sink.record(&path, ranges.clone());
            sink.plots(&[profile_curve(&prof)], ranges)?;
        }
        TaskSpec::Variance { max_lag, replications, n, m } => {
            let mc = MonteCarlo::new(seed, *replications);
            let method = |model: &ProcessModel| match model {
                ProcessModel::Linear(_) => AutocovMethod::ExactLinear,
                ProcessModel::Doubling(d) if d.projection().is_none() => AutocovMethod::ExactDoubling,
                _ => AutocovMethod::MonteCarlo,
            };
            let longrun_exact = match model {
                ProcessModel::Linear(lin) => Some(exact_longrun_variance_linear(lin.scheme())?),
                _ => model.exact_longrun_variance(),
            };
            let table = autocovariance(model, *max_lag, method(model), Some(mc))?;
            let ranges = if table.method.is_exact() { Vec::new() } else { range(mc) };
            let longrun = longrun_variance(&table)?;
            let sn2 = n.and_then(|n| match model {
                ProcessModel::Linear(lin) => Some(exact_sum_variance_linear(&lin.simulated_scheme(), n) / n as f64),
                _ if table.max_lag() + 1 >= n => Some(variance_identity(&table.gamma, n) / n as f64),
                _ => None,
            });
            let sigma_hat = match m {
                Some(m) => {
                    let projected = model.m_project(*m)?;
                    let t = autocovariance(&projected, (*m).max(2) - 1, method(&projected), Some(mc))?;
                    Some(sigma_hat_m(&t, *m)?)
                }
                None => None,
            };
            let path = sink.path("autocov.csv");
            table.write_csv(&path)?;
            sink.record(&path, ranges.clone());
            let report = VarianceReport {
                model: model.describe(),
                longrun: longrun.value,
                longrun_exact,
                n: n.unwrap_or(0),
                sn2,
                sigma_hat,
                tail_note: longrun.note.clone(),
            };
            sink.json("variance.json", &json!({ "report": report, "longrun_detail": longrun }), ranges)?;
        }
        TaskSpec::Bedist {
            n,
            normalization,
            replications,
            confidence_delta,
            scale,
        } => {
            let mc = MonteCarlo::new(seed, *replications);
            let est = empirical_delta(model, *n, *normalization, mc, default_scale(model, *scale), *confidence_delta)?;
            let closed = exact_delta_for_model(model, *n, *normalization).ok();
            let path = sink.path("bedist.csv");
            write_estimates_csv(&path, &[est])?;
            sink.record(&path, range(mc));
            sink.json("bedist.json", &json!({ "estimate": est, "closed_form": closed }), range(mc))?;
        }
        TaskSpec::Rate {
            grid,
            replications,
            normalizations,
            confidence_delta,
            scale,
            closed_form,
        } => {
            let points = grid.points();
            let mut curves = Vec::new();
            let mut all_ranges = Vec::new();
            for norm in normalizations {
                let settings = RateSettings {
                    normalization: *norm,
                    seed,
                    replications: *replications,
                    confidence_delta: *confidence_delta,
                    scale: default_scale(model, *scale),
                    allow_closed_form: *closed_form,
                };
                let est = run_rate_experiment(model, &points, &settings)?;
                let ranges = estimate_ranges(&est);
                let stem = format!("rate_{}", norm.name());
                let path = sink.path(&format!("{stem}.csv"));
                write_estimates_csv(&path, &est)?;
                sink.record(&path, ranges.clone());
                let fit = fit_json(&est, None, sink);
                sink.json(&format!("{stem}_fit.json"), &fit, ranges.clone())?;
                curves.push(rate_curve(stem, &est));
                all_ranges.extend(ranges);
            }
            all_ranges.sort_by_key(|r| r.first);
            all_ranges.dedup();
            sink.plots(&curves, all_ranges)?;
        }
        TaskSpec::Blocks {
            n,
            m,
            mode,
            replications,
            threshold,
        } => {
            let layout = make_layout(*n, *m)?;
            let diag = conditional_variances(model, &layout, *mode, seed, 0)?;
            let mc = MonteCarlo::new(seed, *replications);
            let freq = degeneracy_probability(model, &layout, *mode, mc, *threshold)?;
            let ranges = match mode {
                BlockMode::ExactLinear => Vec::new(),
                BlockMode::NestedMc { .. } => range(mc),
            };
            sink.json(
                "blocks.json",
                &json!({
                    "diagnostics": diag,
                    "degeneracy_frequency": freq,
                    "threshold": threshold,
                    "replications": replications,
                }),
                ranges,
            )?;
        }
        TaskSpec::Counterexample { grid } => {
            let ProcessModel::Linear(lin) = model else {
                unreachable!("validated as a Gaussian linear model")
            };
            // closed forms use the untruncated coefficients
            let scheme = lin.scheme();
            let mut curves = Vec::new();
            let mut all = Vec::new();
            for norm in [Normalization::SqrtNSs2, Normalization::SqrtESn2] {
                let est = grid
                    .points()
                    .into_iter()
                    .map(|n| exact_delta_gaussian_linear(scheme, n, norm))
                    .collect::<weakdep::Result<Vec<_>>>()?;
                curves.push(rate_curve(format!("counterexample_{}", norm.name()), &est));
                all.push((norm, est));
            }
            let path = sink.path("counterexample.csv");
            let rows: Vec<BEEstimate> = all.iter().flat_map(|(_, e)| e.iter().copied()).collect();
            write_estimates_csv(&path, &rows)?;
            sink.record(&path, Vec::new());
            let reference = match scheme {
                CoefficientScheme::PowerLaw { exponent } => Some(1.0 - exponent),
                _ => None,
            };
            let fit = fit_json(&all[0].1, reference, sink);
            sink.json("counterexample_fit.json", &fit, Vec::new())?;
            sink.plots(&curves, Vec::new())?;
        }
        TaskSpec::Assumptions {
            levels,
            p,
            a,
            b,
            replications,
            closed_form,
        } => {
            let spec = AssumptionSpec::new(*p, *a, *b)?;
            let (prof, mc) = profile(model, *levels, *p, *replications, *closed_form, seed)?;
            let ranges = mc.map(range).unwrap_or_default();
            let report = check_assumptions(&prof, &spec)?;
            let path = sink.path("depcoef.csv");
            prof.write_csv(&path)?;
            sink.record(&path, ranges.clone());
            sink.json("assumptions.json", &report, ranges.clone())?;
            sink.plots(&[profile_curve(&prof)], ranges)?;
        }
    }
    Ok(())
}

/// Validate, execute and write the manifest. Returns the manifest and its directory.
pub fn run(mut config: ExperimentConfig, opts: &RunOptions) -> Result<(RunManifest, PathBuf), CliError> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(t) = opts.threads {
        config.threads = Some(t);
    }
    let model = validate(&config)?;
    let dir = output_dir(&config, opts);
    std::fs::create_dir_all(&dir)?;
    let threads = config.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(CliError::runtime)?;

    let started = chrono::Utc::now().to_rfc3339();
    let mut sink = Sink {
        dir: &dir,
        seed: config.seed,
        outputs: Vec::new(),
        warnings: Vec::new(),
    };
    pool.install(|| execute(&config, &model, &mut sink))?;
    let manifest = RunManifest {
        experiment: config.name.clone(),
        task: config.task.name().into(),
        config_digest: config_digest(&config),
        artifact_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: config.seed,
        threads,
        started,
        finished: chrono::Utc::now().to_rfc3339(),
        outputs: sink.outputs,
        warnings: sink.warnings,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text)?;
    Ok((manifest, dir))
}
