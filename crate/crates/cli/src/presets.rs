//! Ready-made experiment configs, one per reference example.

use weakdep::bedistance::{Normalization, DEFAULT_CONFIDENCE_DELTA};
use weakdep::innovations::InnovationLaw;
use weakdep::processes::{CoefficientScheme, DoublingObservable, HolderObservable, Truncation};

use crate::config::{ExperimentConfig, Grid, LinearSpec, ModelSpec, TaskSpec};

pub const SEED: u64 = 20_241_017;

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        (self.build)()
    }
}

fn experiment(name: &str, model: ModelSpec, task: TaskSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        seed: SEED,
        model,
        task,
        output_dir: None,
        threads: None,
    }
}

fn rate(lo: u32, hi: u32, replications: usize, normalization: Normalization) -> TaskSpec {
    TaskSpec::Rate {
        grid: Grid { lo, hi },
        replications,
        normalizations: vec![normalization],
        confidence_delta: DEFAULT_CONFIDENCE_DELTA,
        scale: None,
        closed_form: true,
    }
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "doubling-cos",
        summary: "doubling map with f = cos 2 pi x: Delta_n on 2^6..2^14, R = 1e5",
        build: || {
            experiment(
                "doubling-cos",
                ModelSpec::Doubling {
                    observable: DoublingObservable::Cos2pi,
                },
                rate(6, 14, 100_000, Normalization::SqrtNSs2),
            )
        },
    },
    Preset {
        name: "gl2-walk",
        summary: "log-norm cocycle of a 2x2 rotation-diagonal walk: Delta_n on 2^6..2^12, R = 1e4",
        build: || {
            experiment(
                "gl2-walk",
                ModelSpec::GlWalk {
                    dim: 2,
                    lambda_max: 1.0,
                    start: Some(vec![1.0, 0.0]),
                    pilot_paths: 100_000,
                },
                rate(6, 12, 10_000, Normalization::SqrtNSs2),
            )
        },
    },
    Preset {
        name: "counterexample-1.3",
        summary: "Gaussian alpha_j = j^-1.3: closed-form Delta_n on 2^8..2^18, slope near -0.3",
        build: || {
            experiment(
                "counterexample-1.3",
                ModelSpec::Linear {
                    scheme: CoefficientScheme::power_law(1.3),
                    law: InnovationLaw::StandardGaussian,
                    truncation: Some(Truncation::Depth(1 << 16)),
                },
                TaskSpec::Counterexample { grid: Grid { lo: 8, hi: 18 } },
            )
        },
    },
    Preset {
        name: "cancellation-beta-0.25",
        summary: "difference scheme of j^-0.25 with Rademacher innovations, sqrt(E S_n^2) normalization",
        build: || {
            experiment(
                "cancellation-beta-0.25",
                ModelSpec::Linear {
                    scheme: CoefficientScheme::difference_power(0.25),
                    law: InnovationLaw::Rademacher,
                    truncation: Some(Truncation::Depth(1 << 16)),
                },
                rate(6, 14, 100_000, Normalization::SqrtESn2),
            )
        },
    },
    Preset {
        name: "holder-of-linear",
        summary: "cos(Y + pi/4) of a Gaussian AR(1)-type filter: dependence profile on lags 1..2^8",
        build: || {
            experiment(
                "holder-of-linear",
                ModelSpec::HolderOfLinear {
                    linear: LinearSpec {
                        scheme: CoefficientScheme::geometric(0.8),
                        law: InnovationLaw::StandardGaussian,
                        truncation: None,
                    },
                    observable: HolderObservable::CosShift,
                },
                TaskSpec::Depcoef {
                    levels: 8,
                    p: 2.0,
                    replications: 10_000,
                    closed_form: false,
                },
            )
        },
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
