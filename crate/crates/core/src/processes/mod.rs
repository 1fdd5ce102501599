//! Bernoulli-shift processes `X_k = g(eps_k, eps_{k-1}, ...)`.

mod doubling;
mod glwalk;
mod scheme;

pub use doubling::{turn_cos, DoublingObservable};
pub use glwalk::GlWalkModel;
pub use scheme::{CoefficientScheme, DifferenceBase};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::innovations::{child_seed, CoupledStream, InnovationLaw, InnovationWindow, Series};
use crate::numerics::integrate;
use doubling::{depth_mask, register_from_bits};

/// Largest window depth chosen automatically from a tolerance.
pub const MAX_AUTO_DEPTH: usize = 1 << 20;
/// Default truncation tolerance on `||X_k - X_k^J||_2`.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Default number of inner draws of a nested Monte Carlo projection.
pub const DEFAULT_INNER_DRAWS: usize = 10_000;

/// How deep the infinite filter of a linear process is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    Depth(usize),
    Tolerance(f64),
}

/// `X_k = sum_{j<J} alpha_j eps_{k-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    scheme: CoefficientScheme,
    law: InnovationLaw,
    coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn new(scheme: CoefficientScheme, law: InnovationLaw, truncation: Option<Truncation>) -> Result<Self> {
        scheme.validate()?;
        if law == InnovationLaw::RawBit || law.lanes() != 1 {
            return Err(invalid(format!("linear processes need a centered scalar law, got {}", law.name())));
        }
        let depth = match (truncation, scheme.finite_len()) {
            (Some(Truncation::Depth(j)), _) => j,
            (None, Some(len)) => len,
            (t, _) => {
                let tol = match t {
                    Some(Truncation::Tolerance(t)) => t,
                    _ => DEFAULT_TOLERANCE,
                };
                if !(tol > 0.0) {
                    return Err(invalid("truncation tolerance must be positive"));
                }
                let j = scheme.depth_for_tolerance(tol);
                if j > MAX_AUTO_DEPTH {
                    return Err(invalid(format!(
                        "tolerance {tol} needs depth {j} > {MAX_AUTO_DEPTH}; give an explicit depth"
                    )));
                }
                j
            }
        };
        if depth == 0 {
            return Err(invalid("truncation depth must be at least 1"));
        }
        Ok(Self {
            coefficients: scheme.coefficients(depth),
            scheme,
            law,
        })
    }

    pub fn scheme(&self) -> &CoefficientScheme {
        &self.scheme
    }

    pub fn law(&self) -> InnovationLaw {
        self.law
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn depth(&self) -> usize {
        self.coefficients.len()
    }

    /// The finitely many coefficients actually simulated.
    pub fn simulated_scheme(&self) -> CoefficientScheme {
        CoefficientScheme::Explicit {
            coefficients: self.coefficients.clone(),
        }
    }

    #[inline]
    fn apply(&self, value: impl Fn(usize) -> f64) -> f64 {
        self.coefficients.iter().enumerate().map(|(j, a)| a * value(j)).sum()
    }

    /// `Y_1..Y_n` by direct convolution.
    fn path(&self, stream: &CoupledStream, n: usize) -> Vec<f64> {
        let depth = self.depth();
        let mut eps = vec![0.0; n + depth - 1];
        stream.fill_ascending(Series::Base, 2 - depth as i64, &mut eps);
        (0..n)
            .map(|k| {
                // eps index of time k+1-j is k + depth - 1 - j
                let top = k + depth - 1;
                self.coefficients.iter().enumerate().map(|(j, a)| a * eps[top - j]).sum()
            })
            .collect()
    }

    /// Weights `c_t` of `S_n = sum_t c_t eps_t` for `t` in `2-J..=n`.
    pub fn sum_weights(&self, n: usize) -> (i64, Vec<f64>) {
        let depth = self.depth();
        let mut prefix = Vec::with_capacity(depth + 1);
        prefix.push(0.0);
        let mut acc = 0.0;
        for a in &self.coefficients {
            acc += a;
            prefix.push(acc);
        }
        let start = 2 - depth as i64;
        let weights = (start..=n as i64)
            .map(|t| {
                let lo = (1 - t).max(0) as usize;
                let hi = ((n as i64 - t) as usize).min(depth - 1);
                prefix[hi + 1] - prefix[lo]
            })
            .collect();
        (start, weights)
    }
}

/// Observables `f` applied to a linear process, with their Hölder data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum HolderObservable {
    /// `cos(y + pi/4)`
    CosShift,
    /// `|y|^beta`
    AbsCenter { beta: f64 },
    /// `clamp(y, -1, 1)^3`
    CubeClip,
}

impl HolderObservable {
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            HolderObservable::CosShift => (y + std::f64::consts::FRAC_PI_4).cos(),
            HolderObservable::AbsCenter { beta } => y.abs().powf(*beta),
            HolderObservable::CubeClip => y.clamp(-1.0, 1.0).powi(3),
        }
    }

    /// `(beta, c)` with `|f(x) - f(y)| <= c |x - y|^beta`.
    pub fn holder(&self) -> (f64, f64) {
        match self {
            HolderObservable::CosShift => (1.0, 1.0),
            HolderObservable::AbsCenter { beta } => (*beta, 1.0),
            HolderObservable::CubeClip => (1.0, 3.0),
        }
    }

    pub fn name(&self) -> String {
        match self {
            HolderObservable::CosShift => "cos-shift".into(),
            HolderObservable::AbsCenter { beta } => format!("abs-center(beta={beta})"),
            HolderObservable::CubeClip => "cube-clip".into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if let HolderObservable::AbsCenter { beta } = self {
            if !(*beta > 0.0 && *beta <= 1.0) {
                return Err(invalid(format!("Hölder exponent {beta} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// `X_k = f(Y_k) - E f(Y_k)` for a linear process `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderModel {
    linear: LinearModel,
    observable: HolderObservable,
    centering: f64,
    /// `(m, K)`: conditional mean given the newest `m` innovations, by `K`
    /// inner draws of the remaining ones.
    projection: Option<(usize, usize)>,
}

impl HolderModel {
    /// The mean `E f(Y)` is integrated numerically for Gaussian innovations
    /// and estimated from `2^16` draws keyed by `centering_seed` otherwise.
    pub fn new(linear: LinearModel, observable: HolderObservable, centering_seed: u64) -> Result<Self> {
        observable.validate()?;
        let centering = if linear.law == InnovationLaw::StandardGaussian {
            let sd = linear.coefficients.iter().map(|a| a * a).sum::<f64>().sqrt();
            integrate(
                |z| observable.apply(sd * z) * (-0.5 * z * z).exp(),
                -12.0,
                12.0,
                512,
            ) / (2.0 * std::f64::consts::PI).sqrt()
        } else {
            let draws = 1 << 16;
            let mut acc = 0.0;
            for r in 0..draws {
                let s = CoupledStream::new(centering_seed, r, linear.law);
                let w = s.draw_window(Series::Base, 0, linear.depth());
                acc += observable.apply(linear.apply(|j| w.get(j)));
            }
            acc / draws as f64
        };
        Ok(Self {
            linear,
            observable,
            centering,
            projection: None,
        })
    }

    pub fn linear(&self) -> &LinearModel {
        &self.linear
    }

    pub fn observable(&self) -> HolderObservable {
        self.observable
    }

    pub fn centering(&self) -> f64 {
        self.centering
    }

    pub fn projection(&self) -> Option<(usize, usize)> {
        self.projection
    }

    fn evaluate_values(&self, stream: &CoupledStream, anchor: i64, value: impl Fn(usize) -> f64) -> f64 {
        let coeffs = &self.linear.coefficients;
        match self.projection {
            None => self.observable.apply(self.linear.apply(value)) - self.centering,
            Some((m, inner)) => {
                let m = m.min(coeffs.len());
                let head: f64 = coeffs[..m].iter().enumerate().map(|(j, a)| a * value(j)).sum();
                let tail = &coeffs[m..];
                let child = child_seed(stream.seed(), stream.replication(), anchor);
                let mut buf = vec![0.0; tail.len()];
                let mut acc = 0.0;
                for r in 0..inner {
                    let s = CoupledStream::new(child, r as u64, self.linear.law);
                    s.fill_ascending(Series::Base, 0, &mut buf);
                    let t: f64 = tail.iter().zip(&buf).map(|(a, e)| a * e).sum();
                    acc += self.observable.apply(head + t);
                }
                acc / inner as f64 - self.centering
            }
        }
    }
}

/// `X_k = f(x_k)` with `x_k` the depth-`J` binary expansion of the bits
/// `zeta_k, zeta_{k-1}, ...`, optionally replaced by its conditional mean
/// given the newest `m` bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoublingModel {
    observable: DoublingObservable,
    depth: usize,
    projection: Option<usize>,
}

impl DoublingModel {
    pub fn new(observable: DoublingObservable, depth: usize) -> Result<Self> {
        if !(1..=64).contains(&depth) {
            return Err(invalid(format!("doubling-map depth {depth} must lie in 1..=64")));
        }
        Ok(Self {
            observable,
            depth,
            projection: None,
        })
    }

    pub fn observable(&self) -> DoublingObservable {
        self.observable
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn projection(&self) -> Option<usize> {
        self.projection
    }

    #[inline]
    fn from_register(&self, u: u64) -> f64 {
        match self.projection {
            None => self.observable.apply_fixed(u & depth_mask(self.depth)),
            Some(m) => {
                let head = u & depth_mask(m);
                let h = 2f64.powi(-(m as i32));
                self.observable.cell_average(head as f64 / 18_446_744_073_709_551_616.0, h)
            }
        }
    }

    fn required_depth(&self) -> usize {
        self.projection.unwrap_or(self.depth)
    }
}

/// One of the process families of the laboratory.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessModel {
    Linear(LinearModel),
    HolderOfLinear(HolderModel),
    Doubling(DoublingModel),
    GlWalk(GlWalkModel),
}

impl ProcessModel {
    pub fn linear(scheme: CoefficientScheme, law: InnovationLaw, truncation: Option<Truncation>) -> Result<Self> {
        LinearModel::new(scheme, law, truncation).map(Self::Linear)
    }

    pub fn doubling(observable: DoublingObservable) -> Self {
        Self::Doubling(DoublingModel::new(observable, 64).expect("depth 64 is valid"))
    }

    pub fn law(&self) -> InnovationLaw {
        match self {
            ProcessModel::Linear(m) => m.law,
            ProcessModel::HolderOfLinear(m) => m.linear.law,
            ProcessModel::Doubling(_) => InnovationLaw::RawBit,
            ProcessModel::GlWalk(m) => m.law(),
        }
    }

    /// Window depth needed by [`evaluate`](Self::evaluate); the walk needs
    /// every innovation since time 1, so its depth equals the anchor.
    pub fn required_depth(&self) -> Option<usize> {
        match self {
            ProcessModel::Linear(m) => Some(m.depth()),
            ProcessModel::HolderOfLinear(m) => Some(m.linear.depth()),
            ProcessModel::Doubling(m) => Some(m.required_depth()),
            ProcessModel::GlWalk(_) => None,
        }
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self, ProcessModel::GlWalk(_))
    }

    pub fn describe(&self) -> String {
        match self {
            ProcessModel::Linear(m) => format!("linear {} {} J={}", m.scheme.describe(), m.law.name(), m.depth()),
            ProcessModel::HolderOfLinear(m) => format!(
                "{} of linear {} {} J={}",
                m.observable.name(),
                m.linear.scheme.describe(),
                m.linear.law.name(),
                m.linear.depth()
            ),
            ProcessModel::Doubling(m) => format!("doubling {} J={}", m.observable.name(), m.depth),
            ProcessModel::GlWalk(m) => format!("GL_{} walk lambda_max={}", m.dim(), m.lambda_max()),
        }
    }

    /// `X_k` from the window anchored at `k`.
    pub fn evaluate(&self, w: &InnovationWindow) -> Result<f64> {
        if w.law() != self.law() {
            return Err(Error::LawMismatch {
                expected: self.law().name().into(),
                got: w.law().name().into(),
            });
        }
        let required = match self.required_depth() {
            Some(d) => d,
            None => {
                if w.anchor() < 1 {
                    return Err(invalid("the walk starts at time 1; anchor must be >= 1"));
                }
                w.anchor() as usize
            }
        };
        if w.depth() < required {
            return Err(Error::DepthMismatch {
                required,
                got: w.depth(),
            });
        }
        Ok(match self {
            ProcessModel::Linear(m) => m.apply(|j| w.get(j)),
            ProcessModel::HolderOfLinear(m) => m.evaluate_values(w.stream(), w.anchor(), |j| w.get(j)),
            ProcessModel::Doubling(m) => {
                m.from_register(register_from_bits(required, |j| w.get(j) as u64))
            }
            ProcessModel::GlWalk(m) => m.evaluate_lanes(required, |j, lane| w.lane(j, lane)),
        })
    }

    /// `X_1, ..., X_n` of one replication.
    pub fn sample_path(&self, seed: u64, replication: u64, n: usize) -> Vec<f64> {
        let stream = CoupledStream::new(seed, replication, self.law());
        match self {
            ProcessModel::Linear(m) => m.path(&stream, n),
            ProcessModel::HolderOfLinear(m) => {
                if m.projection.is_some() {
                    (1..=n as i64)
                        .map(|k| {
                            let w = stream.draw_window(Series::Base, k, m.linear.depth());
                            m.evaluate_values(&stream, k, |j| w.get(j))
                        })
                        .collect()
                } else {
                    m.linear
                        .path(&stream, n)
                        .into_iter()
                        .map(|y| m.observable.apply(y) - m.centering)
                        .collect()
                }
            }
            ProcessModel::Doubling(m) => {
                let mut out = Vec::with_capacity(n);
                DoublingKernel::new(*m).walk(&stream, Series::Base, n, |x| out.push(x));
                out
            }
            ProcessModel::GlWalk(m) => m.path_from(&stream, Series::Base, m.start(), n),
        }
    }

    /// Reusable evaluator of `S_n` for many replications.
    pub fn sum_kernel(&self, n: usize) -> SumKernel {
        let inner = match self {
            ProcessModel::Linear(m) => {
                let (start, weights) = m.sum_weights(n);
                if m.law == InnovationLaw::Rademacher {
                    KernelKind::Bits(BitTable::new(start, &weights))
                } else {
                    KernelKind::Weights { start, weights }
                }
            }
            ProcessModel::Doubling(m) => KernelKind::Doubling(DoublingKernel::new(*m)),
            _ => KernelKind::Path,
        };
        SumKernel {
            model: self.clone(),
            n,
            inner,
        }
    }

    /// Upper bound on `||X_k - X_k^J||_2` for the depth-`J` truncation of the
    /// underlying infinite filter.
    pub fn truncation_error(&self, depth: usize) -> Result<f64> {
        match self {
            ProcessModel::Linear(m) => Ok(m.scheme.square_tail(depth).sqrt()),
            ProcessModel::HolderOfLinear(m) => {
                // E|T|^{2 beta} <= (E T^2)^beta for beta <= 1, unit-variance innovations
                let (beta, c) = m.observable.holder();
                Ok(c * m.linear.scheme.square_tail(depth).powf(beta / 2.0))
            }
            ProcessModel::Doubling(m) => {
                let h = 2f64.powi(-(depth.min(1074) as i32));
                Ok(match m.observable.lipschitz() {
                    Some(l) => l * h,
                    // the indicator changes only when 1/2 lies in a cell of width h
                    None => h.sqrt(),
                })
            }
            ProcessModel::GlWalk(_) => Err(Error::Unsupported {
                operation: "truncation_error",
                model: self.describe(),
            }),
        }
    }

    /// The `m`-dependent approximation `E[X_k | eps_k, ..., eps_{k-m+1}]`.
    pub fn m_project(&self, m: usize) -> Result<Self> {
        self.m_project_with(m, DEFAULT_INNER_DRAWS)
    }

    pub fn m_project_with(&self, m: usize, inner_draws: usize) -> Result<Self> {
        if m == 0 {
            return Err(invalid("projection depth m must be at least 1"));
        }
        match self {
            ProcessModel::Linear(lin) => {
                if m >= lin.depth() {
                    return Ok(self.clone());
                }
                Ok(ProcessModel::Linear(LinearModel {
                    scheme: CoefficientScheme::Explicit {
                        coefficients: lin.coefficients[..m].to_vec(),
                    },
                    law: lin.law,
                    coefficients: lin.coefficients[..m].to_vec(),
                }))
            }
            ProcessModel::Doubling(d) => {
                let current = d.required_depth();
                if m >= current {
                    return Ok(self.clone());
                }
                Ok(ProcessModel::Doubling(DoublingModel {
                    projection: Some(m),
                    ..*d
                }))
            }
            ProcessModel::HolderOfLinear(h) => {
                if m >= h.linear.depth() {
                    return Ok(self.clone());
                }
                if inner_draws == 0 {
                    return Err(invalid("nested projection needs at least one inner draw"));
                }
                let m = h.projection.map_or(m, |(p, _)| p.min(m));
                Ok(ProcessModel::HolderOfLinear(HolderModel {
                    projection: Some((m, inner_draws)),
                    ..h.clone()
                }))
            }
            ProcessModel::GlWalk(_) => Err(Error::Unsupported {
                operation: "m_project",
                model: self.describe(),
            }),
        }
    }

    /// Exact `sum_k E X_0 X_k` where the model admits it.
    pub fn exact_longrun_variance(&self) -> Option<f64> {
        match self {
            ProcessModel::Linear(m) => Some(m.coefficients.iter().sum::<f64>().powi(2)),
            ProcessModel::Doubling(d) if d.projection.is_none() && d.depth == 64 => {
                Some(crate::variance::doubling_longrun_variance(d.observable))
            }
            ProcessModel::GlWalk(g) => g.stationary_variance_2d(),
            _ => None,
        }
    }
}

/// `S_n = sum_t c_t eps_t` for Rademacher innovations, evaluated a byte at a
/// time through tables of the 256 subset sums of each group of 8 weights.
#[derive(Debug, Clone)]
struct BitTable {
    first_word: i64,
    words: usize,
    table: Vec<f64>,
    total: f64,
}

impl BitTable {
    fn new(start: i64, weights: &[f64]) -> Self {
        let first_word = start.div_euclid(64);
        let lead = (start - 64 * first_word) as usize;
        let words = (lead + weights.len()).div_ceil(64);
        let mut padded = vec![0.0; words * 64];
        padded[lead..lead + weights.len()].copy_from_slice(weights);
        let groups = words * 8;
        let mut table = vec![0.0; groups * 256];
        for g in 0..groups {
            let t = &mut table[g * 256..(g + 1) * 256];
            for v in 1..256usize {
                let low = v.trailing_zeros() as usize;
                t[v] = t[v & (v - 1)] + padded[8 * g + low];
            }
        }
        Self {
            first_word,
            words,
            table,
            total: weights.iter().sum(),
        }
    }

    #[inline]
    fn sum(&self, stream: &CoupledStream) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.words {
            let mut word = stream.bit_word(Series::Base, self.first_word + i as i64);
            let base = i * 8 * 256;
            for q in 0..8 {
                acc += self.table[base + q * 256 + (word & 0xff) as usize];
                word >>= 8;
            }
        }
        // eps = 2 zeta - 1
        2.0 * acc - self.total
    }
}

#[derive(Debug, Clone, Copy)]
struct DoublingKernel {
    model: DoublingModel,
}

impl DoublingKernel {
    fn new(model: DoublingModel) -> Self {
        Self { model }
    }

    /// Feed `X_1..X_n` to `visit`, advancing a shift register one bit per step.
    #[inline]
    fn walk(&self, stream: &CoupledStream, series: Series, n: usize, mut visit: impl FnMut(f64)) {
        // register at time 0 holds bits at times 0, -1, ..., -63
        let mut word = stream.bit_word(series, 0);
        let mut u = (stream.bit_word(series, -1) >> 1) | ((word & 1) << 63);
        for k in 1..=n as i64 {
            let b = k.rem_euclid(64);
            if b == 0 {
                word = stream.bit_word(series, k.div_euclid(64));
            }
            u = (u >> 1) | (((word >> b) & 1) << 63);
            visit(self.model.from_register(u));
        }
    }
}

#[derive(Debug, Clone)]
enum KernelKind {
    Weights { start: i64, weights: Vec<f64> },
    Bits(BitTable),
    Doubling(DoublingKernel),
    Path,
}

/// Evaluates `S_n = X_1 + ... + X_n` for replication after replication.
#[derive(Debug, Clone)]
pub struct SumKernel {
    model: ProcessModel,
    n: usize,
    inner: KernelKind,
}

impl SumKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sum(&self, seed: u64, replication: u64) -> f64 {
        let stream = CoupledStream::new(seed, replication, self.model.law());
        match &self.inner {
            KernelKind::Weights { start, weights } => weights
                .iter()
                .enumerate()
                .map(|(i, c)| c * stream.value(Series::Base, start + i as i64))
                .sum(),
            KernelKind::Bits(table) => table.sum(&stream),
            KernelKind::Doubling(kernel) => {
                let mut s = 0.0;
                kernel.walk(&stream, Series::Base, self.n, |x| s += x);
                s
            }
            KernelKind::Path => match &self.model {
                ProcessModel::GlWalk(g) => {
                    let mut y = Vec::with_capacity(g.dim());
                    g.sum_from_start(&stream, self.n, &mut y)
                }
                m => m.sample_path(seed, replication, self.n).iter().sum(),
            },
        }
    }
}
