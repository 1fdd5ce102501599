//! Block decomposition of `S_n` for `m`-dependent approximations.
//!
//! With `n = 2(N-1)m + m'`, block `j` covers `k` in `((2j-2)m, 2jm]`
//! (the last one `((2N-2)m, n]`), split into a first half `U_j` and a second
//! half `R_j`. The sigma-algebra `F_m` keeps the innovations at times
//! `((2i-1)m, 2im]` and replaces those at `((2i-2)m, (2i-1)m]` by
//! independent copies, so conditionally on `F_m` the block sums only vary
//! through the replaced innovations of their own first half.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::innovations::{child_seed, CoupledStream, InnovationWindow, Series};
use crate::processes::ProcessModel;
use crate::variance::{exact_sum_variance_linear, MonteCarlo};

/// Residual allowed in the exact variance identity.
pub const EXACT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLayout {
    pub n: usize,
    pub m: usize,
    /// Number of blocks `N`.
    pub blocks: usize,
    /// Length `m'` of the last block.
    pub last: usize,
}

impl BlockLayout {
    /// `N - 1 + m' / (2m) = n / (2m)`.
    pub fn effective_blocks(&self) -> f64 {
        self.n as f64 / (2 * self.m) as f64
    }

    /// Indices `k` of block `j` (1-based), first half and second half.
    pub fn halves(&self, j: usize) -> (std::ops::RangeInclusive<usize>, std::ops::RangeInclusive<usize>) {
        let m = self.m;
        let start = (2 * j - 2) * m + 1;
        let mid = ((2 * j - 1) * m).min(self.n);
        let end = (2 * j * m).min(self.n);
        (start..=mid, mid + 1..=end)
    }

    /// Whether the innovation at `time` is replaced under `F_m`.
    pub fn is_replaced(&self, time: i64) -> bool {
        (time - 1).div_euclid(self.m as i64).rem_euclid(2) == 0
    }
}

/// Largest `N >= 2` with `m/2 <= m' = n - 2(N-1)m <= m`.
pub fn make_layout(n: usize, m: usize) -> Result<BlockLayout> {
    if m == 0 || n < 3 * m {
        return Err(Error::Layout { n, m });
    }
    let mut best = None;
    let mut big_n = 2;
    while 2 * (big_n - 1) * m <= n {
        let last = n - 2 * (big_n - 1) * m;
        if 2 * last >= m && last <= m {
            best = Some(BlockLayout {
                n,
                m,
                blocks: big_n,
                last,
            });
        }
        big_n += 1;
    }
    best.ok_or(Error::Layout { n, m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockMode {
    ExactLinear,
    /// Conditional moments from `inner` fresh draws of the replaced innovations.
    NestedMc { inner: usize },
}

/// Conditionally centered block sums of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSums {
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    /// `Y_j^(1) = U_j + R_j`.
    pub y1: Vec<f64>,
    /// `Y_j^(2) = sum_{k in block j} E_F X_km`.
    pub y2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub layout: BlockLayout,
    pub replication: u64,
    pub mode: BlockMode,
    /// `sigma_{j|m}^2 = (2m)^{-1} E_F (Y_j^(1))^2`, `j = 1..N`.
    pub per_block: Vec<f64>,
    /// `sigma_{|m}^2`: the per-block values summed and divided by `n / (2m)`.
    pub sigma_cond: f64,
    /// `E sigma_{|m}^2` (exact mode only).
    pub sigma_bar: Option<f64>,
    /// `n^{-1} E (S^(2))^2` (exact mode only).
    pub varsigma_bar: Option<f64>,
    /// `n^{-1} E S_nm^2` (exact mode only).
    pub ss_nm: Option<f64>,
    pub residual: Option<f64>,
}

impl BlockDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn projected(model: &ProcessModel, m: usize, mode: BlockMode) -> Result<ProcessModel> {
    match (mode, model) {
        (BlockMode::ExactLinear, ProcessModel::Linear(_)) => model.m_project(m),
        (BlockMode::ExactLinear, _) => Err(Error::Unsupported {
            operation: "exact block mode",
            model: model.describe(),
        }),
        (BlockMode::NestedMc { inner }, _) => {
            if inner < 2 {
                return Err(invalid("nested block mode needs at least 2 inner draws"));
            }
            model.m_project(m)
        }
    }
}

fn partial_sums(alpha: &[f64]) -> Vec<f64> {
    alpha
        .iter()
        .scan(0.0, |acc, a| {
            *acc += a;
            Some(*acc)
        })
        .collect()
}

/// Weight of `eps_t` in `sum_{k in range} X_km` for an `m`-projected linear
/// process with partial sums `p`.
fn weight(p: &[f64], range: &std::ops::RangeInclusive<usize>, t: i64) -> f64 {
    if range.is_empty() {
        return 0.0;
    }
    let (lo, hi) = (*range.start() as i64, *range.end() as i64);
    let m = p.len() as i64;
    // k in [max(lo, t), min(hi, t + m - 1)], coefficient index i = k - t
    let i0 = (lo - t).max(0);
    let i1 = (hi - t).min(m - 1);
    if i1 < i0 {
        return 0.0;
    }
    p[i1 as usize] - if i0 > 0 { p[i0 as usize - 1] } else { 0.0 }
}

pub fn conditional_block_sums(
    model: &ProcessModel,
    layout: &BlockLayout,
    mode: BlockMode,
    seed: u64,
    replication: u64,
) -> Result<BlockSums> {
    let proj = projected(model, layout.m, mode)?;
    let stream = CoupledStream::new(seed, replication, proj.law());
    let n_blocks = layout.blocks;
    let mut sums = BlockSums {
        u: vec![0.0; n_blocks],
        r: vec![0.0; n_blocks],
        y1: vec![0.0; n_blocks],
        y2: vec![0.0; n_blocks],
    };
    match (&proj, mode) {
        (ProcessModel::Linear(lin), BlockMode::ExactLinear) => {
            let p = partial_sums(lin.coefficients());
            let m = p.len() as i64;
            for j in 1..=n_blocks {
                let (first, second) = layout.halves(j);
                let whole = *first.start()..=*second.end().max(first.end());
                let lo = *first.start() as i64 - m + 1;
                for t in lo..=*whole.end() as i64 {
                    let eps = stream.value(Series::Base, t);
                    if layout.is_replaced(t) {
                        sums.u[j - 1] += weight(&p, &first, t) * eps;
                        sums.r[j - 1] += weight(&p, &second, t) * eps;
                    } else {
                        sums.y2[j - 1] += weight(&p, &whole, t) * eps;
                    }
                }
            }
        }
        (_, BlockMode::NestedMc { inner }) => {
            let depth = proj.required_depth().ok_or_else(|| Error::Unsupported {
                operation: "nested block mode",
                model: proj.describe(),
            })?;
            for j in 1..=n_blocks {
                let (first, second) = layout.halves(j);
                let stats = nested_block(&proj, layout, &stream, j, depth, inner)?;
                let mut u = 0.0;
                let mut r = 0.0;
                for (idx, k) in (*first.start()..=*second.end().max(first.end())).enumerate() {
                    let centered = stats.realized[idx] - stats.cond_mean[idx];
                    if first.contains(&k) {
                        u += centered;
                    } else {
                        r += centered;
                    }
                }
                sums.u[j - 1] = u;
                sums.r[j - 1] = r;
                sums.y2[j - 1] = stats.cond_mean.iter().sum();
            }
        }
        _ => unreachable!("exact mode is restricted to linear models"),
    }
    for j in 0..n_blocks {
        sums.y1[j] = sums.u[j] + sums.r[j];
    }
    Ok(sums)
}

struct NestedStats {
    /// `X_km` on the realized innovations, `k` over the block.
    realized: Vec<f64>,
    /// Estimated `E_F X_km`.
    cond_mean: Vec<f64>,
    /// Estimated `Var_F` of the block sum.
    block_variance: f64,
}

fn nested_block(
    proj: &ProcessModel,
    layout: &BlockLayout,
    stream: &CoupledStream,
    j: usize,
    depth: usize,
    inner: usize,
) -> Result<NestedStats> {
    let (first, second) = layout.halves(j);
    let k_lo = *first.start() as i64;
    let k_hi = *second.end().max(first.end()) as i64;
    let t_lo = k_lo - depth as i64 + 1;
    let lanes = proj.law().lanes();
    let len = (k_hi - t_lo + 1) as usize;
    let mut base = vec![0.0; len * lanes];
    stream.fill_ascending(Series::Base, t_lo, &mut base);
    let eval_block = |values: &[f64]| -> Result<Vec<f64>> {
        (k_lo..=k_hi)
            .map(|k| {
                // offset-major window for anchor k
                let top = (k - t_lo) as usize;
                let mut w = Vec::with_capacity(depth * lanes);
                for o in 0..depth {
                    let i = top - o;
                    w.extend_from_slice(&values[i * lanes..(i + 1) * lanes]);
                }
                proj.evaluate(&InnovationWindow::from_parts(*stream, k, w))
            })
            .collect()
    };
    let realized = eval_block(&base)?;
    let child = child_seed(stream.seed(), stream.replication(), j as i64);
    let mut mean = vec![0.0; realized.len()];
    let mut sums = Vec::with_capacity(inner);
    let mut values = base.clone();
    let mut fresh = vec![0.0; len * lanes];
    for r in 0..inner {
        let s = CoupledStream::new(child, r as u64, proj.law());
        s.fill_ascending(Series::Base, t_lo, &mut fresh);
        for i in 0..len {
            if layout.is_replaced(t_lo + i as i64) {
                values[i * lanes..(i + 1) * lanes].copy_from_slice(&fresh[i * lanes..(i + 1) * lanes]);
            }
        }
        let x = eval_block(&values)?;
        for (a, v) in mean.iter_mut().zip(&x) {
            *a += v;
        }
        sums.push(x.iter().sum::<f64>());
    }
    mean.iter_mut().for_each(|a| *a /= inner as f64);
    let sm = sums.iter().sum::<f64>() / inner as f64;
    let block_variance = sums.iter().map(|s| (s - sm) * (s - sm)).sum::<f64>() / (inner - 1) as f64;
    Ok(NestedStats {
        realized,
        cond_mean: mean,
        block_variance,
    })
}

/// The conditional and partial variances of one replication.
pub fn conditional_variances(
    model: &ProcessModel,
    layout: &BlockLayout,
    mode: BlockMode,
    seed: u64,
    replication: u64,
) -> Result<BlockDiagnostics> {
    let proj = projected(model, layout.m, mode)?;
    let two_m = (2 * layout.m) as f64;
    let n_eff = layout.effective_blocks();
    match (&proj, mode) {
        (ProcessModel::Linear(lin), BlockMode::ExactLinear) => {
            let p = partial_sums(lin.coefficients());
            let m = p.len() as i64;
            let per_block: Vec<f64> = (1..=layout.blocks)
                .map(|j| {
                    let (first, second) = layout.halves(j);
                    let whole = *first.start()..=*second.end().max(first.end());
                    let lo = *first.start() as i64 - m + 1;
                    (lo..=*whole.end() as i64)
                        .filter(|&t| layout.is_replaced(t))
                        .map(|t| weight(&p, &whole, t).powi(2))
                        .sum::<f64>()
                        / two_m
                })
                .collect();
            let sigma_cond = per_block.iter().sum::<f64>() / n_eff;
            let all = 1..=layout.n;
            let varsigma = ((1 - m)..=layout.n as i64)
                .filter(|&t| !layout.is_replaced(t))
                .map(|t| weight(&p, &all, t).powi(2))
                .sum::<f64>()
                / layout.n as f64;
            let ss_nm = exact_sum_variance_linear(&lin.simulated_scheme(), layout.n) / layout.n as f64;
            let residual = (ss_nm - sigma_cond - varsigma).abs();
            if residual > EXACT_TOLERANCE * ss_nm.max(1.0) {
                return Err(Error::IdentityResidual {
                    residual,
                    tolerance: EXACT_TOLERANCE,
                });
            }
            Ok(BlockDiagnostics {
                layout: *layout,
                replication,
                mode,
                per_block,
                sigma_cond,
                sigma_bar: Some(sigma_cond),
                varsigma_bar: Some(varsigma),
                ss_nm: Some(ss_nm),
                residual: Some(residual),
            })
        }
        (_, BlockMode::NestedMc { inner }) => {
            let depth = proj.required_depth().ok_or_else(|| Error::Unsupported {
                operation: "nested block mode",
                model: proj.describe(),
            })?;
            let stream = CoupledStream::new(seed, replication, proj.law());
            let per_block = (1..=layout.blocks)
                .map(|j| Ok(nested_block(&proj, layout, &stream, j, depth, inner)?.block_variance / two_m))
                .collect::<Result<Vec<f64>>>()?;
            let sigma_cond = per_block.iter().sum::<f64>() / n_eff;
            Ok(BlockDiagnostics {
                layout: *layout,
                replication,
                mode,
                per_block,
                sigma_cond,
                sigma_bar: None,
                varsigma_bar: None,
                ss_nm: None,
                residual: None,
            })
        }
        _ => unreachable!("exact mode is restricted to linear models"),
    }
}

/// Frequency over the replications of `{sigma_{|m}^2 <= threshold}`.
pub fn degeneracy_probability(
    model: &ProcessModel,
    layout: &BlockLayout,
    mode: BlockMode,
    mc: MonteCarlo,
    threshold: f64,
) -> Result<f64> {
    if mc.replications == 0 {
        return Err(invalid("need at least one replication"));
    }
    let hits: Vec<bool> = mc
        .range()
        .into_par_iter()
        .map(|r| Ok(conditional_variances(model, layout, mode, mc.seed, r)?.sigma_cond <= threshold))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / mc.replications as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::InnovationLaw;
    use crate::processes::{CoefficientScheme, Truncation};

    #[test]
    fn layouts() {
        assert!(matches!(make_layout(100, 10), Err(Error::Layout { .. })));
        assert!(matches!(make_layout(95, 10), Err(Error::Layout { .. })));
        let l = make_layout(2 * 4 * 7 + 7, 7).unwrap();
        assert_eq!((l.blocks, l.last), (5, 7));
        let l = make_layout(16 * 11, 16).unwrap();
        assert_eq!(l.n, 2 * (l.blocks - 1) * 16 + l.last);
        assert!(make_layout(20, 10).is_err());
    }

    #[test]
    fn replaced_times() {
        let l = make_layout(36, 4).unwrap();
        let replaced: Vec<i64> = (-3..=12).filter(|&t| l.is_replaced(t)).collect();
        assert_eq!(replaced, vec![1, 2, 3, 4, 9, 10, 11, 12]);
    }

    #[test]
    fn identity_blocks() {
        let m = ProcessModel::linear(CoefficientScheme::identity(), InnovationLaw::Rademacher, None).unwrap();
        let layout = make_layout(16 * 8 + 8, 8).unwrap();
        let d = conditional_variances(&m, &layout, BlockMode::ExactLinear, 1, 0).unwrap();
        assert!(d.per_block.iter().all(|s| *s == 0.5 || *s == layout.last as f64 / 16.0));
        assert!(d.residual.unwrap() < 1e-12);
        let sums = conditional_block_sums(&m, &layout, BlockMode::ExactLinear, 1, 0).unwrap();
        let stream = CoupledStream::new(1, 0, InnovationLaw::Rademacher);
        let plain: f64 = (1..=8).map(|t| stream.value(Series::Base, t)).sum();
        assert_eq!(sums.u[0], plain);
        assert_eq!(sums.r[0], 0.0);
    }

    #[test]
    fn exact_and_nested_agree() {
        let model = ProcessModel::linear(
            CoefficientScheme::geometric(0.5),
            InnovationLaw::StandardGaussian,
            Some(Truncation::Depth(30)),
        )
        .unwrap();
        let layout = make_layout(20, 4).unwrap();
        let exact = conditional_variances(&model, &layout, BlockMode::ExactLinear, 3, 0).unwrap();
        let inner = 4000;
        let nested = conditional_variances(&model, &layout, BlockMode::NestedMc { inner }, 3, 0).unwrap();
        for (a, b) in exact.per_block.iter().zip(&nested.per_block) {
            // sample variance of a Gaussian: relative sd sqrt(2 / K)
            assert!((a - b).abs() < 4.0 * a * (2.0 / inner as f64).sqrt(), "{a} vs {b}");
        }
        let e = conditional_block_sums(&model, &layout, BlockMode::ExactLinear, 3, 0).unwrap();
        let n = conditional_block_sums(&model, &layout, BlockMode::NestedMc { inner }, 3, 0).unwrap();
        for j in 0..layout.blocks {
            let sd = (2.0 * 4.0 * exact.per_block[j] / inner as f64).sqrt();
            assert!((e.y2[j] - n.y2[j]).abs() < 4.0 * sd + 1e-12, "block {j}");
        }
    }
}
