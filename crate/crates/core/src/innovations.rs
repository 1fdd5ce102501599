//! Coupled i.i.d. innovation streams.
//!
//! Every innovation is a pure function of its key
//! `(experiment_seed, replication, series, time)`: a keyed counter-based
//! generator hashes the key to 64 bits and maps them to the requested law.
//! There is no sequential generator state, so windows may be drawn at any
//! (including negative) time, in any order, on any thread, and the same key
//! always yields the same value.
//!
//! The `Prime` series is the independent copy used by the coupled filters:
//! [`InnovationWindow::primed`] swaps a single entry for its prime-series
//! counterpart, [`InnovationWindow::starred`] swaps the whole tail from a
//! given offset on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::normal_quantile;

/// Distribution of a single innovation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InnovationLaw {
    StandardGaussian,
    Rademacher,
    CenteredUniform,
    /// Fair bit in `{0, 1}`; drives the binary representation of the doubling map.
    RawBit,
    /// `lanes` independent uniforms on `(0, 1)` per time index; drives the
    /// random matrices of the linear-group walk.
    UnitUniform { lanes: usize },
}

impl InnovationLaw {
    pub fn lanes(&self) -> usize {
        match self {
            InnovationLaw::UnitUniform { lanes } => *lanes,
            _ => 1,
        }
    }

    /// Laws whose values come from single bits of a hashed word.
    pub fn is_bit_law(&self) -> bool {
        matches!(self, InnovationLaw::Rademacher | InnovationLaw::RawBit)
    }

    /// Analytic mean, variance, skewness and excess kurtosis of one lane.
    pub fn moments(&self) -> (f64, f64, f64, f64) {
        match self {
            InnovationLaw::StandardGaussian => (0.0, 1.0, 0.0, 0.0),
            InnovationLaw::Rademacher => (0.0, 1.0, 0.0, -2.0),
            InnovationLaw::CenteredUniform => (0.0, 1.0, 0.0, -1.2),
            InnovationLaw::RawBit => (0.5, 0.25, 0.0, -2.0),
            InnovationLaw::UnitUniform { .. } => (0.5, 1.0 / 12.0, 0.0, -1.2),
        }
    }

    /// `E|eps|^p` for the centered laws, used by Hölder bounds.
    pub fn abs_moment(&self, p: f64) -> f64 {
        match self {
            InnovationLaw::StandardGaussian => {
                use statrs::function::gamma::gamma;
                2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
            }
            InnovationLaw::Rademacher => 1.0,
            InnovationLaw::CenteredUniform => 3f64.powf(p / 2.0) / (p + 1.0),
            InnovationLaw::RawBit => 0.5,
            InnovationLaw::UnitUniform { .. } => 1.0 / (p + 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            InnovationLaw::StandardGaussian => "standard-gaussian",
            InnovationLaw::Rademacher => "rademacher",
            InnovationLaw::CenteredUniform => "centered-uniform",
            InnovationLaw::RawBit => "raw-bit",
            InnovationLaw::UnitUniform { .. } => "unit-uniform",
        }
    }
}

/// Which of the two coupled copies a value belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Series {
    Base,
    Prime,
}

/// Full key of a single innovation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub experiment_seed: u64,
    pub replication: u64,
    pub series: Series,
    pub time: i64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const BIT_LANE: u64 = 0xD1B5_4A32_D192_ED03;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key of one (seed, replication, series) stream.
#[inline]
fn stream_word(seed: u64, replication: u64, series: Series) -> u64 {
    let tag = match series {
        Series::Base => 0x6A09_E667_F3BC_C908,
        Series::Prime => 0xBB67_AE85_84CA_A73B,
    };
    let h = mix64(seed ^ 0x243F_6A88_85A3_08D3);
    let h = mix64(h.wrapping_add(replication.wrapping_mul(GOLDEN)) ^ tag);
    mix64(h.wrapping_add(GOLDEN))
}

#[inline]
fn counter_hash(stream: u64, time: i64, lane: u64) -> u64 {
    let c = (time as u64).wrapping_mul(GOLDEN) ^ lane.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    mix64(mix64(c ^ stream).wrapping_add(stream.rotate_left(29)))
}

#[inline]
fn unit_uniform(h: u64) -> f64 {
    // midpoint of one of 2^53 cells: strictly inside (0, 1)
    ((h >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// The pair of coupled i.i.d. sequences for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoupledStream {
    seed: u64,
    replication: u64,
    law: InnovationLaw,
    base: u64,
    prime: u64,
}

impl CoupledStream {
    pub fn new(seed: u64, replication: u64, law: InnovationLaw) -> Self {
        Self {
            seed,
            replication,
            law,
            base: stream_word(seed, replication, Series::Base),
            prime: stream_word(seed, replication, Series::Prime),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    pub fn law(&self) -> InnovationLaw {
        self.law
    }

    #[inline]
    fn key(&self, series: Series) -> u64 {
        match series {
            Series::Base => self.base,
            Series::Prime => self.prime,
        }
    }

    /// 64 fair bits; bit `b` of word `w` is the bit innovation at time `64 w + b`.
    #[inline]
    pub fn bit_word(&self, series: Series, word: i64) -> u64 {
        counter_hash(self.key(series), word, BIT_LANE)
    }

    #[inline]
    pub fn bit(&self, series: Series, time: i64) -> u64 {
        (self.bit_word(series, time.div_euclid(64)) >> time.rem_euclid(64)) & 1
    }

    /// Uniform on `(0, 1)` for the given lane, independent of the law.
    #[inline]
    pub fn uniform(&self, series: Series, time: i64, lane: usize) -> f64 {
        unit_uniform(counter_hash(self.key(series), time, lane as u64))
    }

    /// Innovation value (lane 0) at `time`.
    #[inline]
    pub fn value(&self, series: Series, time: i64) -> f64 {
        self.lane_value(series, time, 0)
    }

    #[inline]
    pub fn lane_value(&self, series: Series, time: i64, lane: usize) -> f64 {
        match self.law {
            InnovationLaw::StandardGaussian => normal_quantile(self.uniform(series, time, 0)),
            InnovationLaw::Rademacher => (2 * self.bit(series, time)) as f64 - 1.0,
            InnovationLaw::CenteredUniform => {
                3f64.sqrt() * (2.0 * self.uniform(series, time, 0) - 1.0)
            }
            InnovationLaw::RawBit => self.bit(series, time) as f64,
            InnovationLaw::UnitUniform { .. } => self.uniform(series, time, lane),
        }
    }

    /// Fill `out` with the values at times `start, start + 1, ...` (ascending).
    pub fn fill_ascending(&self, series: Series, start: i64, out: &mut [f64]) {
        if self.law.is_bit_law() {
            let mut t = start;
            let mut i = 0;
            while i < out.len() {
                let word = self.bit_word(series, t.div_euclid(64));
                let mut b = t.rem_euclid(64);
                while b < 64 && i < out.len() {
                    let bit = (word >> b) & 1;
                    out[i] = match self.law {
                        InnovationLaw::Rademacher => (2 * bit) as f64 - 1.0,
                        _ => bit as f64,
                    };
                    b += 1;
                    i += 1;
                    t += 1;
                }
            }
        } else {
            let lanes = self.law.lanes();
            for (i, chunk) in out.chunks_mut(lanes).enumerate() {
                let t = start + i as i64;
                for (lane, v) in chunk.iter_mut().enumerate() {
                    *v = self.lane_value(series, t, lane);
                }
            }
        }
    }

    /// Window `eps_k, eps_{k-1}, ..., eps_{k-J+1}` from the chosen series.
    pub fn draw_window(&self, series: Series, anchor: i64, depth: usize) -> InnovationWindow {
        assert!(depth >= 1, "window depth must be at least 1");
        let lanes = self.law.lanes();
        let mut ascending = vec![0.0; depth * lanes];
        self.fill_ascending(series, anchor - depth as i64 + 1, &mut ascending);
        // reverse time order, keeping lanes contiguous
        let mut values = Vec::with_capacity(depth * lanes);
        for chunk in ascending.chunks(lanes).rev() {
            values.extend_from_slice(chunk);
        }
        InnovationWindow {
            stream: *self,
            anchor,
            lanes,
            values,
        }
    }
}

/// Seed of a child experiment keyed by `(seed, replication, tag)`; used for
/// inner Monte Carlo draws that must not collide with the parent streams.
pub fn child_seed(seed: u64, replication: u64, tag: i64) -> u64 {
    counter_hash(stream_word(seed, replication, Series::Base) ^ 0x3C6E_F372_FE94_F82B, tag, 0x510E_527F)
}

/// Look up a single innovation by its full key.
pub fn innovation(key: StreamKey, law: InnovationLaw) -> f64 {
    CoupledStream::new(key.experiment_seed, key.replication, law).value(key.series, key.time)
}

/// Finite window `(eps_k, eps_{k-1}, ..., eps_{k-J+1})` of the argument of a
/// Bernoulli shift, anchored at time `k`. Offset `j` holds time `k - j`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationWindow {
    stream: CoupledStream,
    anchor: i64,
    lanes: usize,
    values: Vec<f64>,
}

impl InnovationWindow {
    /// Window over explicit offset-major values drawn from `stream`.
    pub(crate) fn from_parts(stream: CoupledStream, anchor: i64, values: Vec<f64>) -> Self {
        let lanes = stream.law.lanes();
        debug_assert!(values.len() % lanes == 0 && !values.is_empty());
        Self {
            stream,
            anchor,
            lanes,
            values,
        }
    }

    pub fn anchor(&self) -> i64 {
        self.anchor
    }

    pub fn depth(&self) -> usize {
        self.values.len() / self.lanes
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn law(&self) -> InnovationLaw {
        self.stream.law
    }

    pub fn stream(&self) -> &CoupledStream {
        &self.stream
    }

    /// Value at offset `j` (time `k - j`), lane 0.
    pub fn get(&self, offset: usize) -> f64 {
        self.values[offset * self.lanes]
    }

    pub fn lane(&self, offset: usize, lane: usize) -> f64 {
        self.values[offset * self.lanes + lane]
    }

    /// All values, offset-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Overwrite an entry; used to build synthetic windows in tests and oracles.
    pub fn set(&mut self, offset: usize, value: f64) {
        self.values[offset * self.lanes] = value;
    }

    fn replace_from_prime(&mut self, offset: usize) {
        let t = self.anchor - offset as i64;
        for lane in 0..self.lanes {
            self.values[offset * self.lanes + lane] = self.stream.lane_value(Series::Prime, t, lane);
        }
    }

    /// The `(l, ')` filter: only `eps_{k-l}` is replaced by `eps'_{k-l}`.
    pub fn primed(&self, l: usize) -> Result<Self> {
        let depth = self.depth();
        if l >= depth {
            return Err(Error::OutOfWindow { offset: l, depth });
        }
        let mut out = self.clone();
        out.replace_from_prime(l);
        Ok(out)
    }

    /// The `(l, *)` filter: every entry from offset `l` on comes from the prime series.
    pub fn starred(&self, l: usize) -> Result<Self> {
        let depth = self.depth();
        if l >= depth {
            return Err(Error::OutOfWindow { offset: l, depth });
        }
        let mut out = self.clone();
        if self.stream.law.is_bit_law() || self.lanes > 1 {
            for j in l..depth {
                out.replace_from_prime(j);
            }
        } else {
            // contiguous refill, same values as the per-entry path
            let mut asc = vec![0.0; depth - l];
            self.stream
                .fill_ascending(Series::Prime, self.anchor - depth as i64 + 1, &mut asc);
            for (i, v) in asc.iter().rev().enumerate() {
                out.values[l + i] = *v;
            }
        }
        Ok(out)
    }

    /// Sub-window anchored at `anchor <= self.anchor` with the given depth,
    /// sharing the same underlying values.
    pub fn sub_window(&self, anchor: i64, depth: usize) -> Result<Self> {
        let shift = self.anchor - anchor;
        if shift < 0 || shift as usize + depth > self.depth() {
            return Err(Error::OutOfWindow {
                offset: shift.max(0) as usize + depth,
                depth: self.depth(),
            });
        }
        let start = shift as usize * self.lanes;
        Ok(Self {
            stream: self.stream,
            anchor,
            lanes: self.lanes,
            values: self.values[start..start + depth * self.lanes].to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAWS: [InnovationLaw; 4] = [
        InnovationLaw::StandardGaussian,
        InnovationLaw::Rademacher,
        InnovationLaw::CenteredUniform,
        InnovationLaw::RawBit,
    ];

    #[test]
    fn windows_are_deterministic() {
        for law in LAWS {
            let s = CoupledStream::new(7, 3, law);
            assert_eq!(s.draw_window(Series::Base, -5, 70), s.draw_window(Series::Base, -5, 70));
            let t = CoupledStream::new(7, 3, law);
            assert_eq!(s.draw_window(Series::Prime, 100, 9), t.draw_window(Series::Prime, 100, 9));
        }
    }

    #[test]
    fn overlapping_windows_agree() {
        for law in LAWS {
            let s = CoupledStream::new(11, 0, law);
            let a = s.draw_window(Series::Base, 40, 100);
            let b = s.draw_window(Series::Base, 10, 30);
            for j in 0..30 {
                assert_eq!(a.get(30 + j).to_bits(), b.get(j).to_bits());
                assert_eq!(b.get(j).to_bits(), s.value(Series::Base, 10 - j as i64).to_bits());
            }
            assert_eq!(a.sub_window(10, 30).unwrap(), b);
        }
    }

    #[test]
    fn primed_changes_exactly_one_entry() {
        let s = CoupledStream::new(1, 2, InnovationLaw::StandardGaussian);
        let w = s.draw_window(Series::Base, 0, 8);
        let p = w.primed(3).unwrap();
        for j in 0..8 {
            if j == 3 {
                assert_eq!(p.get(j), s.value(Series::Prime, -3));
                assert_ne!(p.get(j), w.get(j));
            } else {
                assert_eq!(p.get(j).to_bits(), w.get(j).to_bits());
            }
        }
        assert_eq!(p.primed(3).unwrap(), p);
        let newest = w.primed(0).unwrap();
        assert_ne!(newest.get(0), w.get(0));
        assert_eq!(&newest.values()[1..], &w.values()[1..]);
    }

    #[test]
    fn starred_replaces_tail() {
        for law in LAWS {
            let s = CoupledStream::new(5, 9, law);
            let w = s.draw_window(Series::Base, 17, 12);
            let all = w.starred(0).unwrap();
            assert_eq!(all, s.draw_window(Series::Prime, 17, 12));
            let st = w.starred(4).unwrap();
            let pr = w.primed(4).unwrap();
            assert_eq!(st.get(4), pr.get(4));
            for j in 0..4 {
                assert_eq!(st.get(j), w.get(j));
            }
            for j in 4..12 {
                assert_eq!(st.get(j), s.value(Series::Prime, 17 - j as i64));
            }
            let last = w.starred(11).unwrap();
            assert_eq!(&last.values()[..11], &w.values()[..11]);
        }
    }

    #[test]
    fn filters_reject_offsets_outside_the_window() {
        let w = CoupledStream::new(0, 0, InnovationLaw::Rademacher).draw_window(Series::Base, 0, 4);
        assert!(matches!(w.primed(4), Err(Error::OutOfWindow { offset: 4, depth: 4 })));
        assert!(w.starred(9).is_err());
    }

    #[test]
    fn prime_values_are_shared_across_windows() {
        let s = CoupledStream::new(3, 1, InnovationLaw::CenteredUniform);
        // time t = 5 appears at offset 2 of the k = 7 window and offset 0 of the k = 5 window
        let a = s.draw_window(Series::Base, 7, 5).primed(2).unwrap();
        let b = s.draw_window(Series::Base, 5, 3).starred(0).unwrap();
        assert_eq!(a.get(2), b.get(0));
    }

    #[test]
    fn raw_bits_are_bits() {
        let s = CoupledStream::new(99, 0, InnovationLaw::RawBit);
        let w = s.draw_window(Series::Base, 1000, 64);
        assert!(w.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn innovation_lookup_matches_stream() {
        let key = StreamKey {
            experiment_seed: 4,
            replication: 8,
            series: Series::Prime,
            time: -77,
        };
        let law = InnovationLaw::StandardGaussian;
        assert_eq!(innovation(key, law), CoupledStream::new(4, 8, law).value(Series::Prime, -77));
    }
}
