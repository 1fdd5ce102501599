//! Simulation laboratory for weakly dependent Bernoulli-shift processes:
//! coupled innovation streams, physical dependence coefficients, long-run
//! variances, block decompositions and Berry-Esseen rate estimation.

pub mod bedistance;
pub mod blocks;
pub mod dependence;
pub mod error;
pub mod innovations;
pub mod numerics;
pub mod processes;
pub mod rates;
pub mod variance;

pub use error::{Error, Result};
