//! Differentiable optimizees: the multidelay block frequency-domain filter
//! with an optional parametric sigmoid front-end, plus the plain
//! time-domain FIR optimizee used for sanity checks.

pub mod fir;
pub mod loss;
pub mod mdf;
pub mod sigmoid;

use thiserror::Error;

pub use loss::mse_loss;
pub use mdf::{antialias, MdfConfig, MdfState, MdfStep, MdfTapeState};
pub use sigmoid::{sigmoid_distort, ALPHA_INIT};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterError {
    #[error("block length {got} does not match hop size {expected}")]
    BlockLength { expected: usize, got: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum MdfConfigError {
    #[error("FFT size {0} must be a power of two of at least 2")]
    FftSize(usize),
    #[error("block count must be at least 1")]
    Blocks,
    #[error("overlap {overlap} gives a non-integral hop for FFT size {fft_size}")]
    HopNotIntegral { overlap: f64, fft_size: usize },
    #[error("hop {hop} must be in 1..={limit} (overlap at least 1/2)")]
    HopRange { hop: usize, limit: usize },
}
