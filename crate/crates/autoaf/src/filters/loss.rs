//! The optimizee loss: mean squared error.

use crate::complex::{NodeId, Tape};

use super::FilterError;

/// Mean of squared differences between two equal-length real signals.
pub fn mse_loss(y: &[f64], d: &[f64]) -> Result<f64, FilterError> {
    if y.len() != d.len() {
        return Err(FilterError::LengthMismatch(y.len(), d.len()));
    }
    let n = y.len().max(1);
    let sum: f64 = y.iter().zip(d).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / n as f64)
}

/// Tape version: `mean |y − d|²` as a real scalar node.
pub fn mse_loss_tape(tape: &mut Tape, y: NodeId, d: NodeId) -> NodeId {
    let e = tape.sub(y, d);
    let sq = tape.abs_sqr(e);
    let m = tape.mean(sq);
    tape.re(m)
}
