//! Minimal time-domain FIR optimizee, used as the smallest test vehicle
//! for the optimizer stack: `y = ŵᴴu` with mean-squared-error loss.

use num_complex::Complex64;

use crate::complex::{ComplexArray, NodeId, Tape};

use super::FilterError;

/// Inner product output plus squared-error loss against `d`.
pub fn fir_optimizee(
    w: &ComplexArray,
    u: &ComplexArray,
    d: Complex64,
) -> Result<(Complex64, f64), FilterError> {
    if w.len() != u.len() {
        return Err(FilterError::LengthMismatch(w.len(), u.len()));
    }
    let y = w
        .data()
        .iter()
        .zip(u.data())
        .fold(Complex64::new(0.0, 0.0), |acc, (&wi, &ui)| acc + wi.conj() * ui);
    let loss = (y - d).norm_sqr();
    Ok((y, loss))
}

/// Tape version: returns `(y, loss)` nodes for gradient work.
pub fn fir_optimizee_tape(
    tape: &mut Tape,
    w: NodeId,
    u: NodeId,
    d: Complex64,
) -> (NodeId, NodeId) {
    let cw = tape.conj(w);
    let prod = tape.mul(cw, u);
    let y = tape.sum(prod);
    let e = tape.add_scalar(y, -d);
    let sq = tape.abs_sqr(e);
    let loss = tape.re(sq);
    (y, loss)
}
