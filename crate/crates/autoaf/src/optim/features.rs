//! Gradient feature extraction for the learned optimizer.
//!
//! Raw gradients have a heavily skewed magnitude distribution; the inputs
//! to the GRU are dynamic-range limited by clipping and log-compressing the
//! magnitude while leaving the phase untouched:
//!
//! `feat = (log(max(e^{−p}, min(|∇|, e^p))) + p)/p · e^{j∠∇}`
//!
//! The compressed magnitude lies in `[0, 2]`. A zero gradient maps to zero
//! (phase of 0 is taken as 0).

use crate::complex::{ComplexArray, NodeId, Tape};

/// Tape version; `grad` may be any shape.
pub fn extract_features_tape(tape: &mut Tape, grad: NodeId, p: f64) -> NodeId {
    assert!(p > 0.0, "clip hyperparameter must be positive");
    let lo = (-p).exp();
    let hi = p.exp();
    let mag = tape.abs(grad);
    let clipped = tape.clamp_re(mag, lo, hi);
    let lg = tape.ln(clipped);
    let shifted = tape.add_scalar(lg, num_complex::Complex64::new(p, 0.0));
    let compressed = tape.scale_re(shifted, 1.0 / p);
    // Dividing by the clipped-from-below magnitude is safe at zero: the
    // compressed magnitude is zero there, so the product vanishes.
    let safe = tape.clamp_re(mag, lo, f64::INFINITY);
    let q = tape.div(compressed, safe);
    tape.mul(grad, q)
}

/// Value version of the feature map.
pub fn extract_features(grad: &ComplexArray, p: f64) -> ComplexArray {
    let mut tape = Tape::new();
    let g = tape.constant(grad.clone());
    let out = extract_features_tape(&mut tape, g, p);
    tape.value(out).clone()
}
