//! Finite-difference gradient checking.
//!
//! The numeric oracle treats the real and imaginary part of every element
//! as independent real variables and evaluates central differences of the
//! loss. Results are reported in the same conjugate-Wirtinger convention as
//! [`Tape::grad`](super::tape::Tape::grad): `(∂L/∂x + i·∂L/∂y) / 2`, so
//! analytic and numeric gradients compare directly.

use num_complex::Complex64;

use super::array::ComplexArray;
use super::tape::{NodeId, Tape};

/// Central-difference gradient of `f` at `at`, one array per input.
pub fn numeric_grad(
    mut f: impl FnMut(&[ComplexArray]) -> f64,
    at: &[ComplexArray],
    eps: f64,
) -> Vec<ComplexArray> {
    let mut grads = Vec::with_capacity(at.len());
    for (k, base) in at.iter().enumerate() {
        let mut g = ComplexArray::zeros(base.shape().to_vec());
        for i in 0..base.len() {
            let mut probe = |delta: Complex64| {
                let mut inputs: Vec<ComplexArray> = at.to_vec();
                inputs[k].data_mut()[i] += delta;
                f(&inputs)
            };
            let dx = (probe(Complex64::new(eps, 0.0)) - probe(Complex64::new(-eps, 0.0)))
                / (2.0 * eps);
            let dy = (probe(Complex64::new(0.0, eps)) - probe(Complex64::new(0.0, -eps)))
                / (2.0 * eps);
            g.data_mut()[i] = Complex64::new(dx / 2.0, dy / 2.0);
        }
        grads.push(g);
    }
    grads
}

/// Largest mixed relative error between two gradient sets.
pub fn max_rel_err(analytic: &[ComplexArray], numeric: &[ComplexArray]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.iter().zip(numeric.iter()) {
        for (x, y) in a.data().iter().zip(n.data().iter()) {
            let diff = (x - y).norm();
            let scale = x.norm().max(y.norm()).max(1.0);
            worst = worst.max(diff / scale);
        }
    }
    worst
}

/// Build a loss with `build`, differentiate it on the tape, and compare
/// against central finite differences. Returns the worst relative error.
pub fn check_loss_gradients(
    build: impl Fn(&mut Tape, &[NodeId]) -> NodeId,
    inits: &[ComplexArray],
    eps: f64,
) -> f64 {
    let analytic = {
        let mut tape = Tape::new();
        let leaves: Vec<NodeId> = inits.iter().map(|v| tape.leaf(v.clone())).collect();
        let loss = build(&mut tape, &leaves);
        tape.grad(loss, &leaves).expect("loss must be a real scalar")
    };
    let numeric = numeric_grad(
        |vals| {
            let mut tape = Tape::new();
            let leaves: Vec<NodeId> = vals.iter().map(|v| tape.leaf(v.clone())).collect();
            let loss = build(&mut tape, &leaves);
            tape.value(loss).scalar_value().re
        },
        inits,
        eps,
    );
    max_rel_err(&analytic, &numeric)
}
