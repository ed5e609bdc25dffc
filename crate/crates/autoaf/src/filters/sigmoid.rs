//! Parametric sigmoid front-end for the nonlinear optimizee.
//!
//! The distortion is `γ(u) = α₄·(2/(1 + exp(α₂û + α₃û²)) − 1)` with
//! `û = u·α₁/√(|u|² + |α₁|²)`, applied sample-wise to the far-end signal
//! before ingestion. All four coefficients are adapted alongside the filter
//! weights.

use num_complex::Complex64;

use crate::complex::{ComplexArray, NodeId, Tape};

/// Near-identity initialization: dγ/du = 1 at u = 0.
pub const ALPHA_INIT: [f64; 4] = [1.0, -2.0, 0.0, 1.0];

/// The logistic argument is clamped here; beyond it the sigmoid saturates
/// below double-precision resolution and an unbounded exponent would only
/// produce non-finite gradients.
const EXP_CLAMP: f64 = 60.0;

/// Scalar distortion. `alpha[0]` must be nonzero.
pub fn sigmoid_distort(u: f64, alpha: &[f64; 4]) -> f64 {
    let [a1, a2, a3, a4] = *alpha;
    let u_hat = (u * a1) / (u * u + a1 * a1).sqrt();
    let inner = (a2 * u_hat + a3 * u_hat * u_hat).clamp(-EXP_CLAMP, EXP_CLAMP);
    a4 * (2.0 / (1.0 + inner.exp()) - 1.0)
}

/// Tape version over a block of samples; `alpha` is a 4-element leaf.
/// Mirrors [`sigmoid_distort`] exactly, including the exponent clamp.
pub fn sigmoid_distort_tape(tape: &mut Tape, block: NodeId, alpha: NodeId) -> NodeId {
    let n = tape.value(block).len();
    let broadcast = |tape: &mut Tape, idx: usize| {
        let s = tape.slice0(alpha, idx, 1);
        tape.broadcast_scalar(s, vec![n])
    };
    let a1 = broadcast(tape, 0);
    let a2 = broadcast(tape, 1);
    let a3 = broadcast(tape, 2);
    let a4 = broadcast(tape, 3);

    let u_sq = tape.abs_sqr(block);
    let a1_sq = tape.abs_sqr(a1);
    let sum = tape.add(u_sq, a1_sq);
    let denom = tape.sqrt(sum);
    let num = tape.mul(block, a1);
    let u_hat = tape.div(num, denom);

    let lin = tape.mul(a2, u_hat);
    let u_hat_sq = tape.mul(u_hat, u_hat);
    let quad = tape.mul(a3, u_hat_sq);
    let inner = tape.add(lin, quad);
    let inner_c = tape.clamp_re(inner, -EXP_CLAMP, EXP_CLAMP);

    let e = tape.exp(inner_c);
    let one_plus = tape.add_scalar(e, Complex64::new(1.0, 0.0));
    let twos = tape.constant(ComplexArray::new(
        vec![Complex64::new(2.0, 0.0); n],
        vec![n],
    ));
    let frac = tape.div(twos, one_plus);
    let centered = tape.add_scalar(frac, Complex64::new(-1.0, 0.0));
    tape.mul(a4, centered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::gradcheck::check_loss_gradients;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn zero_input_maps_to_zero() {
        for alpha in [[1.0, -2.0, 0.0, 1.0], [0.5, 3.0, -1.0, 2.0], [2.0, 0.1, 0.4, -0.7]] {
            assert_eq!(sigmoid_distort(0.0, &alpha), 0.0);
        }
    }

    #[test]
    fn output_bounded_by_alpha4() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let alpha = [
                rng.gen_range(0.2..2.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-2.0..2.0),
            ];
            let u = rng.gen_range(-10.0..10.0);
            assert!(sigmoid_distort(u, &alpha).abs() <= alpha[3].abs() + 1e-15);
        }
    }

    #[test]
    fn near_identity_slope_at_origin() {
        // α = (1, −2, 0, 1): dγ/du at 0 is 1, by central differences.
        let alpha = ALPHA_INIT;
        let h = 1e-6;
        let slope = (sigmoid_distort(h, &alpha) - sigmoid_distort(-h, &alpha)) / (2.0 * h);
        assert!((slope - 1.0).abs() < 1e-8, "slope {}", slope);
    }

    #[test]
    fn tape_matches_scalar_version() {
        let alpha = [0.8, -1.5, 0.3, 1.2];
        let samples = [-2.0, -0.3, 0.0, 0.7, 5.0];
        let mut tape = Tape::new();
        let block = tape.constant(ComplexArray::from_real(&samples));
        let a = tape.leaf(ComplexArray::from_real(&alpha));
        let out = sigmoid_distort_tape(&mut tape, block, a);
        for (i, &u) in samples.iter().enumerate() {
            let expect = sigmoid_distort(u, &alpha);
            let got = tape.value(out).data()[i];
            assert!((got.re - expect).abs() < 1e-15 && got.im == 0.0);
        }
    }

    #[test]
    fn gradients_in_input_and_alpha_match_finite_differences() {
        let samples = ComplexArray::from_real(&[-0.9, 0.2, 0.6]);
        let alpha0 = ComplexArray::from_real(&ALPHA_INIT);
        let err = check_loss_gradients(
            |tape, leaves| {
                let (u, a) = (leaves[0], leaves[1]);
                let y = sigmoid_distort_tape(tape, u, a);
                let p = tape.abs_sqr(y);
                let s = tape.sum(p);
                tape.re(s)
            },
            &[samples, alpha0],
            1e-6,
        );
        assert!(err < 1e-6, "rel err {}", err);
    }
}
