//! Hand-tuned update rules: LMS, block frequency-domain NLMS with power
//! smoothing, and frequency-domain RMSprop. All consume the same autodiff
//! gradients as the learned optimizer and return additive updates
//! (`θ ← θ + Δθ`).

use num_complex::Complex64;

use crate::complex::ComplexArray;

/// Δθ = −μ·∇.
pub fn lms_update(mu: f64, grad: &ComplexArray) -> ComplexArray {
    assert!(mu > 0.0, "step size must be positive");
    grad.scale(Complex64::new(-mu, 0.0))
}

/// Shared state of the normalized baselines: a step size, a smoothing
/// constant, a regularizer, and one nonnegative accumulator per parameter.
#[derive(Debug, Clone)]
pub struct BaselineState {
    pub mu: f64,
    pub beta: f64,
    pub eps: f64,
    pub accum: Vec<f64>,
}

impl BaselineState {
    pub fn new(mu: f64, beta: f64, param_count: usize) -> Self {
        Self {
            mu,
            beta,
            eps: 1e-8,
            accum: vec![0.0; param_count],
        }
    }
}

/// Block NLMS: smooth the per-bin input power, then normalize the gradient
/// step by it. `input_power` is |U|² per parameter.
pub fn nlms_update(
    state: &mut BaselineState,
    grad: &ComplexArray,
    input_power: &[f64],
) -> ComplexArray {
    assert_eq!(grad.len(), state.accum.len(), "gradient/state size mismatch");
    assert_eq!(grad.len(), input_power.len(), "gradient/power size mismatch");
    let beta = state.beta;
    for (a, &p) in state.accum.iter_mut().zip(input_power) {
        *a = beta * *a + (1.0 - beta) * p;
    }
    let data = grad
        .data()
        .iter()
        .zip(state.accum.iter())
        .map(|(&g, &a)| g * (-state.mu / (a + state.eps)))
        .collect();
    ComplexArray::new(data, grad.shape().to_vec())
}

/// RMSprop: smooth the squared gradient magnitude, then normalize by its
/// square root.
pub fn rmsprop_update(state: &mut BaselineState, grad: &ComplexArray) -> ComplexArray {
    assert_eq!(grad.len(), state.accum.len(), "gradient/state size mismatch");
    let beta = state.beta;
    for (a, &g) in state.accum.iter_mut().zip(grad.data()) {
        *a = beta * *a + (1.0 - beta) * g.norm_sqr();
    }
    let data = grad
        .data()
        .iter()
        .zip(state.accum.iter())
        .map(|(&g, &a)| g * (-state.mu / (a.sqrt() + state.eps)))
        .collect();
    ComplexArray::new(data, grad.shape().to_vec())
}
