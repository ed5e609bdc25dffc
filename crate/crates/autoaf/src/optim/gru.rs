//! Complex-valued GRU update rule.
//!
//! The optimizer is applied element-wise to every optimizee parameter: a
//! complex linear layer lifts the scalar gradient feature to an H-vector,
//! one GRU cell is applied twice with tied weights to the parameter's
//! shared H-dimensional hidden state, and a complex output layer collapses
//! the result back to a scalar update. Activations are split (applied to
//! real and imaginary parts independently); every layer is followed by a
//! split ReLU.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::complex::{ComplexArray, NodeId, Tape};

/// Learned weights φ of the GRU optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub hidden: usize,
    /// Whether the final linear layer is followed by a split ReLU. On by
    /// default; see [`GruParams::init`].
    pub output_relu: bool,
    pub w_in: ComplexArray,  // [1, H]
    pub b_in: ComplexArray,  // [H]
    pub w_ir: ComplexArray,  // [H, H]
    pub w_iz: ComplexArray,
    pub w_ic: ComplexArray,
    pub w_hr: ComplexArray,
    pub w_hz: ComplexArray,
    pub w_hc: ComplexArray,
    pub b_r: ComplexArray, // [H]
    pub b_z: ComplexArray,
    pub b_c: ComplexArray,
    pub w_out: ComplexArray, // [H, 1]
    pub b_out: ComplexArray, // [1]
}

fn uniform_modulus_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexArray {
    // Modulus from a scaled uniform, phase independent and uniform.
    let scale = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let r: f64 = rng.gen_range(0.0..scale);
            let theta: f64 = rng.gen_range(-PI..PI);
            Complex64::from_polar(r, theta)
        })
        .collect();
    ComplexArray::new(data, vec![rows, cols])
}

impl GruParams {
    /// Deterministic initialization: gate weight moduli from a scaled
    /// uniform with independent uniform phases, zero biases.
    pub fn init(hidden: usize, seed: u64) -> Self {
        assert!(hidden >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = hidden;
        Self {
            hidden,
            output_relu: true,
            w_in: uniform_modulus_matrix(&mut rng, 1, h),
            b_in: ComplexArray::zeros(vec![h]),
            w_ir: uniform_modulus_matrix(&mut rng, h, h),
            w_iz: uniform_modulus_matrix(&mut rng, h, h),
            w_ic: uniform_modulus_matrix(&mut rng, h, h),
            w_hr: uniform_modulus_matrix(&mut rng, h, h),
            w_hz: uniform_modulus_matrix(&mut rng, h, h),
            w_hc: uniform_modulus_matrix(&mut rng, h, h),
            b_r: ComplexArray::zeros(vec![h]),
            b_z: ComplexArray::zeros(vec![h]),
            b_c: ComplexArray::zeros(vec![h]),
            w_out: uniform_modulus_matrix(&mut rng, h, 1),
            b_out: ComplexArray::zeros(vec![1]),
        }
    }

    /// Complex parameter count: 6H² + 6H + 1.
    pub fn param_count_complex(&self) -> usize {
        6 * self.hidden * self.hidden + 6 * self.hidden + 1
    }

    /// Stable field order used by checkpoints and the meta optimizer.
    pub fn named_arrays(&self) -> Vec<(&'static str, &ComplexArray)> {
        vec![
            ("w_in", &self.w_in),
            ("b_in", &self.b_in),
            ("w_ir", &self.w_ir),
            ("w_iz", &self.w_iz),
            ("w_ic", &self.w_ic),
            ("w_hr", &self.w_hr),
            ("w_hz", &self.w_hz),
            ("w_hc", &self.w_hc),
            ("b_r", &self.b_r),
            ("b_z", &self.b_z),
            ("b_c", &self.b_c),
            ("w_out", &self.w_out),
            ("b_out", &self.b_out),
        ]
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut ComplexArray> {
        vec![
            &mut self.w_in,
            &mut self.b_in,
            &mut self.w_ir,
            &mut self.w_iz,
            &mut self.w_ic,
            &mut self.w_hr,
            &mut self.w_hz,
            &mut self.w_hc,
            &mut self.b_r,
            &mut self.b_z,
            &mut self.b_c,
            &mut self.w_out,
            &mut self.b_out,
        ]
    }

    /// Register φ on a tape, as leaves (meta-training) or constants
    /// (inference).
    pub fn tape_nodes(&self, tape: &mut Tape, as_leaves: bool) -> GruNodes {
        let mut put = |v: &ComplexArray| {
            if as_leaves {
                tape.leaf(v.clone())
            } else {
                tape.constant(v.clone())
            }
        };
        GruNodes {
            hidden: self.hidden,
            output_relu: self.output_relu,
            w_in: put(&self.w_in),
            b_in: put(&self.b_in),
            w_ir: put(&self.w_ir),
            w_iz: put(&self.w_iz),
            w_ic: put(&self.w_ic),
            w_hr: put(&self.w_hr),
            w_hz: put(&self.w_hz),
            w_hc: put(&self.w_hc),
            b_r: put(&self.b_r),
            b_z: put(&self.b_z),
            b_c: put(&self.b_c),
            w_out: put(&self.w_out),
            b_out: put(&self.b_out),
        }
    }

    /// Fresh per-parameter hidden state for `param_count` parameters.
    pub fn zero_state(&self, param_count: usize) -> ComplexArray {
        ComplexArray::zeros(vec![param_count, self.hidden])
    }
}

/// φ registered on a tape.
#[derive(Debug, Clone, Copy)]
pub struct GruNodes {
    pub hidden: usize,
    pub output_relu: bool,
    pub w_in: NodeId,
    pub b_in: NodeId,
    pub w_ir: NodeId,
    pub w_iz: NodeId,
    pub w_ic: NodeId,
    pub w_hr: NodeId,
    pub w_hz: NodeId,
    pub w_hc: NodeId,
    pub b_r: NodeId,
    pub b_z: NodeId,
    pub b_c: NodeId,
    pub w_out: NodeId,
    pub b_out: NodeId,
}

impl GruNodes {
    /// Node ids in [`GruParams::named_arrays`] order.
    pub fn all(&self) -> Vec<NodeId> {
        vec![
            self.w_in, self.b_in, self.w_ir, self.w_iz, self.w_ic, self.w_hr, self.w_hz,
            self.w_hc, self.b_r, self.b_z, self.b_c, self.w_out, self.b_out,
        ]
    }
}

fn cell(tape: &mut Tape, phi: &GruNodes, x: NodeId, h: NodeId) -> NodeId {
    let shape = tape.value(h).shape().to_vec();
    let xr = tape.matmul(x, phi.w_ir);
    let hr = tape.matmul(h, phi.w_hr);
    let pre_r = tape.add(xr, hr);
    let pre_r = tape.add_row(pre_r, phi.b_r);
    let r = tape.split_sigmoid(pre_r);

    let xz = tape.matmul(x, phi.w_iz);
    let hz = tape.matmul(h, phi.w_hz);
    let pre_z = tape.add(xz, hz);
    let pre_z = tape.add_row(pre_z, phi.b_z);
    let z = tape.split_sigmoid(pre_z);

    let rh = tape.mul(r, h);
    let xc = tape.matmul(x, phi.w_ic);
    let hc = tape.matmul(rh, phi.w_hc);
    let pre_c = tape.add(xc, hc);
    let pre_c = tape.add_row(pre_c, phi.b_c);
    let c = tape.split_tanh(pre_c);

    let ones = tape.ones_const(shape);
    let omz = tape.sub(ones, z);
    let keep = tape.mul(z, h);
    let new = tape.mul(omz, c);
    tape.add(new, keep)
}

/// One optimizer step over `P` parameters: gradient features `[P]` and
/// hidden state `[P, H]` in, update `Δθ̂ [P]` and next hidden state out.
/// The inner loop applies `θ ← θ − Δθ̂`.
pub fn gru_step_tape(
    tape: &mut Tape,
    phi: &GruNodes,
    features: NodeId,
    h: NodeId,
) -> (NodeId, NodeId) {
    let p = tape.value(features).len();
    assert_eq!(
        tape.value(h).shape(),
        &[p, phi.hidden],
        "hidden state shape mismatch"
    );

    let col = tape.reshape(features, vec![p, 1]);
    let lifted = tape.matmul(col, phi.w_in);
    let lifted = tape.add_row(lifted, phi.b_in);
    let x = tape.split_relu(lifted);

    let h1 = cell(tape, phi, x, h);
    let h2 = cell(tape, phi, h1, h1);

    let y = tape.split_relu(h2);
    let out = tape.matmul(y, phi.w_out);
    let out = tape.add_row(out, phi.b_out);
    let out = if phi.output_relu {
        tape.split_relu(out)
    } else {
        out
    };
    let delta = tape.reshape(out, vec![p]);
    (delta, h2)
}
