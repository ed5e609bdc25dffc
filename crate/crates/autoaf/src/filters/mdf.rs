//! Multidelay block frequency-domain (MDF) adaptive filter.
//!
//! The filter holds `M` delayed blocks of `N`-point spectra. Each hop of
//! `N·(1−R)` input samples is buffered to length `N` with overlap `R`, the
//! block spectra shift by one, and the newest row becomes the FFT of the
//! buffer. Filtering is overlap-save: the output is the newest hop's worth
//! of the valid tail of `FFT⁻¹(Σ_m W_m ⊙ U_m)`. After every weight update
//! the blocks are antialiased so each keeps `N/2` nonzero time-domain taps.
//!
//! Two representations cooperate: `MdfState` carries plain values for
//! streaming and evaluation; `MdfTapeState` carries tape nodes for
//! differentiation. Both run the same array kernels, so a fixed update rule
//! produces bit-identical trajectories on either path.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex::array::ComplexArray;
use crate::complex::fft::fft_last_axis;
use crate::complex::{NodeId, Tape};

use super::loss::mse_loss_tape;
use super::sigmoid::{sigmoid_distort_tape, ALPHA_INIT};
use super::{FilterError, MdfConfigError};

/// Structural configuration of an MDF optimizee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdfConfig {
    /// Number of delayed blocks, M.
    pub blocks: usize,
    /// FFT size N (power of two).
    pub fft_size: usize,
    /// Overlap fraction R; the hop is N·(1−R).
    pub overlap: f64,
    /// Whether the parametric sigmoid front-end is active.
    pub nonlinearity: bool,
}

impl MdfConfig {
    pub fn new(blocks: usize, fft_size: usize, overlap: f64, nonlinearity: bool) -> Self {
        Self {
            blocks,
            fft_size,
            overlap,
            nonlinearity,
        }
    }

    pub fn validate(&self) -> Result<(), MdfConfigError> {
        if self.blocks == 0 {
            return Err(MdfConfigError::Blocks);
        }
        if self.fft_size < 2 || !self.fft_size.is_power_of_two() {
            return Err(MdfConfigError::FftSize(self.fft_size));
        }
        let hop_f = self.fft_size as f64 * (1.0 - self.overlap);
        let hop = hop_f.round();
        if (hop - hop_f).abs() > 1e-9 {
            return Err(MdfConfigError::HopNotIntegral {
                overlap: self.overlap,
                fft_size: self.fft_size,
            });
        }
        let hop = hop as usize;
        if hop == 0 || hop > self.fft_size / 2 {
            return Err(MdfConfigError::HopRange {
                hop,
                limit: self.fft_size / 2,
            });
        }
        Ok(())
    }

    /// Samples consumed and produced per step: N·(1−R).
    pub fn hop(&self) -> usize {
        (self.fft_size as f64 * (1.0 - self.overlap)).round() as usize
    }

    /// Nonzero time-domain taps per block.
    pub fn taps_per_block(&self) -> usize {
        self.fft_size / 2
    }

    /// Nonzero time-domain taps in total: P = M·N/2.
    pub fn time_taps(&self) -> usize {
        self.blocks * self.fft_size / 2
    }

    /// Scalar parameters as seen by an element-wise optimizer: every stored
    /// frequency-domain coefficient plus the four sigmoid coefficients.
    pub fn param_count(&self) -> usize {
        self.blocks * self.fft_size + if self.nonlinearity { 4 } else { 0 }
    }
}

/// Mask that zeroes the last N/2 time-domain samples of each block row.
fn antialias_mask(blocks: usize, fft_size: usize) -> ComplexArray {
    let keep = fft_size / 2;
    let mut data = Vec::with_capacity(blocks * fft_size);
    for _ in 0..blocks {
        for j in 0..fft_size {
            data.push(Complex64::new(if j < keep { 1.0 } else { 0.0 }, 0.0));
        }
    }
    ComplexArray::new(data, vec![blocks, fft_size])
}

/// Project each row of `w` so that its inverse transform has support on the
/// first N/2 samples: inverse FFT, zero the tail, forward FFT.
pub fn antialias(w: &ComplexArray) -> ComplexArray {
    let mask = antialias_mask(w.rows(), w.row_len());
    let time = fft_last_axis(w, true);
    fft_last_axis(&time.mul(&mask), false)
}

/// Tape counterpart of [`antialias`].
pub fn antialias_tape(tape: &mut Tape, w: NodeId) -> NodeId {
    let v = tape.value(w);
    let mask = antialias_mask(v.rows(), v.row_len());
    let time = tape.ifft(w);
    let masked = tape.mul_const(time, mask);
    tape.fft(masked)
}

/// Value-level optimizee state. Operations return updated states; there is
/// no interior mutability.
#[derive(Debug, Clone, PartialEq)]
pub struct MdfState {
    pub config: MdfConfig,
    /// Frequency-domain filter blocks W, [M, N].
    pub weights: ComplexArray,
    /// Delayed input spectra U, [M, N]; the last row is the newest.
    pub spectra: ComplexArray,
    /// Last N time-domain input samples (after the front-end, if active).
    pub buffer: Vec<f64>,
    /// Sigmoid coefficients α₁..α₄ as real-valued complex entries;
    /// present iff the nonlinearity is enabled.
    pub alpha: Option<ComplexArray>,
}

impl MdfState {
    pub fn new(config: MdfConfig) -> Result<Self, MdfConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            weights: ComplexArray::zeros(vec![config.blocks, config.fft_size]),
            spectra: ComplexArray::zeros(vec![config.blocks, config.fft_size]),
            buffer: vec![0.0; config.fft_size],
            alpha: config
                .nonlinearity
                .then(|| ComplexArray::from_real(&ALPHA_INIT)),
        })
    }

    /// Shift in one hop of (already distorted) far-end samples.
    pub fn ingest(&self, block: &[f64]) -> Result<Self, FilterError> {
        let hop = self.config.hop();
        if block.len() != hop {
            return Err(FilterError::BlockLength {
                expected: hop,
                got: block.len(),
            });
        }
        let n = self.config.fft_size;
        let mut buffer = Vec::with_capacity(n);
        buffer.extend_from_slice(&self.buffer[hop..]);
        buffer.extend_from_slice(block);

        let new_row = fft_last_axis(&ComplexArray::from_real(&buffer), false)
            .reshaped(vec![1, n]);
        let spectra = if self.config.blocks > 1 {
            self.spectra.slice0(1, self.config.blocks - 1).concat0(&new_row)
        } else {
            new_row
        };
        Ok(Self {
            config: self.config,
            weights: self.weights.clone(),
            spectra,
            buffer,
            alpha: self.alpha.clone(),
        })
    }

    /// Newest hop's worth of the filtered output.
    pub fn filter(&self) -> Vec<f64> {
        let n = self.config.fft_size;
        let hop = self.config.hop();
        let summed = self.weights.mul(&self.spectra).sum_axis0();
        let time = fft_last_axis(&summed, true);
        time.slice0(n - hop, hop).data().iter().map(|z| z.re).collect()
    }

    /// Concatenated parameter vector θ = (vec W, α).
    pub fn params_concat(&self) -> ComplexArray {
        let w = self
            .weights
            .reshaped(vec![self.config.blocks * self.config.fft_size]);
        match &self.alpha {
            Some(a) => w.concat0(a),
            None => w,
        }
    }

    /// Apply an additive parameter update: weights are antialiased, alpha is
    /// projected back to real values.
    pub fn apply_delta(&mut self, delta: &ComplexArray) {
        let nw = self.config.blocks * self.config.fft_size;
        assert_eq!(delta.len(), self.config.param_count(), "delta length");
        let dw = delta
            .slice0(0, nw)
            .reshaped(vec![self.config.blocks, self.config.fft_size]);
        self.weights = antialias(&self.weights.add(&dw));
        if let Some(alpha) = &self.alpha {
            let da = delta.slice0(nw, 4);
            self.alpha = Some(alpha.add(&da).re());
        }
    }

    /// Per-parameter input power |U|² aligned with [`Self::params_concat`];
    /// the sigmoid coefficients get the mean block power.
    pub fn input_power_concat(&self) -> Vec<f64> {
        let mut power: Vec<f64> = self.spectra.data().iter().map(|z| z.norm_sqr()).collect();
        if self.alpha.is_some() {
            let mean = power.iter().sum::<f64>() / power.len().max(1) as f64;
            power.extend([mean; 4]);
        }
        power
    }

    /// Mirror this state onto a tape. Weights and alpha become leaves;
    /// buffer and spectra are constants.
    pub fn tape_state(&self, tape: &mut Tape) -> MdfTapeState {
        let weights = tape.leaf(self.weights.clone());
        let alpha = self.alpha.as_ref().map(|a| tape.leaf(a.clone()));
        let buffer = tape.constant(ComplexArray::from_real(&self.buffer));
        let spectra = tape.constant(self.spectra.clone());
        MdfTapeState {
            config: self.config,
            weights,
            alpha,
            buffer,
            spectra,
        }
    }
}

/// Node-level optimizee state for differentiable runs.
#[derive(Debug, Clone, Copy)]
pub struct MdfTapeState {
    pub config: MdfConfig,
    pub weights: NodeId,
    pub alpha: Option<NodeId>,
    pub buffer: NodeId,
    pub spectra: NodeId,
}

/// Outputs of one differentiable filter step.
pub struct MdfStep {
    /// Filtered output, hop samples, real-valued.
    pub output: NodeId,
    /// Mean squared error of the step.
    pub loss: NodeId,
    /// Updated input buffer and block spectra (for the next step).
    pub buffer: NodeId,
    pub spectra: NodeId,
}

impl MdfTapeState {
    /// Parameter nodes in θ order (weights, then alpha).
    pub fn param_nodes(&self) -> Vec<NodeId> {
        let mut nodes = vec![self.weights];
        if let Some(a) = self.alpha {
            nodes.push(a);
        }
        nodes
    }

    /// Oldest node id among the parameters; the per-step gradient sweep
    /// never needs to descend below it.
    pub fn param_floor(&self) -> NodeId {
        self.param_nodes().into_iter().min().unwrap()
    }

    /// One filter step: distort (when active), ingest, filter, and score
    /// against the desired block.
    pub fn step(&self, tape: &mut Tape, far_block: &[f64], near_block: &[f64]) -> MdfStep {
        let n = self.config.fft_size;
        let hop = self.config.hop();
        assert_eq!(far_block.len(), hop, "far block must be one hop");
        assert_eq!(near_block.len(), hop, "near block must be one hop");

        let raw = tape.constant(ComplexArray::from_real(far_block));
        let distorted = match self.alpha {
            Some(alpha) => sigmoid_distort_tape(tape, raw, alpha),
            None => raw,
        };

        let tail = tape.slice0(self.buffer, hop, n - hop);
        let buffer = tape.concat0(tail, distorted);

        let spectrum = tape.fft(buffer);
        let new_row = tape.reshape(spectrum, vec![1, n]);
        let spectra = if self.config.blocks > 1 {
            let shifted = tape.slice0(self.spectra, 1, self.config.blocks - 1);
            tape.concat0(shifted, new_row)
        } else {
            new_row
        };

        let prod = tape.mul(self.weights, spectra);
        let summed = tape.sum_axis0(prod);
        let time = tape.ifft(summed);
        let tail_out = tape.slice0(time, n - hop, hop);
        let output = tape.re(tail_out);

        let desired = tape.constant(ComplexArray::from_real(near_block));
        let loss = mse_loss_tape(tape, output, desired);

        MdfStep {
            output,
            loss,
            buffer,
            spectra,
        }
    }

    /// Apply an additive update to θ: weights gain `delta_w` and are
    /// antialiased; alpha gains `delta_alpha` and is projected to the reals.
    pub fn apply_delta(
        &self,
        tape: &mut Tape,
        delta_w: NodeId,
        delta_alpha: Option<NodeId>,
        step: &MdfStep,
    ) -> MdfTapeState {
        let moved = tape.add(self.weights, delta_w);
        let weights = antialias_tape(tape, moved);
        let alpha = match (self.alpha, delta_alpha) {
            (Some(a), Some(da)) => {
                let moved = tape.add(a, da);
                Some(tape.re(moved))
            }
            (a, None) => a,
            (None, Some(_)) => panic!("delta for absent alpha"),
        };
        MdfTapeState {
            config: self.config,
            weights,
            alpha,
            buffer: step.buffer,
            spectra: step.spectra,
        }
    }

    /// Concatenate gradient (or any per-parameter) nodes into the θ layout.
    pub fn concat_param_nodes(&self, tape: &mut Tape, nodes: &[NodeId]) -> NodeId {
        let nw = self.config.blocks * self.config.fft_size;
        let flat = tape.reshape(nodes[0], vec![nw]);
        if nodes.len() > 1 {
            tape.concat0(flat, nodes[1])
        } else {
            flat
        }
    }

    /// Split a θ-layout vector back into (weights, alpha) nodes.
    pub fn split_param_vector(&self, tape: &mut Tape, v: NodeId) -> (NodeId, Option<NodeId>) {
        let nw = self.config.blocks * self.config.fft_size;
        let wpart = tape.slice0(v, 0, nw);
        let w = tape.reshape(wpart, vec![self.config.blocks, self.config.fft_size]);
        let a = self.alpha.map(|_| tape.slice0(v, nw, 4));
        (w, a)
    }
}

/// Equivalent complex FIR taps of an antialiased weight matrix: block `m`
/// (row M−1 newest) contributes its N/2 leading time-domain samples at
/// delay `(M−1−m)·hop`.
pub fn equivalent_fir(config: &MdfConfig, weights: &ComplexArray) -> Vec<Complex64> {
    let hop = config.hop();
    let keep = config.taps_per_block();
    let m = config.blocks;
    let mut taps = vec![Complex64::new(0.0, 0.0); (m - 1) * hop + keep];
    let time = fft_last_axis(weights, true);
    for row in 0..m {
        let delay = (m - 1 - row) * hop;
        for j in 0..keep {
            taps[delay + j] += time.row(row)[j];
        }
    }
    taps
}
