//! Online update rules behind one interface: the learned complex-GRU
//! optimizer and the hand-tuned LMS / NLMS / RMSprop baselines.
//!
//! Every rule is element-wise: the update for a parameter depends only on
//! that parameter's gradient and state (plus weights shared across
//! parameters), so updates commute with concatenation.

pub mod baselines;
pub mod features;
pub mod gru;

use serde::{Deserialize, Serialize};

use crate::complex::{ComplexArray, Tape};

pub use baselines::{lms_update, nlms_update, rmsprop_update, BaselineState};
pub use features::{extract_features, extract_features_tape};
pub use gru::{gru_step_tape, GruNodes, GruParams};

/// Default gradient clip/compress hyperparameter.
pub const DEFAULT_CLIP_P: f64 = 10.0;

/// An optimizer driving one online run. Updates are additive:
/// `θ ← θ + step(...)`.
pub trait OnlineOptimizer: Send {
    /// Per-parameter update for the current gradient. `input_power` carries
    /// |U|² per parameter for rules that normalize by input power.
    fn step(&mut self, grad: &ComplexArray, input_power: &[f64]) -> ComplexArray;

    /// Human-readable identifier for reports.
    fn name(&self) -> String;
}

/// LMS with a fixed step size.
pub struct LmsOptimizer {
    pub mu: f64,
}

impl OnlineOptimizer for LmsOptimizer {
    fn step(&mut self, grad: &ComplexArray, _input_power: &[f64]) -> ComplexArray {
        lms_update(self.mu, grad)
    }

    fn name(&self) -> String {
        format!("lms(mu={})", self.mu)
    }
}

/// Block frequency-domain NLMS with smoothed input power.
pub struct NlmsOptimizer {
    state: BaselineState,
}

impl NlmsOptimizer {
    pub fn new(mu: f64, beta: f64, param_count: usize) -> Self {
        Self {
            state: BaselineState::new(mu, beta, param_count),
        }
    }
}

impl OnlineOptimizer for NlmsOptimizer {
    fn step(&mut self, grad: &ComplexArray, input_power: &[f64]) -> ComplexArray {
        nlms_update(&mut self.state, grad, input_power)
    }

    fn name(&self) -> String {
        format!("nlms(mu={},beta={})", self.state.mu, self.state.beta)
    }
}

/// Frequency-domain RMSprop.
pub struct RmsPropOptimizer {
    state: BaselineState,
}

impl RmsPropOptimizer {
    pub fn new(mu: f64, beta: f64, param_count: usize) -> Self {
        Self {
            state: BaselineState::new(mu, beta, param_count),
        }
    }
}

impl OnlineOptimizer for RmsPropOptimizer {
    fn step(&mut self, grad: &ComplexArray, _input_power: &[f64]) -> ComplexArray {
        rmsprop_update(&mut self.state, grad)
    }

    fn name(&self) -> String {
        format!("rmsprop(mu={},beta={})", self.state.mu, self.state.beta)
    }
}

/// The learned optimizer at inference time: weights φ fixed, one hidden
/// state slot per optimizee parameter.
pub struct GruOptimizer {
    pub params: GruParams,
    pub clip_p: f64,
    h: ComplexArray,
}

impl GruOptimizer {
    pub fn new(params: GruParams, clip_p: f64, param_count: usize) -> Self {
        let h = params.zero_state(param_count);
        Self { params, clip_p, h }
    }

    pub fn hidden_state(&self) -> &ComplexArray {
        &self.h
    }
}

impl OnlineOptimizer for GruOptimizer {
    fn step(&mut self, grad: &ComplexArray, _input_power: &[f64]) -> ComplexArray {
        let mut tape = Tape::new();
        let phi = self.params.tape_nodes(&mut tape, false);
        let g = tape.constant(grad.reshaped(vec![grad.len()]));
        let h = tape.constant(self.h.clone());
        let feats = extract_features_tape(&mut tape, g, self.clip_p);
        let (raw, h2) = gru_step_tape(&mut tape, &phi, feats, h);
        // The learned rule is subtractive: θ ← θ − Δ̂.
        let delta = tape.neg(raw);
        self.h = tape.value(h2).clone();
        tape.value(delta).reshaped(grad.shape().to_vec())
    }

    fn name(&self) -> String {
        format!("gru(h={})", self.params.hidden)
    }
}

/// Serializable description of an optimizer run; learned weights come from
/// a checkpoint and are attached separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaselineSpec {
    Lms { mu: f64 },
    Nlms { mu: f64, beta: f64 },
    Rmsprop { mu: f64, beta: f64 },
}

impl BaselineSpec {
    pub fn build(&self, param_count: usize) -> Box<dyn OnlineOptimizer> {
        match *self {
            BaselineSpec::Lms { mu } => Box::new(LmsOptimizer { mu }),
            BaselineSpec::Nlms { mu, beta } => Box::new(NlmsOptimizer::new(mu, beta, param_count)),
            BaselineSpec::Rmsprop { mu, beta } => {
                Box::new(RmsPropOptimizer::new(mu, beta, param_count))
            }
        }
    }

    pub fn with_mu(&self, mu: f64) -> Self {
        match *self {
            BaselineSpec::Lms { .. } => BaselineSpec::Lms { mu },
            BaselineSpec::Nlms { beta, .. } => BaselineSpec::Nlms { mu, beta },
            BaselineSpec::Rmsprop { beta, .. } => BaselineSpec::Rmsprop { mu, beta },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn gru_optimizer_opposes_its_network_output() {
        let params = GruParams::init(2, 17);
        let mut opt = GruOptimizer::new(params.clone(), DEFAULT_CLIP_P, 2);
        let grad = ComplexArray::from_complex(&[
            Complex64::new(0.5, -0.2),
            Complex64::new(-0.9, 0.4),
        ]);
        let delta = opt.step(&grad, &[0.0, 0.0]);

        // Recompute the raw network output by hand: delta must be its
        // negation, and the hidden state must advance.
        let mut tape = Tape::new();
        let phi = params.tape_nodes(&mut tape, false);
        let g = tape.constant(grad.clone());
        let h0 = tape.constant(params.zero_state(2));
        let feats = extract_features_tape(&mut tape, g, DEFAULT_CLIP_P);
        let (raw, h2) = gru_step_tape(&mut tape, &phi, feats, h0);
        assert_eq!(delta, tape.value(raw).neg());
        assert_eq!(opt.hidden_state(), tape.value(h2));
    }

    #[test]
    fn baseline_spec_builds_matching_names() {
        assert!(BaselineSpec::Lms { mu: 0.1 }.build(4).name().starts_with("lms"));
        assert!(BaselineSpec::Nlms { mu: 0.1, beta: 0.99 }
            .build(4)
            .name()
            .starts_with("nlms"));
        assert!(BaselineSpec::Rmsprop { mu: 0.1, beta: 0.9 }
            .build(4)
            .name()
            .starts_with("rmsprop"));
    }
}
