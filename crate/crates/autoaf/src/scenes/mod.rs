//! Data plane: synthetic acoustic scene generation, WAV ingestion,
//! resampling to 8 kHz, and the echo-path-change concatenation harness.

pub mod cache;
pub mod gen;
pub mod manifest;
pub mod resample;
pub mod wav;

use std::io;
use thiserror::Error;

pub use gen::{generate_scene, DistortionKind, SceneDistribution, SceneSpec, SourceKind};
pub use resample::resample_to_8k;
pub use wav::{load_wav, write_wav};

/// Paired far-end / near-end signals with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Far-end reference signal (the filter input).
    pub far: Vec<f64>,
    /// Near-end microphone signal: echo plus noise, no near-end speech.
    pub near: Vec<f64>,
    pub sample_rate: u32,
    pub meta: SceneMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneMeta {
    pub id: String,
    pub seed: u64,
    pub snr_db: Option<f64>,
    pub distortion: DistortionKind,
    pub rir_taps: usize,
    /// Sample index of an echo-path change for concatenated scenes.
    pub change_boundary: Option<usize>,
}

impl Scene {
    pub fn is_linear(&self) -> bool {
        matches!(self.meta.distortion, DistortionKind::None)
    }

    pub fn tag(&self) -> &'static str {
        if self.is_linear() {
            "linear"
        } else {
            "nonlinear"
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.far.len() as f64 / self.sample_rate as f64
    }
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("sample rate mismatch: {0} vs {1}")]
    RateMismatch(u32, u32),
    #[error("scene duration must be positive")]
    EmptyDuration,
    #[error("wav source error: {0}")]
    Wav(#[from] wav::WavError),
    #[error("resample error: {0}")]
    Resample(#[from] resample::ResampleError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("manifest error: {0}")]
    Manifest(String),
}

/// Concatenate two scenes into one with an abrupt echo-path change at the
/// boundary between them.
pub fn concat_scene_change(a: &Scene, b: &Scene) -> Result<Scene, SceneError> {
    if a.sample_rate != b.sample_rate {
        return Err(SceneError::RateMismatch(a.sample_rate, b.sample_rate));
    }
    let boundary = a.far.len();
    let mut far = a.far.clone();
    far.extend_from_slice(&b.far);
    let mut near = a.near.clone();
    near.extend_from_slice(&b.near);
    Ok(Scene {
        far,
        near,
        sample_rate: a.sample_rate,
        meta: SceneMeta {
            id: format!("{}+{}", a.meta.id, b.meta.id),
            seed: a.meta.seed,
            snr_db: a.meta.snr_db,
            distortion: a.meta.distortion,
            rir_taps: a.meta.rir_taps,
            change_boundary: Some(boundary),
        },
    })
}

/// Stable seed derivation for nested deterministic streams (splitmix64
/// chain over the tag values).
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = root;
    for &t in tags {
        state = state.wrapping_add(0x9e3779b97f4a7c15).wrapping_add(t);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        state = z ^ (z >> 31);
    }
    state
}
