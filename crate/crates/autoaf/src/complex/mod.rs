//! Complex array arithmetic, radix-2 FFT, and tape-based reverse-mode
//! automatic differentiation.

pub mod array;
pub mod fft;
pub mod gradcheck;
pub mod tape;

pub use array::ComplexArray;
pub use fft::{fft, ifft, FftSizeError};
pub use tape::{GradError, NodeId, Tape};
