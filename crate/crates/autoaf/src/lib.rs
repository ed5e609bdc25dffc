//! Learned and hand-tuned online optimizers for differentiable adaptive
//! filters.
//!
//! The crate trains adaptive-filter update rules directly from data:
//! multidelay block frequency-domain (MDF) echo-cancellation filters are
//! expressed as differentiable operators, optimized online by a
//! complex-valued GRU whose weights are meta-trained with truncated
//! backpropagation through time, and compared against hand-tuned NLMS and
//! RMSprop baselines on synthetic acoustic scenes.

pub mod complex;
pub mod filters;
pub mod optim;
