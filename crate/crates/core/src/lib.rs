//! Burst-mode coherent receiver DSP: CAZAC preamble generation, a linear
//! dual-polarization fiber channel, frame synchronization, frequency-offset
//! estimation, frequency-domain channel estimation and adaptive equalization.

pub mod channel;
pub mod equalize;
pub mod error;
pub mod fft;
pub mod harness;
pub mod scalar;
pub mod seqcore;
pub mod signal;
pub mod sync;
pub mod txchain;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision aliases for the generic types.
pub type Signal = signal::DualPolSignal<f64>;
pub type Sequence = signal::ComplexSequence<f64>;
pub type Blocks = seqcore::TrainingBlocks<f64>;
pub type Frame = txchain::BurstFrame<f64>;
pub type Estimate = equalize::ChannelEstimate<f64>;
pub type Equalizer = equalize::EqualizerState<f64>;
pub type FrameSync = sync::SyncResult<f64>;
