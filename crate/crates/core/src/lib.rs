//! Chord recognition toolkit.
//!
//! The pipeline has three stages:
//!
//! 1. [`dsp`] turns raw audio into a log-frequency, log-compressed magnitude
//!    spectrogram (105 bands at 10 frames/s for the default parameters) and
//!    stacks it into 105×15 context windows.
//! 2. [`model`] is a fully convolutional network (built from the layer
//!    primitives in [`nn`]) that classifies each context window into one of
//!    25 chord classes and exposes a 128-dimensional hidden feature vector
//!    per frame.
//! 3. [`crf`] is a linear-chain conditional random field over those feature
//!    sequences; Viterbi decoding produces the final chord sequence.
//!
//! [`data`] handles annotations, label reduction and training-time
//! augmentation (including a synthetic-corpus generator), [`eval`] implements
//! weighted chord symbol recall, and [`analysis`] inspects the trained
//! classifier weights.
//!
//! All numeric code is generic over the scalar type via [`Scalar`]
//! (implemented for `f32` and `f64`); the `*32`/`*64` aliases below pick a
//! concrete precision.

pub mod analysis;
pub mod container;
pub mod crf;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod scalar;

pub use error::Error;
pub use scalar::Scalar;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;

pub type Tensor32 = nn::Tensor<f32>;
pub type Tensor64 = nn::Tensor<f64>;
pub type Spectrogram32 = dsp::Spectrogram<f32>;
pub type Spectrogram64 = dsp::Spectrogram<f64>;
pub type ChordNet32 = model::ChordNet<f32>;
pub type ChordNet64 = model::ChordNet<f64>;
pub type CrfParams32 = crf::CrfParams<f32>;
pub type CrfParams64 = crf::CrfParams<f64>;
