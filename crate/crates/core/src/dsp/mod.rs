//! Audio front-end: WAV decoding, short-time Fourier transform,
//! log-frequency triangular filterbank and context-window stacking.
//!
//! The default parameters (frame size 8192, hop 4410 at 44100 Hz, 24 bands
//! per octave between 65 Hz and 2100 Hz, context ±7) produce 105-band
//! spectrogram frames at 10 frames/s and 105×15 classifier inputs covering
//! 1.5 s of audio each.

mod audio;
mod filterbank;
mod spectrogram;
mod stft;

pub use audio::{decode_audio, write_wav, AudioBuffer};
pub use filterbank::{build_log_filterbank, Filterbank};
pub use spectrogram::{context_windows, copy_context_window, log_filtered_spectrogram, ContextWindow, Spectrogram};
pub use stft::{stft_magnitude, stft_magnitude_windowed, FrameParams, WindowKind};
