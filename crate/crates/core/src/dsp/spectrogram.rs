//! Log-filtered spectrogram and context-window stacking.

use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::{gemm_nt, Scalar};
use crate::Result;

use super::audio::AudioBuffer;
use super::filterbank::Filterbank;
use super::stft::{stft_magnitude, FrameParams};

/// Log-compressed, log-frequency magnitude spectrogram:
/// `values[frame, band] = ln(1 + (B |S|ᵀ)ᵀ)`.
#[derive(Debug, Clone)]
pub struct Spectrogram<T> {
    /// `[num_frames, num_bands]`
    values: Tensor<T>,
    frame_rate: f64,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn new(values: Tensor<T>, frame_rate: f64) -> Self {
        assert_eq!(values.shape().len(), 2, "spectrogram must be [frames, bands]");
        assert!(frame_rate > 0.0);
        Spectrogram { values, frame_rate }
    }

    pub fn values(&self) -> &Tensor<T> {
        &self.values
    }

    pub fn num_frames(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn num_bands(&self) -> usize {
        self.values.shape()[1]
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frame(&self, i: usize) -> &[T] {
        self.values.row(i)
    }
}

/// One classifier input: the target frame plus `C` context frames on each
/// side, stored as `[num_bands, 2C+1]` with time along the columns.
#[derive(Debug, Clone)]
pub struct ContextWindow<T> {
    pub values: Tensor<T>,
    pub target_index: usize,
}

/// Applies the filterbank to the magnitude STFT and compresses with
/// `ln(1 + x)`.
pub fn log_filtered_spectrogram<T: Scalar>(
    audio: &AudioBuffer<T>,
    params: &FrameParams,
    filterbank: &Filterbank<T>,
) -> Result<Spectrogram<T>> {
    let mags = stft_magnitude(audio, params)?;
    let (frames, bins) = (mags.shape()[0], mags.shape()[1]);
    if filterbank.num_fft_bins() != bins {
        return Err(Error::ShapeMismatch {
            context: "filterbank applied to STFT",
            expected: vec![filterbank.num_bands(), bins],
            actual: vec![filterbank.num_bands(), filterbank.num_fft_bins()],
        });
    }
    let bands = filterbank.num_bands();
    // values = |S| · Bᵀ, then log(1 + ·)
    let mut values = Tensor::zeros(&[frames, bands]);
    gemm_nt(
        frames,
        bins,
        bands,
        T::one(),
        mags.data(),
        filterbank.weights().data(),
        T::zero(),
        values.data_mut(),
    );
    for v in values.data_mut() {
        // tiny negatives from the GEMM of nonnegative factors are rounding
        *v = (T::one() + v.max(T::zero())).ln();
    }
    Ok(Spectrogram::new(values, params.frame_rate()))
}

/// One context window per frame; frames beyond the edges are filled by
/// replicating the first/last frame, so N frames in gives N windows out.
pub fn context_windows<T: Scalar>(spec: &Spectrogram<T>, context: usize) -> Vec<ContextWindow<T>> {
    let cols = 2 * context + 1;
    (0..spec.num_frames())
        .map(|i| {
            let mut values = Tensor::zeros(&[spec.num_bands(), cols]);
            copy_context_window(spec, i, context, values.data_mut());
            ContextWindow { values, target_index: i }
        })
        .collect()
}

/// Writes the `[num_bands, 2C+1]` window for frame `target` into `out`
/// (row-major, bands × columns). Used for batch assembly without
/// intermediate allocations.
pub fn copy_context_window<T: Scalar>(spec: &Spectrogram<T>, target: usize, context: usize, out: &mut [T]) {
    let bands = spec.num_bands();
    let cols = 2 * context + 1;
    assert!(target < spec.num_frames(), "target frame out of range");
    assert_eq!(out.len(), bands * cols, "window buffer size");
    let last = spec.num_frames() - 1;
    for col in 0..cols {
        let frame = (target + col).saturating_sub(context).min(last);
        let src = spec.frame(frame);
        for band in 0..bands {
            out[band * cols + col] = src[band];
        }
    }
}
