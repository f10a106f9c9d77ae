//! Short-time Fourier transform magnitudes.

use std::f64::consts::TAU;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::Result;

use super::audio::AudioBuffer;

/// STFT framing parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub frame_size: usize,
    pub hop_size: usize,
    pub sample_rate: u32,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            frame_size: 8192,
            hop_size: 4410,
            sample_rate: 44100,
        }
    }
}

impl FrameParams {
    pub fn validate(&self) -> Result<()> {
        if self.hop_size == 0 || self.frame_size <= self.hop_size {
            return Err(Error::InvalidParam(format!(
                "need frame_size > hop_size > 0, got {}/{}",
                self.frame_size, self.hop_size
            )));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidParam("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_size / 2 + 1
    }

    /// Spectrogram frames per second; 10.0 for the defaults.
    pub fn frame_rate(&self) -> f64 {
        self.sample_rate as f64 / self.hop_size as f64
    }

    pub fn num_frames(&self, num_samples: usize) -> usize {
        num_samples.div_ceil(self.hop_size)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Rectangular,
}

impl WindowKind {
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            // periodic Hann
            WindowKind::Hann => (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

/// Magnitude STFT with Hann-windowed frames centred on `t = n·hop_size`
/// (symmetric zero padding at the edges). Output shape is
/// `[num_frames, frame_size/2 + 1]` with `num_frames = ceil(len / hop_size)`.
pub fn stft_magnitude<T: Scalar>(audio: &AudioBuffer<T>, params: &FrameParams) -> Result<Tensor<T>> {
    stft_magnitude_windowed(audio, params, WindowKind::Hann)
}

pub fn stft_magnitude_windowed<T: Scalar>(
    audio: &AudioBuffer<T>,
    params: &FrameParams,
    window: WindowKind,
) -> Result<Tensor<T>> {
    params.validate()?;
    if audio.is_empty() {
        return Err(Error::EmptyInput("audio"));
    }
    let n = params.frame_size;
    let num_frames = params.num_frames(audio.len());
    let num_bins = params.num_bins();
    let coeffs: Vec<T> = window.coefficients(n).into_iter().map(|c| T::from(c).unwrap()).collect();

    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(n);
    let samples = audio.samples();
    let half = (n / 2) as isize;

    let mut out = Tensor::zeros(&[num_frames, num_bins]);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for frame in 0..num_frames {
        let center = (frame * params.hop_size) as isize;
        for (j, slot) in buf.iter_mut().enumerate() {
            let idx = center - half + j as isize;
            let v = if idx >= 0 && (idx as usize) < samples.len() {
                samples[idx as usize] * coeffs[j]
            } else {
                T::zero()
            };
            *slot = Complex::new(v, T::zero());
        }
        fft.process(&mut buf);
        for (dst, c) in out.row_mut(frame).iter_mut().zip(buf.iter().take(num_bins)) {
            *dst = c.norm();
        }
    }
    Ok(out)
}
