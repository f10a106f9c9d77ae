//! Logarithmically spaced triangular filterbank.

use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::Result;

/// Triangular filterbank over FFT bins.
///
/// Row `i` of `weights` is one unimodal, nonnegative, area-normalised
/// triangle; band centres are strictly increasing.
#[derive(Debug, Clone)]
pub struct Filterbank<T> {
    /// `[num_bands, num_fft_bins]`
    weights: Tensor<T>,
    centers_hz: Vec<f64>,
}

impl<T: Scalar> Filterbank<T> {
    pub fn num_bands(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn num_fft_bins(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn weights(&self) -> &Tensor<T> {
        &self.weights
    }

    pub fn band_center_frequencies(&self) -> &[f64] {
        &self.centers_hz
    }
}

/// Builds the log-frequency filterbank: target centres geometrically spaced
/// at `2^(1/bands_per_octave)` ratios over `[fmin, fmax]`, each snapped to
/// the nearest FFT bin, duplicates merged, and one triangle per surviving
/// interior centre spanning its two neighbours. Every row is normalised to
/// unit area.
///
/// For the default parameters (44100 Hz, frame size 8192, 24 bands/octave,
/// 65–2100 Hz) the bin merging leaves 105 bands.
pub fn build_log_filterbank<T: Scalar>(
    sample_rate: u32,
    frame_size: usize,
    bands_per_octave: u32,
    fmin: f64,
    fmax: f64,
) -> Result<Filterbank<T>> {
    if !(fmin > 0.0 && fmin < fmax && fmax < sample_rate as f64 / 2.0) {
        return Err(Error::InvalidParam(format!(
            "need 0 < fmin < fmax < nyquist, got fmin={fmin}, fmax={fmax}, rate={sample_rate}"
        )));
    }
    if bands_per_octave == 0 || frame_size < 2 {
        return Err(Error::InvalidParam("bands_per_octave and frame_size must be positive".into()));
    }

    let num_bins = frame_size / 2 + 1;
    let bin_width = sample_rate as f64 / frame_size as f64;

    // geometric grid of target centres within [fmin, fmax]
    let mut targets = Vec::new();
    for k in 0.. {
        let f = fmin * 2f64.powf(k as f64 / bands_per_octave as f64);
        if f > fmax {
            break;
        }
        targets.push(f);
    }

    // snap to the nearest FFT bin and merge duplicates
    let mut bins: Vec<usize> = targets
        .iter()
        .map(|&f| ((f / bin_width).round() as usize).min(num_bins - 1))
        .collect();
    bins.dedup();

    if bins.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "degenerate filterbank: only {} distinct bins between {fmin} and {fmax} Hz",
            bins.len()
        )));
    }

    let num_bands = bins.len() - 2;
    let mut weights = Tensor::zeros(&[num_bands, num_bins]);
    let mut centers_hz = Vec::with_capacity(num_bands);
    for band in 0..num_bands {
        let (start, center, stop) = (bins[band], bins[band + 1], bins[band + 2]);
        let row = weights.row_mut(band);
        // rising edge up to (but excluding) the peak
        for (step, bin) in (start..center).enumerate() {
            row[bin] = T::from(step as f64 / (center - start) as f64).unwrap();
        }
        // falling edge including the peak, excluding the stop bin
        for (step, bin) in (center..stop).enumerate() {
            row[bin] = T::from(1.0 - step as f64 / (stop - center) as f64).unwrap();
        }
        let sum: T = row.iter().copied().sum();
        for v in row.iter_mut() {
            *v = *v / sum;
        }
        centers_hz.push(center as f64 * bin_width);
    }

    Ok(Filterbank { weights, centers_hz })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_bank() -> Filterbank<f64> {
        build_log_filterbank(44100, 8192, 24, 65.0, 2100.0).unwrap()
    }

    #[test]
    fn default_parameters_yield_105_bands() {
        assert_eq!(default_bank().num_bands(), 105);
    }

    #[test]
    fn rows_are_area_normalised() {
        let fb = default_bank();
        for band in 0..fb.num_bands() {
            let sum: f64 = fb.weights().row(band).iter().sum();
            assert!((sum - 1.0).abs() < 1e-9, "band {band} sums to {sum}");
        }
    }

    #[test]
    fn centers_are_increasing_and_in_range() {
        let fb = default_bank();
        let centers = fb.band_center_frequencies();
        assert!(centers.windows(2).all(|w| w[0] < w[1]));
        assert!(centers[0] >= 65.0 && *centers.last().unwrap() <= 2100.0);
    }

    #[test]
    fn rows_are_unimodal_and_nonnegative() {
        let fb = default_bank();
        for band in 0..fb.num_bands() {
            let row = fb.weights().row(band);
            assert!(row.iter().all(|&v| v >= 0.0));
            let peak = row.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
            // nondecreasing up to the peak, nonincreasing after
            assert!(row[..=peak].windows(2).all(|w| w[0] <= w[1]));
            assert!(row[peak..].windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn degenerate_range_is_rejected() {
        assert!(build_log_filterbank::<f64>(44100, 64, 24, 65.0, 80.0).is_err());
        assert!(build_log_filterbank::<f64>(44100, 8192, 24, 2100.0, 65.0).is_err());
        assert!(build_log_filterbank::<f64>(44100, 8192, 24, 65.0, 44100.0).is_err());
    }
}
