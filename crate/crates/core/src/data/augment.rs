//! Training-time pitch augmentation on the log-frequency axis.
//!
//! Both operations exploit the 2-bands-per-semitone grid of the spectrogram:
//! whole-semitone shifts move rows by two positions and transpose the label,
//! sub-semitone detuning resamples rows by linear interpolation and keeps
//! the label. Vacated rows are zero-filled (silence after `log(1+0)`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::ContextWindow;
use crate::scalar::Scalar;

use super::label::ChordLabel;

/// Spectrogram rows per semitone for the 24-bands-per-octave filterbank.
pub const BANDS_PER_SEMITONE: usize = 2;

/// Which augmentations a minibatch stream applies; each sample draws its own
/// shift distances.
#[derive(Debug, Clone, Copy)]
pub struct AugmentPolicy {
    pub semitone_shift: bool,
    pub detune: bool,
    /// Maximum whole-semitone shift magnitude.
    pub max_semitones: i32,
    /// Maximum detuning magnitude in fractions of a semitone.
    pub max_detune: f64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            semitone_shift: true,
            detune: true,
            max_semitones: 4,
            max_detune: 0.4,
        }
    }
}

impl AugmentPolicy {
    pub fn disabled() -> Self {
        AugmentPolicy {
            semitone_shift: false,
            detune: false,
            ..AugmentPolicy::default()
        }
    }

    pub(crate) fn is_active(&self) -> bool {
        self.semitone_shift || self.detune
    }

    /// Draws (semitone shift, detune fraction) for one sample.
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng) -> (i32, f64) {
        let k = if self.semitone_shift {
            rng.gen_range(-self.max_semitones..=self.max_semitones)
        } else {
            0
        };
        let delta = if self.detune {
            rng.gen_range(-self.max_detune..=self.max_detune)
        } else {
            0.0
        };
        (k, delta)
    }
}

/// Shifts a window by `k` whole semitones (`|k| ≤ 4`) and transposes the
/// label accordingly; no-chord is unchanged.
pub fn semitone_shift<T: Scalar>(window: &ContextWindow<T>, label: ChordLabel, k: i32) -> (ContextWindow<T>, ChordLabel) {
    assert!(k.abs() <= 4, "semitone shift limited to ±4");
    let mut out = window.clone();
    let (bands, cols) = (window.values.shape()[0], window.values.shape()[1]);
    shift_rows(out.values.data_mut(), bands, cols, k * BANDS_PER_SEMITONE as i32);
    (out, label.transposed(k))
}

/// Detunes a window by `delta` of a semitone (`|delta| ≤ 0.4`); the label is
/// unchanged by construction.
pub fn detune_shift<T: Scalar>(window: &ContextWindow<T>, delta: f64) -> ContextWindow<T> {
    assert!(delta.abs() <= 0.4 + 1e-12, "detune limited to ±0.4 semitones");
    let mut out = window.clone();
    let (bands, cols) = (window.values.shape()[0], window.values.shape()[1]);
    let mut scratch = vec![T::zero(); bands * cols];
    detune_rows(
        out.values.data_mut(),
        bands,
        cols,
        delta * BANDS_PER_SEMITONE as f64,
        &mut scratch,
    );
    out
}

/// In-place integer row shift of a `[bands, cols]` buffer; positive moves
/// content toward higher band indices, vacated rows are zeroed.
pub(crate) fn shift_rows<T: Scalar>(values: &mut [T], bands: usize, cols: usize, row_shift: i32) {
    if row_shift == 0 {
        return;
    }
    let magnitude = row_shift.unsigned_abs() as usize;
    if magnitude >= bands {
        values.fill(T::zero());
        return;
    }
    if row_shift > 0 {
        for r in (magnitude..bands).rev() {
            let (src, dst) = (r - magnitude, r);
            let (lo, hi) = values.split_at_mut(dst * cols);
            hi[..cols].copy_from_slice(&lo[src * cols..src * cols + cols]);
        }
        values[..magnitude * cols].fill(T::zero());
    } else {
        for r in 0..bands - magnitude {
            let src = r + magnitude;
            let (lo, hi) = values.split_at_mut(src * cols);
            lo[r * cols..r * cols + cols].copy_from_slice(&hi[..cols]);
        }
        values[(bands - magnitude) * cols..].fill(T::zero());
    }
}

/// In-place fractional row shift by linear interpolation; out-of-range
/// source rows read as zero.
pub(crate) fn detune_rows<T: Scalar>(values: &mut [T], bands: usize, cols: usize, band_shift: f64, scratch: &mut [T]) {
    if band_shift == 0.0 {
        return;
    }
    debug_assert_eq!(scratch.len(), values.len());
    scratch.copy_from_slice(values);
    for r in 0..bands {
        let src_pos = r as f64 - band_shift;
        let floor = src_pos.floor();
        let w = T::from(src_pos - floor).unwrap();
        let lo = floor as isize;
        let row = &mut values[r * cols..(r + 1) * cols];
        for (c, v) in row.iter_mut().enumerate() {
            let a = if lo >= 0 && (lo as usize) < bands {
                scratch[lo as usize * cols + c]
            } else {
                T::zero()
            };
            let b = if lo + 1 >= 0 && ((lo + 1) as usize) < bands {
                scratch[(lo + 1) as usize * cols + c]
            } else {
                T::zero()
            };
            *v = (T::one() - w) * a + w * b;
        }
    }
}
