//! WAV decoding and sample-rate conversion.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::Error;
use crate::scalar::Scalar;
use crate::Result;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample rate must be positive");
        AudioBuffer { samples, sample_rate }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Windowed-sinc resampling to `target_rate`; duration is preserved to
    /// within one sample. Returns a clone when the rate already matches.
    pub fn resampled(&self, target_rate: u32) -> AudioBuffer<T> {
        assert!(target_rate > 0, "target rate must be positive");
        if target_rate == self.sample_rate {
            return self.clone();
        }
        let src = self.sample_rate as f64;
        let dst = target_rate as f64;
        let out_len = ((self.samples.len() as f64) * dst / src).round() as usize;
        // Low-pass at the smaller Nyquist frequency when downsampling.
        let cutoff = (dst / src).min(1.0);
        const HALF_TAPS: isize = 32;
        let mut out = Vec::with_capacity(out_len);
        for n in 0..out_len {
            let center = n as f64 * src / dst;
            let k0 = center.floor() as isize - HALF_TAPS + 1;
            let mut acc = 0.0f64;
            for k in k0..k0 + 2 * HALF_TAPS {
                if k < 0 || k as usize >= self.samples.len() {
                    continue;
                }
                let x = center - k as f64;
                acc += self.samples[k as usize].to_f64().unwrap() * sinc_window(x, cutoff, HALF_TAPS as f64);
            }
            out.push(T::from(acc).unwrap());
        }
        AudioBuffer::new(out, target_rate)
    }
}

/// `cutoff·sinc(cutoff·x)` under a Hann window of half-width `half`.
fn sinc_window(x: f64, cutoff: f64, half: f64) -> f64 {
    if x.abs() >= half {
        return 0.0;
    }
    let sinc = if x.abs() < 1e-12 {
        1.0
    } else {
        let px = PI * cutoff * x;
        px.sin() / px
    };
    let window = 0.5 * (1.0 + (PI * x / half).cos());
    cutoff * sinc * window
}

/// Decodes a RIFF/PCM ("WAV") file into a mono buffer.
///
/// Integer samples are normalised by the type's full scale; multi-channel
/// input is downmixed by the channel mean; the signal is resampled when the
/// source rate differs from `target_rate`.
pub fn decode_audio<T: Scalar>(path: &Path, target_rate: u32) -> Result<AudioBuffer<T>> {
    let display = path.display().to_string();
    let mut reader = hound::WavReader::open(path).map_err(|e| Error::AudioDecode {
        path: display.clone(),
        reason: e.to_string(),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::AudioDecode {
            path: display,
            reason: "zero channels".into(),
        });
    }

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, bits @ (16 | 24 | 32)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::AudioDecode {
                    path: display.clone(),
                    reason: e.to_string(),
                })?
        }
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::AudioDecode {
                path: display.clone(),
                reason: e.to_string(),
            })?,
        (format, bits) => {
            return Err(Error::AudioDecode {
                path: display,
                reason: format!("unsupported encoding: {bits}-bit {format:?}"),
            })
        }
    };

    let frames = interleaved.len() / channels;
    let mut mono = Vec::with_capacity(frames);
    for frame in interleaved.chunks_exact(channels) {
        let mean = frame.iter().sum::<f64>() / channels as f64;
        mono.push(T::from(mean).unwrap());
    }

    let buffer = AudioBuffer::new(mono, spec.sample_rate);
    Ok(if spec.sample_rate == target_rate {
        buffer
    } else {
        buffer.resampled(target_rate)
    })
}

/// Writes a mono buffer as 16-bit PCM.
pub fn write_wav<T: Scalar>(path: &Path, audio: &AudioBuffer<T>) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: audio.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| Error::AudioDecode {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    for &s in audio.samples() {
        let v = (s.to_f64().unwrap().clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| Error::AudioDecode {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
    }
    writer.finalize().map_err(|e| Error::AudioDecode {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> Vec<f64> {
        let n = (rate as f64 * secs) as usize;
        (0..n).map(|i| amp * (TAU * freq * i as f64 / rate as f64).sin()).collect()
    }

    fn write_i16(path: &Path, rate: u32, channels: &[Vec<i16>]) {
        let spec = hound::WavSpec {
            channels: channels.len() as u16,
            sample_rate: rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for i in 0..channels[0].len() {
            for ch in channels {
                w.write_sample(ch[i]).unwrap();
            }
        }
        w.finalize().unwrap();
    }

    #[test]
    fn sixteen_bit_sine_decodes_with_expected_peak() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sine.wav");
        let amp = 12000i16;
        let samples: Vec<i16> = sine(440.0, 44100, 1.0, 1.0).iter().map(|v| (v * amp as f64) as i16).collect();
        write_i16(&path, 44100, &[samples]);
        let audio: AudioBuffer<f64> = decode_audio(&path, 44100).unwrap();
        assert_eq!(audio.len(), 44100);
        assert_eq!(audio.sample_rate(), 44100);
        let peak = audio.samples().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((peak - amp as f64 / 32768.0).abs() < 1e-3, "peak {peak}");
    }

    #[test]
    fn opposite_stereo_channels_cancel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let left: Vec<i16> = sine(220.0, 22050, 0.2, 0.8).iter().map(|v| (v * 20000.0) as i16).collect();
        let right: Vec<i16> = left.iter().map(|v| -v).collect();
        write_i16(&path, 22050, &[left, right]);
        let audio: AudioBuffer<f64> = decode_audio(&path, 22050).unwrap();
        assert!(audio.samples().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn resampling_preserves_duration_and_tone() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("low.wav");
        let samples: Vec<i16> = sine(440.0, 22050, 1.0, 0.5).iter().map(|v| (v * 32767.0) as i16).collect();
        write_i16(&path, 22050, &[samples]);
        let audio: AudioBuffer<f64> = decode_audio(&path, 44100).unwrap();
        assert_eq!(audio.sample_rate(), 44100);
        assert_eq!(audio.len(), 44100);

        // Resampling oracle: the dominant DFT bin of a windowed slice must
        // still be at 440 Hz.
        let n = 8192;
        let slice = &audio.samples()[10000..10000 + n];
        let mut best = (0usize, 0.0f64);
        for bin in 1..n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &s) in slice.iter().enumerate() {
                let ph = TAU * bin as f64 * i as f64 / n as f64;
                re += s * ph.cos();
                im -= s * ph.sin();
            }
            let mag = re * re + im * im;
            if mag > best.1 {
                best = (bin, mag);
            }
        }
        let freq = best.0 as f64 * 44100.0 / n as f64;
        assert!((freq - 440.0).abs() < 6.0, "dominant frequency {freq}");
    }

    #[test]
    fn unreadable_file_is_an_explicit_error() {
        let err = decode_audio::<f32>(Path::new("/nonexistent/file.wav"), 44100).unwrap_err();
        assert!(matches!(err, Error::AudioDecode { .. }));
    }
}
