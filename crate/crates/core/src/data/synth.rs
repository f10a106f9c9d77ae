//! Synthetic training corpus: random triad progressions rendered as harmonic
//! tones plus noise, with exact annotations.
//!
//! The real corpora used for full-scale evaluation are copyrighted audio; the
//! generator below produces desk-scale songs with the same annotation format
//! so the whole pipeline can be trained and evaluated end to end.

use std::f64::consts::TAU;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::AudioBuffer;
use crate::scalar::Scalar;

use super::lab::{AnnotationTrack, Segment};
use super::label::ChordLabel;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_songs: usize,
    pub seed: u64,
    pub sample_rate: u32,
    /// Approximate song length; the last segment is clipped to it.
    pub song_secs: f64,
    pub min_segment_secs: f64,
    pub max_segment_secs: f64,
    /// White-noise amplitude range; one level is drawn per song.
    pub noise_range: (f64, f64),
    /// Probability that a segment is a no-chord (noise-only) span.
    pub no_chord_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_songs: 40,
            seed: 1,
            sample_rate: 44100,
            song_secs: 8.0,
            min_segment_secs: 1.0,
            max_segment_secs: 2.2,
            noise_range: (0.02, 0.08),
            no_chord_prob: 0.12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthSong<T> {
    pub id: String,
    pub audio: AudioBuffer<T>,
    pub annotations: AnnotationTrack,
    /// Noise amplitude used for this song.
    pub noise_level: f64,
}

/// Generates `config.num_songs` songs; a fixed seed gives an identical
/// corpus.
pub fn synth_corpus<T: Scalar>(config: &SynthConfig) -> Vec<SynthSong<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.num_songs)
        .map(|idx| synth_song(config, format!("song_{idx:03}"), &mut rng))
        .collect()
}

/// Draws a chord progression and renders it; restricted vocabularies are
/// supported for small capacity tests.
pub fn synth_song_with_vocab<T: Scalar>(
    config: &SynthConfig,
    id: String,
    vocab: &[ChordLabel],
    rng: &mut ChaCha8Rng,
) -> SynthSong<T> {
    let rate = config.sample_rate as f64;
    let total = (config.song_secs * rate) as usize;
    let noise_level = rng.gen_range(config.noise_range.0..=config.noise_range.1);

    // progression: consecutive segments always change chord
    let mut segments = Vec::new();
    let mut t = 0.0f64;
    let mut prev: Option<ChordLabel> = None;
    while t < config.song_secs {
        let dur = rng.gen_range(config.min_segment_secs..=config.max_segment_secs);
        let end = (t + dur).min(config.song_secs);
        let label = loop {
            let candidate = if vocab.is_empty() {
                if rng.gen::<f64>() < config.no_chord_prob {
                    ChordLabel::NO_CHORD
                } else {
                    let root = rng.gen_range(0u8..12);
                    if rng.gen::<f64>() < 0.5 {
                        ChordLabel::major(root)
                    } else {
                        ChordLabel::minor(root)
                    }
                }
            } else {
                vocab[rng.gen_range(0..vocab.len())]
            };
            if Some(candidate) != prev || vocab.len() == 1 {
                break candidate;
            }
        };
        prev = Some(label);
        segments.push(Segment {
            start: t,
            end,
            raw_label: label.to_string(),
        });
        t = end;
    }

    // render
    let mut samples = vec![0.0f64; total];
    for seg in &segments {
        let label = super::label::reduce_label(&seg.raw_label).unwrap();
        let (s0, s1) = ((seg.start * rate) as usize, ((seg.end * rate) as usize).min(total));
        if let Some(root) = label.root() {
            let third = if label.is_major() { 4 } else { 3 };
            let pitch_classes = [root, (root + third) % 12, (root + 7) % 12];
            let mut tones = Vec::new();
            for &pc in &pitch_classes {
                for octave in [3i32, 4] {
                    let freq = 440.0 * 2f64.powf((pc as f64 - 9.0) / 12.0 + (octave - 4) as f64);
                    let gain = rng.gen_range(0.7..1.0);
                    let phase = rng.gen_range(0.0..TAU);
                    tones.push((freq, gain, phase));
                }
            }
            let attack = (0.01 * rate) as usize;
            for (offset, sample) in samples[s0..s1].iter_mut().enumerate() {
                let time = offset as f64 / rate;
                let mut v = 0.0;
                for &(freq, gain, phase) in &tones {
                    // a few decaying harmonics per tone
                    for harmonic in 1..=4 {
                        v += gain / (harmonic * harmonic) as f64 * (TAU * freq * harmonic as f64 * time + phase).sin();
                    }
                }
                // short fade-in/out to soften segment boundaries
                let ramp_in = ((offset + 1) as f64 / attack as f64).min(1.0);
                let ramp_out = ((s1 - s0 - offset) as f64 / attack as f64).min(1.0);
                *sample += v * 0.05 * ramp_in * ramp_out;
            }
        }
        for sample in &mut samples[s0..s1] {
            *sample += noise_level * rng.gen_range(-1.0..1.0);
        }
    }

    // normalise to a fixed headroom
    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-9);
    let norm = 0.8 / peak;
    let samples: Vec<T> = samples.into_iter().map(|v| T::from(v * norm).unwrap()).collect();

    SynthSong {
        id,
        audio: AudioBuffer::new(samples, config.sample_rate),
        annotations: AnnotationTrack::new(segments).expect("generated segments are valid"),
        noise_level,
    }
}

fn synth_song<T: Scalar>(config: &SynthConfig, id: String, rng: &mut ChaCha8Rng) -> SynthSong<T> {
    synth_song_with_vocab(config, id, &[], rng)
}
