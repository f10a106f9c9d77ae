//! Labeled data handling: the chord alphabet, annotation files, frame
//! targets, pitch augmentation, minibatch assembly and the synthetic demo
//! corpus.

pub mod augment;
pub mod lab;
pub mod label;
pub mod synth;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{copy_context_window, log_filtered_spectrogram, AudioBuffer, Filterbank, FrameParams, Spectrogram};
use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::Result;

pub use augment::{detune_shift, semitone_shift, AugmentPolicy};
pub use lab::{frames_from_annotations, parse_lab, parse_lab_str, write_lab, AnnotationTrack, Segment};
pub use label::{reduce_label, reduce_label_checked, ChordLabel, Reduction, NUM_CLASSES};

/// One song's spectrogram with frame-aligned chord targets.
#[derive(Debug, Clone)]
pub struct SongFrames<T> {
    pub id: String,
    pub spectrogram: Spectrogram<T>,
    pub labels: Vec<ChordLabel>,
}

impl<T: Scalar> SongFrames<T> {
    pub fn new(id: String, spectrogram: Spectrogram<T>, labels: Vec<ChordLabel>) -> Result<Self> {
        if labels.len() != spectrogram.num_frames() {
            return Err(Error::ShapeMismatch {
                context: "frame labels per song",
                expected: vec![spectrogram.num_frames()],
                actual: vec![labels.len()],
            });
        }
        Ok(SongFrames {
            id,
            spectrogram,
            labels,
        })
    }
}

/// Front-end + annotation alignment for one song: spectrogram plus
/// frame-level chord targets.
pub fn song_frames_from_audio<T: Scalar>(
    id: String,
    audio: &AudioBuffer<T>,
    annotations: &AnnotationTrack,
    params: &FrameParams,
    filterbank: &Filterbank<T>,
) -> Result<SongFrames<T>> {
    let spectrogram = log_filtered_spectrogram(audio, params, filterbank)?;
    let labels = frames_from_annotations(annotations, spectrogram.frame_rate(), spectrogram.num_frames())?;
    SongFrames::new(id, spectrogram, labels)
}

/// Index of one training sample inside a [`FrameDataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRef {
    pub song: u32,
    pub frame: u32,
}

/// A set of songs plus the context size used to form classifier inputs.
#[derive(Debug, Clone)]
pub struct FrameDataset<T> {
    songs: Vec<SongFrames<T>>,
    context: usize,
}

impl<T: Scalar> FrameDataset<T> {
    pub fn new(songs: Vec<SongFrames<T>>, context: usize) -> Self {
        FrameDataset { songs, context }
    }

    pub fn songs(&self) -> &[SongFrames<T>] {
        &self.songs
    }

    pub fn context(&self) -> usize {
        self.context
    }

    pub fn window_shape(&self) -> (usize, usize) {
        let bands = self.songs.first().map_or(0, |s| s.spectrogram.num_bands());
        (bands, 2 * self.context + 1)
    }

    /// Total frame count over all songs.
    pub fn num_frames(&self) -> usize {
        self.songs.iter().map(|s| s.spectrogram.num_frames()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_frames() == 0
    }

    /// Sample references for every `stride`-th frame of every song.
    pub fn sample_refs(&self, stride: usize) -> Vec<SampleRef> {
        let stride = stride.max(1);
        let mut refs = Vec::new();
        for (song, frames) in self.songs.iter().enumerate() {
            for frame in (0..frames.spectrogram.num_frames()).step_by(stride) {
                refs.push(SampleRef {
                    song: song as u32,
                    frame: frame as u32,
                });
            }
        }
        refs
    }

    pub fn label(&self, sample: SampleRef) -> ChordLabel {
        self.songs[sample.song as usize].labels[sample.frame as usize]
    }

    /// Writes the `[bands, 2C+1]` context window for `sample` into `out`.
    pub fn copy_window(&self, sample: SampleRef, out: &mut [T]) {
        let song = &self.songs[sample.song as usize];
        copy_context_window(&song.spectrogram, sample.frame as usize, self.context, out);
    }

    /// Splits off roughly `fraction` of the songs (at least one, at most all
    /// but one) as a validation set. The split is by song, never by frame.
    pub fn split_validation(mut self, fraction: f64, seed: u64) -> (FrameDataset<T>, FrameDataset<T>) {
        assert!(self.songs.len() >= 2, "validation split needs at least two songs");
        let mut order: Vec<usize> = (0..self.songs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let take = ((self.songs.len() as f64 * fraction).round() as usize).clamp(1, self.songs.len() - 1);
        let val_idx: Vec<usize> = order[..take].to_vec();
        let mut val_songs = Vec::with_capacity(take);
        let mut train_songs = Vec::with_capacity(self.songs.len() - take);
        for (idx, song) in self.songs.drain(..).enumerate() {
            if val_idx.contains(&idx) {
                val_songs.push(song);
            } else {
                train_songs.push(song);
            }
        }
        (
            FrameDataset::new(train_songs, self.context),
            FrameDataset::new(val_songs, self.context),
        )
    }
}

/// One assembled minibatch.
#[derive(Debug)]
pub struct Minibatch<T> {
    /// `[n, 1, bands, 2C+1]`
    pub inputs: Tensor<T>,
    /// `[n, classes]` one-hot targets.
    pub targets: Tensor<T>,
}

/// Epoch iterator over shuffled, augmented minibatches. A fixed seed gives a
/// bit-identical batch stream.
pub struct MinibatchStream<'a, T> {
    dataset: &'a FrameDataset<T>,
    order: Vec<SampleRef>,
    batch_size: usize,
    policy: AugmentPolicy,
    rng: ChaCha8Rng,
    pos: usize,
    scratch: Vec<T>,
}

impl<'a, T: Scalar> MinibatchStream<'a, T> {
    pub fn new(
        dataset: &'a FrameDataset<T>,
        samples: Vec<SampleRef>,
        batch_size: usize,
        policy: AugmentPolicy,
        seed: u64,
    ) -> Self {
        assert!(batch_size > 0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = samples;
        order.shuffle(&mut rng);
        let (bands, cols) = dataset.window_shape();
        MinibatchStream {
            dataset,
            order,
            batch_size,
            policy,
            rng,
            pos: 0,
            scratch: vec![T::zero(); bands * cols],
        }
    }

    pub fn num_batches(&self) -> usize {
        self.order.len().div_ceil(self.batch_size)
    }
}

impl<T: Scalar> Iterator for MinibatchStream<'_, T> {
    type Item = Minibatch<T>;

    fn next(&mut self) -> Option<Minibatch<T>> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let refs = &self.order[self.pos..end];
        let n = refs.len();
        let (bands, cols) = self.dataset.window_shape();
        let window = bands * cols;

        let mut inputs = Tensor::zeros(&[n, 1, bands, cols]);
        let mut targets = Tensor::zeros(&[n, NUM_CLASSES]);
        for (slot, &sample) in refs.iter().enumerate() {
            let buf = &mut inputs.data_mut()[slot * window..(slot + 1) * window];
            self.dataset.copy_window(sample, buf);
            let mut label = self.dataset.label(sample);
            if self.policy.is_active() {
                let (k, delta) = self.policy.draw(&mut self.rng);
                if k != 0 {
                    augment::shift_rows(buf, bands, cols, k * augment::BANDS_PER_SEMITONE as i32);
                    label = label.transposed(k);
                }
                if delta != 0.0 {
                    augment::detune_rows(buf, bands, cols, delta * augment::BANDS_PER_SEMITONE as f64, &mut self.scratch);
                }
            }
            targets.data_mut()[slot * NUM_CLASSES + label.index()] = T::one();
        }
        self.pos = end;
        Some(Minibatch { inputs, targets })
    }
}

#[cfg(test)]
mod tests {
    use crate::dsp::Spectrogram;

    use super::*;

    fn toy_dataset() -> FrameDataset<f64> {
        let songs = (0..3)
            .map(|s| {
                let frames = 20 + s * 5;
                let data: Vec<f64> = (0..frames * 4).map(|v| (v % 7) as f64).collect();
                let spec = Spectrogram::new(Tensor::from_vec(&[frames, 4], data), 10.0);
                let labels = (0..frames).map(|f| ChordLabel::from_index((f + s) % 25).unwrap()).collect();
                SongFrames::new(format!("song{s}"), spec, labels).unwrap()
            })
            .collect();
        FrameDataset::new(songs, 2)
    }

    #[test]
    fn sample_refs_respect_stride() {
        let ds = toy_dataset();
        assert_eq!(ds.num_frames(), 75);
        assert_eq!(ds.sample_refs(1).len(), 75);
        assert_eq!(ds.sample_refs(2).len(), 10 + 13 + 15);
    }

    #[test]
    fn fixed_seed_gives_identical_batch_streams() {
        let ds = toy_dataset();
        let a: Vec<_> = MinibatchStream::new(&ds, ds.sample_refs(1), 16, AugmentPolicy::default(), 7).collect();
        let b: Vec<_> = MinibatchStream::new(&ds, ds.sample_refs(1), 16, AugmentPolicy::default(), 7).collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.inputs.data(), y.inputs.data());
            assert_eq!(x.targets.data(), y.targets.data());
        }
        let c: Vec<_> = MinibatchStream::new(&ds, ds.sample_refs(1), 16, AugmentPolicy::default(), 8).collect();
        assert!(a.iter().zip(&c).any(|(x, y)| x.inputs.data() != y.inputs.data()));
    }

    #[test]
    fn disabled_policy_passes_raw_frames_with_raw_labels() {
        let ds = toy_dataset();
        let batches: Vec<_> = MinibatchStream::new(&ds, ds.sample_refs(1), 75, AugmentPolicy::disabled(), 3).collect();
        assert_eq!(batches.len(), 1);
        let batch = &batches[0];
        // every target row is a valid one-hot vector
        for row in 0..75 {
            let row = batch.targets.row(row);
            assert_eq!(row.iter().filter(|&&v| v == 1.0).count(), 1);
            assert_eq!(row.iter().filter(|&&v| v == 0.0).count(), 24);
        }
    }

    #[test]
    fn split_by_song_keeps_every_song_whole() {
        let ds = toy_dataset();
        let (train, val) = ds.split_validation(0.34, 5);
        assert_eq!(train.songs().len(), 2);
        assert_eq!(val.songs().len(), 1);
        let mut ids: Vec<&str> = train.songs().iter().chain(val.songs()).map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        assert_eq!(ids, ["song0", "song1", "song2"]);
    }

    #[test]
    fn label_histogram_under_shifts_matches_transposition_mixture() {
        // single-song dataset with a known label histogram over majors
        let frames = 4800usize;
        let data: Vec<f64> = vec![0.0; frames * 4];
        let spec = Spectrogram::new(Tensor::from_vec(&[frames, 4], data), 10.0);
        let labels: Vec<ChordLabel> = (0..frames).map(|f| ChordLabel::major((f % 3) as u8)).collect();
        let song = SongFrames::new("s".into(), spec, labels.clone()).unwrap();
        let ds = FrameDataset::new(vec![song], 2);

        let policy = AugmentPolicy {
            semitone_shift: true,
            detune: false,
            ..AugmentPolicy::default()
        };
        let mut observed = [0usize; 25];
        for batch in MinibatchStream::new(&ds, ds.sample_refs(1), 256, policy, 11) {
            for row in 0..batch.targets.shape()[0] {
                let idx = batch.targets.row(row).iter().position(|&v| v == 1.0).unwrap();
                observed[idx] += 1;
            }
        }
        // expectation: raw histogram (1/3 on each of C, C#, D) convolved with
        // the uniform shift over [-4, 4]
        let raw = |pc: usize| if pc < 3 { frames as f64 / 3.0 } else { 0.0 };
        for pc in 0..12 {
            let expected: f64 = (-4i32..=4).map(|k| raw(((pc as i32 - k).rem_euclid(12)) as usize) / 9.0).sum();
            let got = observed[pc] as f64;
            // three-sigma binomial tolerance around the expected count
            let p = expected / frames as f64;
            let sigma = (frames as f64 * p * (1.0 - p)).sqrt().max(1.0);
            assert!(
                (got - expected).abs() < 3.5 * sigma,
                "class {pc}: observed {got}, expected {expected} ± {sigma}"
            );
        }
        assert_eq!(observed[12..].iter().sum::<usize>(), 0);
    }
}
