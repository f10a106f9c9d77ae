//! The convolutional acoustic model: a fully convolutional classifier over
//! 105×15 spectrogram context windows with a global-average-pooled 25-class
//! head, plus the 128-dimensional hidden features it exposes to the CRF
//! decoder.

mod train;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::container;
use crate::data::label::NUM_CLASSES;
use crate::error::Error;
use crate::nn::{self, ops, Conv2d, Layer, LayerCache, LayerSpec, Tensor};
use crate::scalar::Scalar;
use crate::Result;

pub use train::{evaluate_frame_accuracy, predict_song_frames, train_auditory, EpochRecord, TrainConfig, TrainLog};

/// Default input geometry: 105 bands × 15 context frames.
pub const INPUT_BANDS: usize = 105;
pub const INPUT_FRAMES: usize = 15;
/// Width of the hidden feature vector handed to the CRF.
pub const FEATURE_DIM: usize = 128;

/// Layer stack of the standard architecture: four padded 3×3 blocks into a
/// 2×1 max pool, two unpadded 3×3 blocks into a second pool, a 12×9 block
/// computing 128 maps, and a linear 1×1 classification layer with global
/// average pooling and softmax. Dropout follows both pools and the 128-map
/// block.
pub fn standard_layers() -> Vec<LayerSpec> {
    let conv = |channels, kernel, padded| LayerSpec::Conv {
        channels,
        kernel,
        padded,
        bias: false,
    };
    let mut specs = Vec::new();
    for _ in 0..4 {
        specs.push(conv(32, (3, 3), true));
        specs.push(LayerSpec::BatchNorm);
        specs.push(LayerSpec::Rectify);
    }
    specs.push(LayerSpec::MaxPool { pool: (2, 1) });
    specs.push(LayerSpec::Dropout { p: 0.5 });
    for _ in 0..2 {
        specs.push(conv(64, (3, 3), false));
        specs.push(LayerSpec::BatchNorm);
        specs.push(LayerSpec::Rectify);
    }
    specs.push(LayerSpec::MaxPool { pool: (2, 1) });
    specs.push(LayerSpec::Dropout { p: 0.5 });
    specs.push(conv(FEATURE_DIM, (12, 9), false));
    specs.push(LayerSpec::BatchNorm);
    specs.push(LayerSpec::Rectify);
    specs.push(LayerSpec::Dropout { p: 0.5 });
    // linear classification layer: bias, no batch norm, no rectifier
    specs.push(LayerSpec::Conv {
        channels: NUM_CLASSES,
        kernel: (1, 1),
        padded: false,
        bias: true,
    });
    specs.push(LayerSpec::GlobalAvgPool);
    specs.push(LayerSpec::Softmax);
    specs
}

/// A built network: ordered layers with allocated parameters.
#[derive(Debug, Clone)]
pub struct ChordNet<T> {
    specs: Vec<LayerSpec>,
    layers: Vec<Layer<T>>,
    input_hw: (usize, usize),
    /// Index of the rectifier whose output is the hidden feature tensor
    /// (the last rectifier, after the 128-map block's batch norm).
    feature_layer: usize,
}

impl<T: Scalar> ChordNet<T> {
    /// Builds the standard 105×15 → 25-class network; equal seeds give
    /// identical parameters.
    pub fn standard(seed: u64) -> Self {
        ChordNet::build(&standard_layers(), (INPUT_BANDS, INPUT_FRAMES), seed)
    }

    /// Builds a network from a layer list. The input channel count of each
    /// convolution is inferred by tracing shapes from a 1×h×w input; kernels
    /// use scaled uniform fan-in/fan-out initialisation.
    pub fn build(specs: &[LayerSpec], input_hw: (usize, usize), seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut c, mut h, mut w) = (1usize, input_hw.0, input_hw.1);
        let mut layers = Vec::with_capacity(specs.len());
        let mut feature_layer = None;
        for (idx, spec) in specs.iter().enumerate() {
            let layer = match *spec {
                LayerSpec::Conv {
                    channels,
                    kernel,
                    padded,
                    bias,
                } => {
                    let (kh, kw) = kernel;
                    let fan_in = c * kh * kw;
                    let fan_out = channels * kh * kw;
                    let kernels = nn::init::glorot_uniform(&[channels, c, kh, kw], fan_in, fan_out, &mut rng);
                    let bias = bias.then(|| Tensor::zeros(&[channels]));
                    let conv = Conv2d::new(kernels, bias, padded);
                    let (oh, ow) = conv.out_hw(h, w);
                    c = channels;
                    h = oh;
                    w = ow;
                    Layer::Conv(conv)
                }
                LayerSpec::BatchNorm => Layer::BatchNorm(nn::BatchNorm::new(c)),
                LayerSpec::Rectify => {
                    feature_layer = Some(idx);
                    Layer::Rectify
                }
                LayerSpec::MaxPool { pool } => {
                    let mp = nn::MaxPool {
                        pool_h: pool.0,
                        pool_w: pool.1,
                    };
                    let (oh, ow) = mp.out_hw(h, w);
                    h = oh;
                    w = ow;
                    Layer::MaxPool(mp)
                }
                LayerSpec::Dropout { p } => Layer::Dropout(nn::Dropout { p }),
                LayerSpec::GlobalAvgPool => Layer::GlobalAvgPool,
                LayerSpec::Softmax => Layer::Softmax,
            };
            layers.push(layer);
        }
        ChordNet {
            specs: specs.to_vec(),
            layers,
            input_hw,
            feature_layer: feature_layer.expect("network needs at least one rectifier"),
        }
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn input_hw(&self) -> (usize, usize) {
        self.input_hw
    }

    pub fn num_classes(&self) -> usize {
        match self.specs.iter().rev().find_map(|s| match s {
            LayerSpec::Conv { channels, .. } => Some(*channels),
            _ => None,
        }) {
            Some(c) => c,
            None => 0,
        }
    }

    /// Shapes after every layer for a single input, input first.
    pub fn shape_trace(&self) -> Vec<Vec<usize>> {
        let (mut c, mut h, mut w) = (1usize, self.input_hw.0, self.input_hw.1);
        let mut shapes = vec![vec![c, h, w]];
        let mut flat = None;
        for layer in &self.layers {
            match layer {
                Layer::Conv(conv) => {
                    let (oh, ow) = conv.out_hw(h, w);
                    c = conv.c_out();
                    h = oh;
                    w = ow;
                }
                Layer::MaxPool(pool) => {
                    let (oh, ow) = pool.out_hw(h, w);
                    h = oh;
                    w = ow;
                }
                Layer::GlobalAvgPool => flat = Some(c),
                _ => {}
            }
            shapes.push(match flat {
                Some(k) => vec![k],
                None => vec![c, h, w],
            });
        }
        shapes
    }

    pub fn trainable_param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.trainable_tensors())
            .map(|t| t.numel())
            .sum()
    }

    fn check_input(&self, batch: &Tensor<T>) -> Result<()> {
        let s = batch.shape();
        if s.len() != 4 || s[1] != 1 || s[2] != self.input_hw.0 || s[3] != self.input_hw.1 {
            return Err(Error::ShapeMismatch {
                context: "network input",
                expected: vec![s.first().copied().unwrap_or(0), 1, self.input_hw.0, self.input_hw.1],
                actual: s.to_vec(),
            });
        }
        Ok(())
    }

    /// Inference-mode forward pass over a `[n, 1, h, w]` batch; returns
    /// `[n, classes]` distributions.
    pub fn forward_infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.forward_infer(x);
        }
        Ok(x)
    }

    /// Class distribution for a single context window (`[h, w]` values).
    pub fn predict_frame(&self, window: &Tensor<T>) -> Result<Vec<T>> {
        let (h, w) = self.input_hw;
        if window.shape() != [h, w] {
            return Err(Error::ShapeMismatch {
                context: "context window",
                expected: vec![h, w],
                actual: window.shape().to_vec(),
            });
        }
        let batch = Tensor::from_vec(&[1, 1, h, w], window.data().to_vec());
        Ok(self.forward_infer(&batch)?.into_data())
    }

    /// Hidden features: the feature-block activations averaged over their
    /// spatial positions, `[n, feature_dim]`.
    pub fn features_infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers[..=self.feature_layer] {
            x = layer.forward_infer(x);
        }
        Ok(ops::global_average_pool(&x))
    }

    /// The classification head as a dense map: weight matrix
    /// `[classes, feature_dim]` and bias, taken from the final 1×1
    /// convolution.
    pub fn head(&self) -> (Tensor<T>, Vec<T>) {
        let conv = self
            .layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Conv(c) => Some(c),
                _ => None,
            })
            .expect("network has a classification convolution");
        let shape = conv.kernels.shape();
        assert_eq!((shape[2], shape[3]), (1, 1), "classification head must be a 1×1 convolution");
        let w = Tensor::from_vec(&[shape[0], shape[1]], conv.kernels.data().to_vec());
        let b = conv
            .bias
            .as_ref()
            .map(|b| b.data().to_vec())
            .unwrap_or_else(|| vec![T::zero(); shape[0]]);
        (w, b)
    }

    /// Training-mode forward pass; caches are consumed by [`Self::backward`].
    pub fn forward_train(&mut self, batch: &Tensor<T>, rng: &mut ChaCha8Rng) -> Result<(Tensor<T>, Vec<LayerCache<T>>)> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (y, cache) = layer.forward_train(x, rng);
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Backpropagates `grad_out` through the cached pass; returns parameter
    /// gradients aligned with [`Self::trainable_params`].
    pub fn backward(&self, caches: &[LayerCache<T>], grad_out: Tensor<T>) -> Vec<Tensor<T>> {
        let mut grad = grad_out;
        let mut per_layer: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(caches).rev() {
            let (grad_in, param_grads) = layer.backward(cache, grad);
            per_layer.push(param_grads);
            grad = grad_in;
        }
        per_layer.reverse();
        per_layer.into_iter().flatten().collect()
    }

    pub fn trainable_params(&self) -> Vec<&Tensor<T>> {
        self.layers.iter().flat_map(|l| l.trainable_tensors()).collect()
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers.iter_mut().flat_map(|l| l.trainable_tensors_mut()).collect()
    }

    /// Snapshot of all persistent tensors (for best-epoch restoration).
    pub fn snapshot(&self) -> Vec<Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| l.stored_tensors())
            .map(|(_, t)| t.clone())
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[Tensor<T>]) {
        let mut it = snapshot.iter();
        for layer in &mut self.layers {
            for (_, tensor) in layer.stored_tensors_mut() {
                let src = it.next().expect("snapshot tensor count matches");
                assert_eq!(tensor.shape(), src.shape(), "snapshot shape mismatch");
                *tensor = src.clone();
            }
        }
        assert!(it.next().is_none(), "snapshot tensor count matches");
    }

    /// Writes a checkpoint; the layer list is stored in the metadata so
    /// [`ChordNet::load`] is self-describing.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut named = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            for (name, tensor) in layer.stored_tensors() {
                named.push((format!("layer{idx:02}.{}.{name}", layer.kind_tag()), tensor));
            }
        }
        let mut meta = BTreeMap::new();
        meta.insert("kind".to_string(), "acoustic-model".to_string());
        meta.insert(
            "layers".to_string(),
            serde_json::to_string(&self.specs).map_err(|e| Error::container(path.display().to_string(), e.to_string()))?,
        );
        meta.insert("input_bands".to_string(), self.input_hw.0.to_string());
        meta.insert("input_frames".to_string(), self.input_hw.1.to_string());
        container::save_tensors(path, &named, &meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (map, meta) = container::load_tensor_map::<T>(path)?;
        let display = path.display().to_string();
        let specs: Vec<LayerSpec> = serde_json::from_str(
            meta.get("layers")
                .ok_or_else(|| Error::container(display.clone(), "missing layer metadata"))?,
        )
        .map_err(|e| Error::container(display.clone(), e.to_string()))?;
        let parse = |key: &str| -> Result<usize> {
            meta.get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::container(display.clone(), format!("missing {key}")))
        };
        let input_hw = (parse("input_bands")?, parse("input_frames")?);
        let mut net = ChordNet::build(&specs, input_hw, 0);
        for (idx, layer) in net.layers.iter_mut().enumerate() {
            let tag = layer.kind_tag();
            for (name, tensor) in layer.stored_tensors_mut() {
                let key = format!("layer{idx:02}.{tag}.{name}");
                let stored = map
                    .get(&key)
                    .ok_or_else(|| Error::container(display.clone(), format!("missing tensor {key}")))?;
                if stored.shape() != tensor.shape() {
                    return Err(Error::container(display.clone(), format!("shape mismatch for {key}")));
                }
                *tensor = stored.clone();
            }
        }
        Ok(net)
    }
}

/// Per-song feature sequences for the CRF stage: the model's hidden features
/// for every frame, batched for throughput, paired with the gold labels.
pub fn extract_feature_sequences<T: Scalar>(
    model: &ChordNet<T>,
    dataset: &crate::data::FrameDataset<T>,
    batch_size: usize,
) -> Result<Vec<crate::crf::FeatureSequence<T>>> {
    let (bands, cols) = dataset.window_shape();
    let window = bands * cols;
    let mut sequences = Vec::with_capacity(dataset.songs().len());
    for (song_idx, song) in dataset.songs().iter().enumerate() {
        let frames = song.spectrogram.num_frames();
        let mut features = Tensor::zeros(&[frames, FEATURE_DIM]);
        for start in (0..frames).step_by(batch_size.max(1)) {
            let end = (start + batch_size.max(1)).min(frames);
            let mut inputs = Tensor::zeros(&[end - start, 1, bands, cols]);
            for (slot, frame) in (start..end).enumerate() {
                dataset.copy_window(
                    crate::data::SampleRef {
                        song: song_idx as u32,
                        frame: frame as u32,
                    },
                    &mut inputs.data_mut()[slot * window..(slot + 1) * window],
                );
            }
            let batch_features = self::ChordNet::features_infer(model, &inputs)?;
            let dim = batch_features.shape()[1];
            features.data_mut()[start * dim..end * dim].copy_from_slice(batch_features.data());
        }
        let labels = song.labels.iter().map(|l| l.index()).collect();
        sequences.push(crate::crf::FeatureSequence::new(features, Some(labels))?);
    }
    Ok(sequences)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_trace_matches_the_architecture_table() {
        let net: ChordNet<f32> = ChordNet::standard(3);
        let trace = net.shape_trace();
        // shapes after each named stage
        assert_eq!(trace[0], vec![1, 105, 15]);
        let expect = [
            (vec![32usize, 105, 15], 1usize), // conv block 1 (conv output)
            (vec![32, 105, 15], 4),
            (vec![32, 105, 15], 7),
            (vec![32, 105, 15], 10),
            (vec![32, 52, 15], 13),  // pool
            (vec![64, 50, 13], 15),  // conv 5
            (vec![64, 48, 11], 18),  // conv 6
            (vec![64, 24, 11], 21),  // pool
            (vec![128, 13, 3], 23),  // 128-map conv
            (vec![25, 13, 3], 27),   // 1×1 conv
            (vec![25], 28),          // global average pool
        ];
        for (shape, idx) in expect {
            assert_eq!(trace[idx], shape, "stage at layer {}", idx);
        }
    }

    #[test]
    fn parameter_count_is_within_the_expected_range() {
        let net: ChordNet<f32> = ChordNet::standard(0);
        let count = net.trainable_param_count();
        assert!(
            (880_000..=1_000_000).contains(&count),
            "parameter count {count} outside [880k, 1M]"
        );
    }

    #[test]
    fn equal_seeds_build_identical_networks() {
        let a: ChordNet<f32> = ChordNet::standard(11);
        let b: ChordNet<f32> = ChordNet::standard(11);
        for (x, y) in a.trainable_params().iter().zip(b.trainable_params()) {
            assert_eq!(x.data(), y.data());
        }
        let c: ChordNet<f32> = ChordNet::standard(12);
        assert_ne!(a.trainable_params()[0].data(), c.trainable_params()[0].data());
    }

    #[test]
    fn output_is_a_distribution_and_inference_is_deterministic() {
        let net: ChordNet<f32> = ChordNet::standard(5);
        let mut batch = Tensor::zeros(&[2, 1, 105, 15]);
        for (i, v) in batch.data_mut().iter_mut().enumerate() {
            *v = ((i % 97) as f32) * 0.01;
        }
        let a = net.forward_infer(&batch).unwrap();
        let b = net.forward_infer(&batch).unwrap();
        assert_eq!(a.shape(), &[2, 25]);
        for row in 0..2 {
            let sum: f32 = a.row(row).iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
        }
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits(), "two inference passes must be bit-identical");
        }
    }

    #[test]
    fn zeroed_head_gives_uniform_distribution() {
        let mut net: ChordNet<f32> = ChordNet::standard(5);
        // zero the final convolution (kernels + bias)
        let n_params = net.trainable_params().len();
        {
            let mut params = net.trainable_params_mut();
            params[n_params - 2].fill(0.0);
            params[n_params - 1].fill(0.0);
        }
        let mut batch = Tensor::zeros(&[1, 1, 105, 15]);
        batch.data_mut()[53 * 15 + 7] = 1.0;
        let out = net.forward_infer(&batch).unwrap();
        for &v in out.data() {
            assert!((v - 0.04).abs() < 1e-7, "expected uniform 0.04, got {v}");
        }
    }

    #[test]
    fn permuting_head_kernels_permutes_the_output() {
        let net: ChordNet<f32> = ChordNet::standard(9);
        let mut batch = Tensor::zeros(&[1, 1, 105, 15]);
        for (i, v) in batch.data_mut().iter_mut().enumerate() {
            *v = ((i * 31 % 89) as f32) * 0.02;
        }
        let base = net.forward_infer(&batch).unwrap();

        let mut permuted = net.clone();
        {
            let n = permuted.trainable_params().len();
            let mut params = permuted.trainable_params_mut();
            // rotate classes by 3: class k takes the kernels of class (k+3) % 25
            let kernels = params[n - 2].data().to_vec();
            let bias = params[n - 1].data().to_vec();
            let per_class = kernels.len() / 25;
            for k in 0..25 {
                let src = (k + 3) % 25;
                params[n - 2].data_mut()[k * per_class..(k + 1) * per_class]
                    .copy_from_slice(&kernels[src * per_class..(src + 1) * per_class]);
                params[n - 1].data_mut()[k] = bias[src];
            }
        }
        let rotated = permuted.forward_infer(&batch).unwrap();
        for k in 0..25 {
            let expect = base.data()[(k + 3) % 25];
            assert!((rotated.data()[k] - expect).abs() < 1e-7);
        }
    }

    #[test]
    fn feature_gap_consistency_with_head() {
        // class scores via (1×1 conv → GAP) equal (feature average → W f̄ + b)
        let net: ChordNet<f64> = ChordNet::standard(21);
        let mut batch = Tensor::zeros(&[3, 1, 105, 15]);
        for (i, v) in batch.data_mut().iter_mut().enumerate() {
            *v = ((i * 7 % 101) as f64) * 0.013;
        }
        let probs = net.forward_infer(&batch).unwrap();
        let features = net.features_infer(&batch).unwrap();
        assert_eq!(features.shape(), &[3, 128]);
        let (w, b) = net.head();
        for sample in 0..3 {
            let f = features.row(sample);
            let mut logits: Vec<f64> = (0..25)
                .map(|k| {
                    b[k] + w.row(k).iter().zip(f).map(|(&wk, &fv)| wk * fv).sum::<f64>()
                })
                .collect();
            // softmax over the dense-head logits
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = logits.iter().map(|v| (v - max).exp()).sum();
            for l in &mut logits {
                *l = (*l - max).exp() / sum;
            }
            for k in 0..25 {
                assert!(
                    (logits[k] - probs.at2(sample, k)).abs() < 1e-6,
                    "sample {sample}, class {k}: {} vs {}",
                    logits[k],
                    probs.at2(sample, k)
                );
            }
        }
    }

    #[test]
    fn save_load_round_trip_preserves_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ntc");
        let net: ChordNet<f32> = ChordNet::standard(33);
        net.save(&path).unwrap();
        let loaded: ChordNet<f32> = ChordNet::load(&path).unwrap();
        let mut batch = Tensor::zeros(&[1, 1, 105, 15]);
        for (i, v) in batch.data_mut().iter_mut().enumerate() {
            *v = ((i % 13) as f32) * 0.07;
        }
        let a = net.forward_infer(&batch).unwrap();
        let b = loaded.forward_infer(&batch).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
