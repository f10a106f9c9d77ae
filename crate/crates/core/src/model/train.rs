//! Supervised training of the acoustic model with augmented minibatches and
//! early stopping on validation accuracy.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{AugmentPolicy, FrameDataset, MinibatchStream, SampleRef};
use crate::error::Error;
use crate::nn::{loss, AdamConfig, AdamState, Tensor};
use crate::scalar::Scalar;
use crate::Result;

use super::ChordNet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Stop after this many epochs without a validation-accuracy improvement.
    pub patience: usize,
    pub max_epochs: usize,
    /// L2 regularisation weight on the loss.
    pub l2_weight: f64,
    pub learning_rate: f64,
    /// Fraction of training songs held out for validation when the caller
    /// does not provide an explicit validation set.
    pub validation_fraction: f64,
    pub seed: u64,
    /// Use every n-th frame of each training song (1 = all frames).
    pub frame_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            patience: 5,
            max_epochs: 100,
            l2_weight: 1e-7,
            learning_rate: 1e-3,
            validation_fraction: 0.1,
            seed: 42,
            frame_stride: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains `model` on `train`, early-stopping on `val` frame accuracy with the
/// configured patience and restoring the best-epoch parameters.
pub fn train_auditory<T: Scalar>(
    model: &mut ChordNet<T>,
    train: &FrameDataset<T>,
    val: &FrameDataset<T>,
    policy: AugmentPolicy,
    config: &TrainConfig,
) -> Result<TrainLog> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyInput("training or validation dataset"));
    }
    let samples = train.sample_refs(config.frame_stride);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut adam = AdamState::for_params(
        AdamConfig::with_learning_rate(config.learning_rate),
        &model.trainable_params(),
    );
    let lambda = T::from(config.l2_weight).unwrap();

    let mut log = TrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
    };
    let mut best_snapshot = model.snapshot();
    let mut epochs_since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let stream = MinibatchStream::new(
            train,
            samples.clone(),
            config.batch_size,
            policy,
            config.seed.wrapping_add(epoch as u64),
        );
        let mut epoch_loss = 0.0f64;
        let mut batches = 0usize;
        for batch in stream {
            let (output, caches) = model.forward_train(&batch.inputs, &mut dropout_rng)?;
            let batch_loss = loss::cross_entropy_l2_loss(&output, &batch.targets, model.trainable_params(), lambda);
            let batch_loss = batch_loss.to_f64().unwrap();
            if !batch_loss.is_finite() {
                return Err(Error::Train(format!(
                    "non-finite loss at epoch {epoch}, batch {batches}: {batch_loss}"
                )));
            }
            epoch_loss += batch_loss;
            batches += 1;

            let grad_pred = loss::cross_entropy_grad(&output, &batch.targets);
            let mut grads = model.backward(&caches, grad_pred);
            loss::add_l2_norm_grad(model.trainable_params(), grads.iter_mut(), lambda);
            let grad_refs: Vec<&Tensor<T>> = grads.iter().collect();
            adam.step(&mut model.trainable_params_mut(), &grad_refs)?;
        }

        let val_accuracy = evaluate_frame_accuracy(model, val, config.batch_size)?;
        log.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / batches.max(1) as f64,
            val_accuracy,
        });

        if val_accuracy > log.best_val_accuracy {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            best_snapshot = model.snapshot();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    model.restore(&best_snapshot);
    Ok(log)
}

/// Frame-wise classification accuracy on un-augmented frames.
pub fn evaluate_frame_accuracy<T: Scalar>(
    model: &ChordNet<T>,
    dataset: &FrameDataset<T>,
    batch_size: usize,
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset"));
    }
    let refs = dataset.sample_refs(1);
    let (bands, cols) = dataset.window_shape();
    let window = bands * cols;
    let mut correct = 0usize;
    for chunk in refs.chunks(batch_size.max(1)) {
        let mut inputs = Tensor::zeros(&[chunk.len(), 1, bands, cols]);
        for (slot, &sample) in chunk.iter().enumerate() {
            dataset.copy_window(sample, &mut inputs.data_mut()[slot * window..(slot + 1) * window]);
        }
        let output = model.forward_infer(&inputs)?;
        for (slot, &sample) in chunk.iter().enumerate() {
            let row = output.row(slot);
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            if argmax == dataset.label(sample).index() {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / refs.len() as f64)
}

/// Predicted class index per frame of one song, in frame order.
pub fn predict_song_frames<T: Scalar>(
    model: &ChordNet<T>,
    dataset: &FrameDataset<T>,
    song: usize,
    batch_size: usize,
) -> Result<Vec<usize>> {
    let (bands, cols) = dataset.window_shape();
    let window = bands * cols;
    let num_frames = dataset.songs()[song].spectrogram.num_frames();
    let mut out = Vec::with_capacity(num_frames);
    let refs: Vec<SampleRef> = (0..num_frames)
        .map(|frame| SampleRef {
            song: song as u32,
            frame: frame as u32,
        })
        .collect();
    for chunk in refs.chunks(batch_size.max(1)) {
        let mut inputs = Tensor::zeros(&[chunk.len(), 1, bands, cols]);
        for (slot, &sample) in chunk.iter().enumerate() {
            dataset.copy_window(sample, &mut inputs.data_mut()[slot * window..(slot + 1) * window]);
        }
        let output = model.forward_infer(&inputs)?;
        for slot in 0..chunk.len() {
            let row = output.row(slot);
            out.push(
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0,
            );
        }
    }
    Ok(out)
}
