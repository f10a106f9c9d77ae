//! L1-regularised maximum-likelihood CRF training.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::nn::{AdamConfig, AdamState, Tensor};
use crate::scalar::Scalar;
use crate::Result;

use super::{energy, forward_backward, viterbi, CrfParams, FeatureSequence};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrfTrainConfig {
    pub learning_rate: f64,
    /// L1 regularisation weight on all CRF parameters.
    pub l1_weight: f64,
    /// Sequences per minibatch.
    pub batch_sequences: usize,
    /// Longer songs are chunked into non-overlapping windows of this many
    /// frames; shorter songs stay whole (their likelihood simply covers
    /// fewer frames).
    pub sequence_length: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for CrfTrainConfig {
    fn default() -> Self {
        CrfTrainConfig {
            learning_rate: 0.01,
            l1_weight: 1e-4,
            batch_sequences: 32,
            sequence_length: 1024,
            patience: 5,
            max_epochs: 100,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrfEpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrfTrainLog {
    pub epochs: Vec<CrfEpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Sufficient-statistics gradient of one sequence's negative log-likelihood:
/// model-expected minus empirical feature counts. Returns the gradient (as a
/// parameter-shaped bundle) and the NLL value.
pub fn nll_gradient<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>) -> Result<(CrfParams<T>, T)> {
    let labels = seq
        .labels
        .as_ref()
        .ok_or(Error::EmptyInput("gold labels required for CRF training"))?;
    super::check_labels(params, labels)?;
    let n = seq.len();
    let k = params.num_labels();
    let dim = params.feature_dim();
    let marginals = forward_backward(params, seq);
    let mut grad = CrfParams::zeros(dim, k);

    // bias: expected count − gold count
    for frame in 0..n {
        let post = marginals.unary.row(frame);
        let gb = grad.bias.data_mut();
        for y in 0..k {
            gb[y] += post[y];
        }
        gb[labels[frame]] -= T::one();
    }
    // observation: f_n ⊗ (posterior − onehot)
    for frame in 0..n {
        let feats = seq.features.row(frame);
        let post = marginals.unary.row(frame);
        for d in 0..dim {
            let row = grad.observation.row_mut(d);
            let f = feats[d];
            for y in 0..k {
                row[y] += f * post[y];
            }
            row[labels[frame]] -= f;
        }
    }
    // transitions: expected pairwise − gold pairwise
    for frame in 0..n.saturating_sub(1) {
        let base = frame * k * k;
        let gt = grad.transitions.data_mut();
        for idx in 0..k * k {
            gt[idx] += marginals.pairwise.data()[base + idx];
        }
        gt[labels[frame] * k + labels[frame + 1]] -= T::one();
    }
    // boundary potentials
    for y in 0..k {
        grad.initial.data_mut()[y] += marginals.unary.at2(0, y);
        grad.final_.data_mut()[y] += marginals.unary.at2(n - 1, y);
    }
    grad.initial.data_mut()[labels[0]] -= T::one();
    grad.final_.data_mut()[labels[n - 1]] -= T::one();

    let nll = marginals.log_z - energy(params, seq, labels)?;
    Ok((grad, nll))
}

/// Splits songs longer than `chunk_len` into non-overlapping chunks.
pub fn chunk_sequences<T: Scalar>(sequences: &[FeatureSequence<T>], chunk_len: usize) -> Vec<FeatureSequence<T>> {
    let mut chunks = Vec::new();
    for seq in sequences {
        let n = seq.len();
        if n <= chunk_len {
            chunks.push(seq.clone());
            continue;
        }
        let dim = seq.features.shape()[1];
        let mut start = 0;
        while start < n {
            let end = (start + chunk_len).min(n);
            let feats = Tensor::from_vec(
                &[end - start, dim],
                seq.features.data()[start * dim..end * dim].to_vec(),
            );
            let labels = seq.labels.as_ref().map(|l| l[start..end].to_vec());
            chunks.push(FeatureSequence::new(feats, labels).expect("chunk is nonempty"));
            start = end;
        }
    }
    chunks
}

/// Trains a CRF from zero-initialised parameters, early-stopping on
/// validation frame accuracy (Viterbi decoding) and restoring the best
/// epoch.
pub fn train_crf<T: Scalar>(
    train: &[FeatureSequence<T>],
    val: &[FeatureSequence<T>],
    config: &CrfTrainConfig,
) -> Result<(CrfParams<T>, CrfTrainLog)> {
    let first = train.first().ok_or(Error::EmptyInput("CRF training sequences"))?;
    let dim = first.features.shape()[1];
    let k = crate::data::NUM_CLASSES;
    for seq in train.iter().chain(val) {
        if seq.labels.is_none() {
            return Err(Error::EmptyInput("every CRF sequence needs gold labels"));
        }
    }

    // convex objective: zero initialisation, no symmetry to break
    let mut params = CrfParams::<T>::zeros(dim, k);
    let mut adam = AdamState::for_params(
        AdamConfig::with_learning_rate(config.learning_rate),
        &params.tensors().to_vec(),
    );
    let lambda = T::from(config.l1_weight).unwrap();
    let chunks = chunk_sequences(train, config.sequence_length);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut log = CrfTrainLog {
        epochs: Vec::new(),
        best_epoch: 0,
        best_val_accuracy: f64::NEG_INFINITY,
    };
    let mut best = params.clone();
    let mut epochs_since_best = 0usize;

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..chunks.len()).collect();
        order.shuffle(&mut rng);
        let mut epoch_nll = 0.0f64;
        for batch in order.chunks(config.batch_sequences) {
            // per-sequence gradients in parallel, reduced in batch order
            let results: Vec<Result<(CrfParams<T>, T)>> = batch
                .par_iter()
                .map(|&idx| nll_gradient(&params, &chunks[idx]))
                .collect();
            let mut grad = CrfParams::<T>::zeros(dim, k);
            let mut batch_nll = T::zero();
            for result in results {
                let (g, nll) = result?;
                for (dst, src) in grad.tensors_mut().into_iter().zip(g.tensors()) {
                    for (d, &s) in dst.data_mut().iter_mut().zip(src.data()) {
                        *d += s;
                    }
                }
                batch_nll += nll;
            }
            let scale = T::one() / T::from(batch.len()).unwrap();
            // L1 subgradient (0 at 0) on top of the averaged NLL gradient
            for (g, p) in grad.tensors_mut().into_iter().zip(params.tensors()) {
                for (gv, &pv) in g.data_mut().iter_mut().zip(p.data()) {
                    *gv = *gv * scale
                        + if pv > T::zero() {
                            lambda
                        } else if pv < T::zero() {
                            -lambda
                        } else {
                            T::zero()
                        };
                }
            }
            epoch_nll += (batch_nll * scale).to_f64().unwrap();
            let grads = grad.tensors();
            adam.step(&mut params.tensors_mut(), &grads.to_vec())?;
        }

        let val_accuracy = frame_accuracy(&params, val);
        log.epochs.push(CrfEpochRecord {
            epoch,
            train_nll: epoch_nll / order.chunks(config.batch_sequences).count().max(1) as f64,
            val_accuracy,
        });

        if val_accuracy > log.best_val_accuracy {
            log.best_val_accuracy = val_accuracy;
            log.best_epoch = epoch;
            best = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.patience {
                break;
            }
        }
    }

    Ok((best, log))
}

/// Viterbi frame accuracy over labelled sequences.
pub fn frame_accuracy<T: Scalar>(params: &CrfParams<T>, sequences: &[FeatureSequence<T>]) -> f64 {
    let mut correct = 0usize;
    let mut total = 0usize;
    for seq in sequences {
        let labels = match &seq.labels {
            Some(l) => l,
            None => continue,
        };
        let path = viterbi(params, seq);
        correct += path.iter().zip(labels).filter(|(a, b)| a == b).count();
        total += labels.len();
    }
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_sequence(n: usize, seed: u64, separation: f64) -> FeatureSequence<f64> {
        // three latent labels with noisy 4-d features
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        use rand::Rng;
        let mut feats = Vec::with_capacity(n * 4);
        let mut labels = Vec::with_capacity(n);
        let mut current = 0usize;
        for frame in 0..n {
            if frame % 7 == 6 {
                current = (current + 1 + rng.gen_range(0..2)) % 3;
            }
            labels.push(current);
            for d in 0..4 {
                let signal = if d == current { separation } else { 0.0 };
                feats.push(signal + rng.gen_range(-0.3..0.3));
            }
        }
        FeatureSequence::new(Tensor::from_vec(&[n, 4], feats), Some(labels)).unwrap()
    }

    #[test]
    fn chunking_splits_long_sequences_without_overlap() {
        let seq = toy_sequence(250, 1, 1.0);
        let chunks = chunk_sequences(&[seq.clone()], 100);
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks[0].len(), 100);
        assert_eq!(chunks[2].len(), 50);
        let rebuilt: Vec<usize> = chunks.iter().flat_map(|c| c.labels.clone().unwrap()).collect();
        assert_eq!(&rebuilt, seq.labels.as_ref().unwrap());
    }

    #[test]
    fn separable_toy_task_reaches_perfect_viterbi_accuracy() {
        let train: Vec<_> = (0..6).map(|s| toy_sequence(120, s, 2.0)).collect();
        let val: Vec<_> = (10..12).map(|s| toy_sequence(120, s, 2.0)).collect();
        let config = CrfTrainConfig {
            max_epochs: 60,
            batch_sequences: 4,
            ..CrfTrainConfig::default()
        };
        let (params, log) = train_crf(&train, &val, &config).unwrap();
        assert!(
            log.best_val_accuracy >= 1.0 - 1e-12,
            "validation accuracy {}",
            log.best_val_accuracy
        );
        let test = toy_sequence(200, 99, 2.0);
        let acc = frame_accuracy(&params, &[test]);
        assert!(acc >= 0.99, "test accuracy {acc}");
    }

    #[test]
    fn strong_l1_drives_off_diagonal_transitions_to_zero() {
        // many short sequences at batch size 1, so even the first epoch's
        // snapshot reflects dozens of optimiser steps
        let train: Vec<_> = (0..64).map(|s| toy_sequence(40, s, 1.5)).collect();
        let val: Vec<_> = (80..82).map(|s| toy_sequence(40, s, 1.5)).collect();
        let strong = CrfTrainConfig {
            l1_weight: 10.0,
            max_epochs: 8,
            patience: 8,
            batch_sequences: 1,
            ..CrfTrainConfig::default()
        };
        let weak = CrfTrainConfig {
            l1_weight: 1e-4,
            max_epochs: 8,
            patience: 8,
            batch_sequences: 1,
            ..CrfTrainConfig::default()
        };
        let off_diag_mass = |p: &CrfParams<f64>| -> f64 {
            let k = p.num_labels();
            let mut sum = 0.0;
            for i in 0..k {
                for j in 0..k {
                    if i != j {
                        sum += p.transitions.at2(i, j).abs();
                    }
                }
            }
            sum
        };
        let (strong_params, _) = train_crf(&train, &val, &strong).unwrap();
        let (weak_params, _) = train_crf(&train, &val, &weak).unwrap();
        assert!(
            off_diag_mass(&strong_params) < 0.05 * off_diag_mass(&weak_params).max(1e-9),
            "strong {} vs weak {}",
            off_diag_mass(&strong_params),
            off_diag_mass(&weak_params)
        );
    }

    #[test]
    fn sequences_without_labels_are_rejected() {
        let seq = FeatureSequence::new(Tensor::<f64>::zeros(&[3, 2]), None).unwrap();
        assert!(train_crf(&[seq], &[], &CrfTrainConfig::default()).is_err());
    }
}
