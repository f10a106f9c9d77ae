//! Linear-chain conditional random field over feature sequences: energy,
//! exact likelihood via the forward recursion, forward-backward marginals,
//! Viterbi decoding and L1-regularised training.
//!
//! All recursions run in log space; there is no probability-domain pass.

mod train;

use std::collections::BTreeMap;
use std::path::Path;

use crate::container;
use crate::error::Error;
use crate::nn::Tensor;
use crate::scalar::{gemm, Scalar};
use crate::Result;

pub use train::{chunk_sequences, frame_accuracy, nll_gradient, train_crf, CrfEpochRecord, CrfTrainConfig, CrfTrainLog};

/// CRF parameters.
///
/// For a sequence of N frames with labels `y_0..y_{N-1}` and feature columns
/// `f_0..f_{N-1}`, the energy is
///
/// ```text
/// E(Y, F) = Σ_{n=0}^{N-1} [ c[y_n] + f_nᵀ W[:, y_n] ]
///         + Σ_{n=1}^{N-1} A[y_{n-1}, y_n]
///         + π[y_0] + τ[y_{N-1}]
/// ```
///
/// The unary (bias and observation) term is applied to every frame including
/// frame 0; excluding an observed frame from the unary sum would ignore real
/// evidence.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams<T> {
    /// `[labels, labels]` inter-frame potentials; `transitions[i][j]` scores
    /// label `i` followed by label `j`.
    pub transitions: Tensor<T>,
    /// `[feature_dim, labels]` frame-input potentials.
    pub observation: Tensor<T>,
    /// `[labels]` label bias.
    pub bias: Tensor<T>,
    /// `[labels]` potential of the first label.
    pub initial: Tensor<T>,
    /// `[labels]` potential of the last label.
    pub final_: Tensor<T>,
}

impl<T: Scalar> CrfParams<T> {
    pub fn zeros(feature_dim: usize, num_labels: usize) -> Self {
        CrfParams {
            transitions: Tensor::zeros(&[num_labels, num_labels]),
            observation: Tensor::zeros(&[feature_dim, num_labels]),
            bias: Tensor::zeros(&[num_labels]),
            initial: Tensor::zeros(&[num_labels]),
            final_: Tensor::zeros(&[num_labels]),
        }
    }

    pub fn num_labels(&self) -> usize {
        self.bias.numel()
    }

    pub fn feature_dim(&self) -> usize {
        self.observation.shape()[0]
    }

    pub fn tensors(&self) -> [&Tensor<T>; 5] {
        [&self.transitions, &self.observation, &self.bias, &self.initial, &self.final_]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<T>; 5] {
        [
            &mut self.transitions,
            &mut self.observation,
            &mut self.bias,
            &mut self.initial,
            &mut self.final_,
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let named: Vec<(String, &Tensor<T>)> = STORE_NAMES
            .iter()
            .zip(self.tensors())
            .map(|(name, t)| (name.to_string(), t))
            .collect();
        let mut meta = BTreeMap::new();
        meta.insert("kind".into(), "crf".into());
        container::save_tensors(path, &named, &meta)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (map, _) = container::load_tensor_map::<T>(path)?;
        let get = |name: &str| {
            map.get(name)
                .cloned()
                .ok_or_else(|| Error::container(path.display().to_string(), format!("missing tensor {name}")))
        };
        let params = CrfParams {
            transitions: get(STORE_NAMES[0])?,
            observation: get(STORE_NAMES[1])?,
            bias: get(STORE_NAMES[2])?,
            initial: get(STORE_NAMES[3])?,
            final_: get(STORE_NAMES[4])?,
        };
        let k = params.num_labels();
        if params.transitions.shape() != [k, k] || params.observation.shape()[1] != k {
            return Err(Error::container(path.display().to_string(), "inconsistent CRF shapes"));
        }
        Ok(params)
    }
}

const STORE_NAMES: [&str; 5] = [
    "crf.transitions",
    "crf.observation",
    "crf.bias",
    "crf.initial",
    "crf.final",
];

/// A feature sequence (`[N, feature_dim]`, one row per frame) with optional
/// gold labels.
#[derive(Debug, Clone)]
pub struct FeatureSequence<T> {
    pub features: Tensor<T>,
    pub labels: Option<Vec<usize>>,
}

impl<T: Scalar> FeatureSequence<T> {
    pub fn new(features: Tensor<T>, labels: Option<Vec<usize>>) -> Result<Self> {
        if features.shape().len() != 2 || features.shape()[0] == 0 {
            return Err(Error::ShapeMismatch {
                context: "feature sequence",
                expected: vec![1, 0],
                actual: features.shape().to_vec(),
            });
        }
        if let Some(l) = &labels {
            if l.len() != features.shape()[0] {
                return Err(Error::ShapeMismatch {
                    context: "feature sequence labels",
                    expected: vec![features.shape()[0]],
                    actual: vec![l.len()],
                });
            }
        }
        Ok(FeatureSequence { features, labels })
    }

    pub fn len(&self) -> usize {
        self.features.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-frame unary potentials `u[n][y] = c[y] + f_nᵀ W[:, y]` as an `[N, K]`
/// tensor.
fn unary_potentials<T: Scalar>(params: &CrfParams<T>, features: &Tensor<T>) -> Tensor<T> {
    let (n, dim) = (features.shape()[0], features.shape()[1]);
    let k = params.num_labels();
    assert_eq!(dim, params.feature_dim(), "feature dimension mismatch");
    let mut unary = Tensor::zeros(&[n, k]);
    gemm(n, dim, k, T::one(), features.data(), params.observation.data(), T::zero(), unary.data_mut());
    for row in 0..n {
        for (u, &c) in unary.row_mut(row).iter_mut().zip(params.bias.data()) {
            *u += c;
        }
    }
    unary
}

fn check_labels<T: Scalar>(params: &CrfParams<T>, labels: &[usize]) -> Result<()> {
    match labels.iter().find(|&&y| y >= params.num_labels()) {
        Some(&y) => Err(Error::InvalidParam(format!(
            "label {y} out of range for {} classes",
            params.num_labels()
        ))),
        None => Ok(()),
    }
}

/// Energy of one label sequence.
pub fn energy<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>, labels: &[usize]) -> Result<T> {
    if labels.len() != seq.len() {
        return Err(Error::ShapeMismatch {
            context: "energy labels",
            expected: vec![seq.len()],
            actual: vec![labels.len()],
        });
    }
    check_labels(params, labels)?;
    let unary = unary_potentials(params, &seq.features);
    let mut total = params.initial.data()[labels[0]] + params.final_.data()[labels[labels.len() - 1]];
    for (n, &y) in labels.iter().enumerate() {
        total += unary.at2(n, y);
    }
    for pair in labels.windows(2) {
        total += params.transitions.at2(pair[0], pair[1]);
    }
    Ok(total)
}

fn log_sum_exp<T: Scalar>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `log Σ_Y exp E(Y, F)` via the forward recursion in log space.
pub fn log_partition<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>) -> T {
    let unary = unary_potentials(params, &seq.features);
    log_partition_from_unary(params, &unary)
}

fn log_partition_from_unary<T: Scalar>(params: &CrfParams<T>, unary: &Tensor<T>) -> T {
    let (n, k) = (unary.shape()[0], unary.shape()[1]);
    let mut alpha: Vec<T> = (0..k).map(|y| params.initial.data()[y] + unary.at2(0, y)).collect();
    let mut scratch = vec![T::zero(); k];
    let mut next = vec![T::zero(); k];
    for frame in 1..n {
        for y in 0..k {
            for (prev, s) in scratch.iter_mut().enumerate() {
                *s = alpha[prev] + params.transitions.at2(prev, y);
            }
            next[y] = unary.at2(frame, y) + log_sum_exp(&scratch);
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    for (a, &t) in alpha.iter_mut().zip(params.final_.data()) {
        *a += t;
    }
    log_sum_exp(&alpha)
}

/// `log p(Y | F) = E(Y, F) − log Z`; always ≤ 0.
pub fn sequence_log_likelihood<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>) -> Result<T> {
    let labels = seq
        .labels
        .as_ref()
        .ok_or(Error::EmptyInput("gold labels required for likelihood"))?;
    Ok(energy(params, seq, labels)? - log_partition(params, seq))
}

/// Exact posterior marginals from one forward-backward pass.
#[derive(Debug, Clone)]
pub struct Marginals<T> {
    /// `[N, K]` unary posteriors; every row sums to 1.
    pub unary: Tensor<T>,
    /// `[N-1, K, K]` pairwise posteriors (empty for N = 1).
    pub pairwise: Tensor<T>,
    pub log_z: T,
}

pub fn forward_backward<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>) -> Marginals<T> {
    let unary = unary_potentials(params, &seq.features);
    let (n, k) = (unary.shape()[0], unary.shape()[1]);

    let mut alpha = Tensor::zeros(&[n, k]);
    for y in 0..k {
        alpha.row_mut(0)[y] = params.initial.data()[y] + unary.at2(0, y);
    }
    let mut scratch = vec![T::zero(); k];
    for frame in 1..n {
        for y in 0..k {
            for (prev, s) in scratch.iter_mut().enumerate() {
                *s = alpha.at2(frame - 1, prev) + params.transitions.at2(prev, y);
            }
            alpha.row_mut(frame)[y] = unary.at2(frame, y) + log_sum_exp(&scratch);
        }
    }

    let mut beta = Tensor::zeros(&[n, k]);
    for y in 0..k {
        beta.row_mut(n - 1)[y] = params.final_.data()[y];
    }
    for frame in (0..n - 1).rev() {
        for y in 0..k {
            for (next, s) in scratch.iter_mut().enumerate() {
                *s = params.transitions.at2(y, next) + unary.at2(frame + 1, next) + beta.at2(frame + 1, next);
            }
            beta.row_mut(frame)[y] = log_sum_exp(&scratch);
        }
    }

    let terminal: Vec<T> = (0..k).map(|y| alpha.at2(n - 1, y) + params.final_.data()[y]).collect();
    let log_z = log_sum_exp(&terminal);

    let mut unary_marginals = Tensor::zeros(&[n, k]);
    for frame in 0..n {
        for y in 0..k {
            unary_marginals.row_mut(frame)[y] = (alpha.at2(frame, y) + beta.at2(frame, y) - log_z).exp();
        }
    }

    let mut pairwise = Tensor::zeros(&[n.saturating_sub(1), k, k]);
    for frame in 0..n.saturating_sub(1) {
        let base = frame * k * k;
        for prev in 0..k {
            for next in 0..k {
                let log_p = alpha.at2(frame, prev)
                    + params.transitions.at2(prev, next)
                    + unary.at2(frame + 1, next)
                    + beta.at2(frame + 1, next)
                    - log_z;
                pairwise.data_mut()[base + prev * k + next] = log_p.exp();
            }
        }
    }

    Marginals {
        unary: unary_marginals,
        pairwise,
        log_z,
    }
}

/// Maximum-energy label sequence; ties break toward the lower label index.
pub fn viterbi<T: Scalar>(params: &CrfParams<T>, seq: &FeatureSequence<T>) -> Vec<usize> {
    let unary = unary_potentials(params, &seq.features);
    let (n, k) = (unary.shape()[0], unary.shape()[1]);

    let mut score: Vec<T> = (0..k).map(|y| params.initial.data()[y] + unary.at2(0, y)).collect();
    let mut backpointers = vec![0u32; n * k];
    let mut next = vec![T::zero(); k];
    for frame in 1..n {
        for y in 0..k {
            let mut best = T::neg_infinity();
            let mut best_prev = 0u32;
            for prev in 0..k {
                let candidate = score[prev] + params.transitions.at2(prev, y);
                // strict improvement keeps the lowest previous index on ties
                if candidate > best {
                    best = candidate;
                    best_prev = prev as u32;
                }
            }
            next[y] = best + unary.at2(frame, y);
            backpointers[frame * k + y] = best_prev;
        }
        std::mem::swap(&mut score, &mut next);
    }
    for (s, &t) in score.iter_mut().zip(params.final_.data()) {
        *s += t;
    }

    let mut best_last = 0usize;
    for y in 1..k {
        if score[y] > score[best_last] {
            best_last = y;
        }
    }
    let mut path = vec![0usize; n];
    path[n - 1] = best_last;
    for frame in (1..n).rev() {
        path[frame - 1] = backpointers[frame * k + path[frame]] as usize;
    }
    path
}
