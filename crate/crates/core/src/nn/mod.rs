//! Minimal trainable layer library: forward and backward passes for every
//! layer type used by the acoustic model, the training loss and the Adam
//! optimiser.

pub mod adam;
pub mod conv;
pub mod init;
pub mod loss;
pub mod norm;
pub mod ops;
pub mod tensor;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub use adam::{AdamConfig, AdamState};
pub use conv::Conv2d;
pub use norm::{BatchNorm, BnCache};
pub use ops::{Dropout, MaxPool};
pub use tensor::Tensor;

/// Forward-pass mode. Inference disables dropout and makes batch
/// normalisation use its running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Architecture description of one layer; parameters are allocated when a
/// network is built from a spec list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerSpec {
    Conv {
        channels: usize,
        kernel: (usize, usize),
        padded: bool,
        bias: bool,
    },
    BatchNorm,
    Rectify,
    MaxPool {
        pool: (usize, usize),
    },
    Dropout {
        p: f64,
    },
    GlobalAvgPool,
    Softmax,
}

/// A layer with allocated parameters.
#[derive(Debug, Clone)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    BatchNorm(BatchNorm<T>),
    Rectify,
    MaxPool(MaxPool),
    Dropout(Dropout),
    GlobalAvgPool,
    Softmax,
}

/// Values cached by a training-mode forward pass, consumed by backward.
#[derive(Debug)]
pub enum LayerCache<T> {
    Conv { input: Tensor<T> },
    BatchNorm(BnCache<T>),
    Rectify { output: Tensor<T> },
    MaxPool { in_shape: Vec<usize>, switches: Vec<u32> },
    Dropout { mask: Vec<T> },
    GlobalAvgPool { in_shape: Vec<usize> },
    Softmax { output: Tensor<T> },
}

impl<T: Scalar> Layer<T> {
    /// Inference-mode forward pass; deterministic and cache-free.
    pub fn forward_infer(&self, input: Tensor<T>) -> Tensor<T> {
        match self {
            Layer::Conv(conv) => conv.forward(&input),
            Layer::BatchNorm(bn) => bn.forward_infer(&input),
            Layer::Rectify => ops::rectify(&input),
            Layer::MaxPool(pool) => pool.forward(&input).0,
            Layer::Dropout(_) => input,
            Layer::GlobalAvgPool => ops::global_average_pool(&input),
            Layer::Softmax => ops::softmax(&input),
        }
    }

    /// Training-mode forward pass. Batch-norm layers update their running
    /// statistics; dropout draws its mask from `rng`.
    pub fn forward_train(&mut self, input: Tensor<T>, rng: &mut ChaCha8Rng) -> (Tensor<T>, LayerCache<T>) {
        match self {
            Layer::Conv(conv) => {
                let out = conv.forward(&input);
                (out, LayerCache::Conv { input })
            }
            Layer::BatchNorm(bn) => {
                let (out, cache) = bn.forward_train(&input);
                (out, LayerCache::BatchNorm(cache))
            }
            Layer::Rectify => {
                let out = ops::rectify(&input);
                (out.clone(), LayerCache::Rectify { output: out })
            }
            Layer::MaxPool(pool) => {
                let in_shape = input.shape().to_vec();
                let (out, switches) = pool.forward(&input);
                (out, LayerCache::MaxPool { in_shape, switches })
            }
            Layer::Dropout(drop) => {
                let (out, mask) = drop.forward_train(&input, rng);
                (out, LayerCache::Dropout { mask })
            }
            Layer::GlobalAvgPool => {
                let in_shape = input.shape().to_vec();
                (ops::global_average_pool(&input), LayerCache::GlobalAvgPool { in_shape })
            }
            Layer::Softmax => {
                let out = ops::softmax(&input);
                (out.clone(), LayerCache::Softmax { output: out })
            }
        }
    }

    /// Backward pass; returns the gradient w.r.t. the layer input and the
    /// gradients of this layer's trainable tensors (in
    /// [`Layer::trainable_tensors`] order).
    pub fn backward(&self, cache: &LayerCache<T>, grad_out: Tensor<T>) -> (Tensor<T>, Vec<Tensor<T>>) {
        match (self, cache) {
            (Layer::Conv(conv), LayerCache::Conv { input }) => {
                let (grad_in, grad_k, grad_b) = conv.backward(input, &grad_out);
                let mut grads = vec![grad_k];
                if let Some(gb) = grad_b {
                    grads.push(gb);
                }
                (grad_in, grads)
            }
            (Layer::BatchNorm(bn), LayerCache::BatchNorm(cache)) => {
                let (grad_in, grad_scale, grad_offset) = bn.backward(cache, &grad_out);
                (grad_in, vec![grad_scale, grad_offset])
            }
            (Layer::Rectify, LayerCache::Rectify { output }) => (ops::rectify_backward(output, &grad_out), vec![]),
            (Layer::MaxPool(pool), LayerCache::MaxPool { in_shape, switches }) => {
                (pool.backward(in_shape, switches, &grad_out), vec![])
            }
            (Layer::Dropout(drop), LayerCache::Dropout { mask }) => (drop.backward(mask, &grad_out), vec![]),
            (Layer::GlobalAvgPool, LayerCache::GlobalAvgPool { in_shape }) => {
                (ops::global_average_pool_backward(in_shape, &grad_out), vec![])
            }
            (Layer::Softmax, LayerCache::Softmax { output }) => (ops::softmax_backward(output, &grad_out), vec![]),
            _ => panic!("layer/cache kind mismatch in backward"),
        }
    }

    pub fn trainable_tensors(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv(conv) => {
                let mut t = vec![&conv.kernels];
                if let Some(b) = &conv.bias {
                    t.push(b);
                }
                t
            }
            Layer::BatchNorm(bn) => vec![&bn.scale, &bn.offset],
            _ => vec![],
        }
    }

    pub fn trainable_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        match self {
            Layer::Conv(conv) => {
                let mut t = vec![&mut conv.kernels];
                if let Some(b) = &mut conv.bias {
                    t.push(b);
                }
                t
            }
            Layer::BatchNorm(bn) => vec![&mut bn.scale, &mut bn.offset],
            _ => vec![],
        }
    }

    /// All persistent tensors (trainable plus batch-norm running statistics)
    /// with the names used by the checkpoint container.
    pub fn stored_tensors(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Conv(conv) => {
                let mut t = vec![("kernels", &conv.kernels)];
                if let Some(b) = &conv.bias {
                    t.push(("bias", b));
                }
                t
            }
            Layer::BatchNorm(bn) => vec![
                ("scale", &bn.scale),
                ("offset", &bn.offset),
                ("running_mean", &bn.running_mean),
                ("running_var", &bn.running_var),
            ],
            _ => vec![],
        }
    }

    pub fn stored_tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        match self {
            Layer::Conv(conv) => {
                let mut t = vec![("kernels", &mut conv.kernels)];
                if let Some(b) = &mut conv.bias {
                    t.push(("bias", b));
                }
                t
            }
            Layer::BatchNorm(bn) => vec![
                ("scale", &mut bn.scale),
                ("offset", &mut bn.offset),
                ("running_mean", &mut bn.running_mean),
                ("running_var", &mut bn.running_var),
            ],
            _ => vec![],
        }
    }

    /// Short tag used in checkpoint tensor names.
    pub fn kind_tag(&self) -> &'static str {
        match self {
            Layer::Conv(_) => "conv",
            Layer::BatchNorm(_) => "bn",
            Layer::Rectify => "rectify",
            Layer::MaxPool(_) => "maxpool",
            Layer::Dropout(_) => "dropout",
            Layer::GlobalAvgPool => "gap",
            Layer::Softmax => "softmax",
        }
    }
}
