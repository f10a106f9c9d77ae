//! Elementwise and pooling layers: rectifier, max pooling, dropout, global
//! average pooling and softmax.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::conv::batch_dims;
use super::tensor::Tensor;

/// `max(0, x)` elementwise. The returned tensor doubles as the backward
/// cache.
pub fn rectify<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    for v in out.data_mut() {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
    out
}

pub fn rectify_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let mut grad = grad_out.clone();
    for (g, &y) in grad.data_mut().iter_mut().zip(output.data()) {
        if y <= T::zero() {
            *g = T::zero();
        }
    }
    grad
}

/// Non-overlapping max pooling; remainders on a non-dividing axis are
/// truncated (105 → 52 for a 2×1 pool).
#[derive(Debug, Clone, Copy)]
pub struct MaxPool {
    pub pool_h: usize,
    pub pool_w: usize,
}

impl MaxPool {
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (h / self.pool_h, w / self.pool_w)
    }

    /// Returns the pooled tensor and, per output element, the index of the
    /// winning position within its window.
    pub fn forward<T: Scalar>(&self, input: &Tensor<T>) -> (Tensor<T>, Vec<u32>) {
        let (n, c, h, w) = batch_dims(input);
        let (oh, ow) = self.out_hw(h, w);
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        let mut switches = vec![0u32; n * c * oh * ow];
        let mut idx = 0;
        for sample in 0..n {
            let x = input.sample(sample);
            for ch in 0..c {
                let plane = &x[ch * h * w..(ch + 1) * h * w];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut best = T::neg_infinity();
                        let mut best_at = 0u32;
                        for py in 0..self.pool_h {
                            for px in 0..self.pool_w {
                                let v = plane[(oy * self.pool_h + py) * w + ox * self.pool_w + px];
                                if v > best {
                                    best = v;
                                    best_at = (py * self.pool_w + px) as u32;
                                }
                            }
                        }
                        out.data_mut()[idx] = best;
                        switches[idx] = best_at;
                        idx += 1;
                    }
                }
            }
        }
        (out, switches)
    }

    pub fn backward<T: Scalar>(&self, in_shape: &[usize], switches: &[u32], grad_out: &Tensor<T>) -> Tensor<T> {
        let (n, c, oh, ow) = batch_dims(grad_out);
        let (h, w) = (in_shape[2], in_shape[3]);
        let mut grad_in = Tensor::zeros(in_shape);
        let mut idx = 0;
        for sample in 0..n {
            let gi = grad_in.sample_mut(sample);
            for ch in 0..c {
                let plane = &mut gi[ch * h * w..(ch + 1) * h * w];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let at = switches[idx] as usize;
                        let (py, px) = (at / self.pool_w, at % self.pool_w);
                        plane[(oy * self.pool_h + py) * w + ox * self.pool_w + px] += grad_out.data()[idx];
                        idx += 1;
                    }
                }
            }
        }
        grad_in
    }
}

/// Inverted dropout: training zeroes units with probability `p` and scales
/// survivors by `1/(1-p)`; inference is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub p: f64,
}

impl Dropout {
    /// Returns the dropped tensor and the applied mask (0 or `1/(1-p)` per
    /// element), which is also the backward Jacobian diagonal.
    pub fn forward_train<T: Scalar>(&self, input: &Tensor<T>, rng: &mut ChaCha8Rng) -> (Tensor<T>, Vec<T>) {
        let keep_scale = T::from(1.0 / (1.0 - self.p)).unwrap();
        let mask: Vec<T> = (0..input.numel())
            .map(|_| if rng.gen::<f64>() < self.p { T::zero() } else { keep_scale })
            .collect();
        let mut out = input.clone();
        for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
            *v = *v * m;
        }
        (out, mask)
    }

    pub fn backward<T: Scalar>(&self, mask: &[T], grad_out: &Tensor<T>) -> Tensor<T> {
        let mut grad = grad_out.clone();
        for (g, &m) in grad.data_mut().iter_mut().zip(mask) {
            *g = *g * m;
        }
        grad
    }
}

/// Mean over all spatial positions per channel: `[n, c, h, w]` → `[n, c]`.
pub fn global_average_pool<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = batch_dims(input);
    let plane = h * w;
    let norm = T::one() / T::from(plane).unwrap();
    let mut out = Tensor::zeros(&[n, c]);
    for sample in 0..n {
        let x = input.sample(sample);
        for ch in 0..c {
            let sum: T = x[ch * plane..(ch + 1) * plane].iter().copied().sum();
            out.data_mut()[sample * c + ch] = sum * norm;
        }
    }
    out
}

pub fn global_average_pool_backward<T: Scalar>(in_shape: &[usize], grad_out: &Tensor<T>) -> Tensor<T> {
    let (h, w) = (in_shape[2], in_shape[3]);
    let plane = h * w;
    let norm = T::one() / T::from(plane).unwrap();
    let (n, c) = (grad_out.shape()[0], grad_out.shape()[1]);
    let mut grad_in = Tensor::zeros(in_shape);
    for sample in 0..n {
        let gi = grad_in.sample_mut(sample);
        for ch in 0..c {
            let g = grad_out.data()[sample * c + ch] * norm;
            gi[ch * plane..(ch + 1) * plane].fill(g);
        }
    }
    grad_in
}

/// Row-wise softmax of `[n, k]` logits, computed with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    assert_eq!(logits.shape().len(), 2, "softmax expects [n, k] logits");
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    let mut out = Tensor::zeros(&[n, k]);
    for row in 0..n {
        let x = logits.row(row);
        let max = x.iter().copied().fold(T::neg_infinity(), T::max);
        let y = out.row_mut(row);
        let mut sum = T::zero();
        for (dst, &v) in y.iter_mut().zip(x) {
            *dst = (v - max).exp();
            sum += *dst;
        }
        for dst in y.iter_mut() {
            *dst = *dst / sum;
        }
    }
    out
}

/// Softmax Jacobian-vector product: `gᵢₙ = y ⊙ (g − ⟨g, y⟩)` per row.
pub fn softmax_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let (n, k) = (output.shape()[0], output.shape()[1]);
    let mut grad_in = Tensor::zeros(&[n, k]);
    for row in 0..n {
        let y = output.row(row);
        let g = grad_out.row(row);
        let dot: T = y.iter().zip(g).map(|(&yv, &gv)| yv * gv).sum();
        for ((dst, &yv), &gv) in grad_in.row_mut(row).iter_mut().zip(y).zip(g) {
            *dst = yv * (gv - dot);
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn rectify_clamps_negatives() {
        let x = Tensor::from_vec(&[1, 1, 1, 4], vec![-1.0, 0.0, 2.0, -0.5]);
        assert_eq!(rectify(&x).data(), &[0.0, 0.0, 2.0, 0.0]);
    }

    #[test]
    fn maxpool_2x1_halves_frequency_axis() {
        let pool = MaxPool { pool_h: 2, pool_w: 1 };
        let x = Tensor::<f32>::zeros(&[1, 32, 105, 15]);
        let (y, _) = pool.forward(&x);
        assert_eq!(y.shape(), &[1, 32, 52, 15]);
    }

    #[test]
    fn maxpool_picks_maximum_and_routes_gradient() {
        let pool = MaxPool { pool_h: 2, pool_w: 1 };
        let x = Tensor::from_vec(&[1, 1, 4, 1], vec![1.0, 3.0, -2.0, -1.0]);
        let (y, switches) = pool.forward(&x);
        assert_eq!(y.data(), &[3.0, -1.0]);
        let g = Tensor::from_vec(&[1, 1, 2, 1], vec![10.0, 20.0]);
        let gi = pool.backward(&[1, 1, 4, 1], &switches, &g);
        assert_eq!(gi.data(), &[0.0, 10.0, 0.0, 20.0]);
    }

    #[test]
    fn dropout_infer_is_identity_and_train_preserves_mean() {
        let x = Tensor::filled(&[1, 1, 100, 100], 1.0f64);
        let drop = Dropout { p: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (y, mask) = drop.forward_train(&x, &mut rng);
        let mean: f64 = y.data().iter().sum::<f64>() / y.numel() as f64;
        assert!((mean - 1.0).abs() < 0.02, "dropout mean {mean} drifted by more than 2%");
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
    }

    #[test]
    fn gap_of_constant_map_is_the_constant() {
        let x = Tensor::filled(&[2, 3, 13, 3], 0.75f32);
        let y = global_average_pool(&x);
        assert_eq!(y.shape(), &[2, 3]);
        assert!(y.data().iter().all(|&v| (v - 0.75).abs() < 1e-6));
    }

    #[test]
    fn softmax_rows_sum_to_one_and_shift_invariant() {
        let x = Tensor::from_vec(&[1, 3], vec![0.3f64, -1.2, 2.0]);
        let shifted = Tensor::from_vec(&[1, 3], vec![100.3, 98.8, 102.0]);
        let (y, ys) = (softmax(&x), softmax(&shifted));
        assert!((y.data().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (a, b) in y.data().iter().zip(ys.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_handles_extreme_logits() {
        let x = Tensor::from_vec(&[1, 2], vec![1000.0f64, 0.0]);
        let y = softmax(&x);
        assert!(y.data()[0] > 1.0 - 1e-12);
        assert!(y.data()[1] < 1e-12);
        assert!(y.all_finite());
    }

    #[test]
    fn uniform_logits_give_uniform_distribution() {
        let x = Tensor::filled(&[1, 25], 3.7f64);
        let y = softmax(&x);
        for &v in y.data() {
            assert!((v - 0.04).abs() < 1e-12);
        }
    }
}
