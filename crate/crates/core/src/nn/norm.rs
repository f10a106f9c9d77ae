//! Per-feature-map batch normalisation.

use crate::scalar::Scalar;

use super::conv::batch_dims;
use super::tensor::Tensor;

/// Batch normalisation over `[n, c, h, w]` batches with one scale/offset pair
/// per feature map.
///
/// Training mode normalises by the batch statistics (biased variance over
/// `n·h·w` positions) and updates the running statistics by an exponential
/// moving average; inference mode applies the running statistics, which makes
/// the layer a fixed affine map per feature map.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub scale: Tensor<T>,
    pub offset: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub epsilon: T,
    /// Weight of the old running statistic in the moving average.
    pub momentum: T,
}

/// Forward-pass values needed by [`BatchNorm::backward`].
#[derive(Debug)]
pub struct BnCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        BatchNorm {
            scale: Tensor::filled(&[channels], T::one()),
            offset: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::filled(&[channels], T::one()),
            epsilon: T::from(1e-5).unwrap(),
            momentum: T::from(0.9).unwrap(),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.numel()
    }

    pub fn forward_train(&mut self, input: &Tensor<T>) -> (Tensor<T>, BnCache<T>) {
        let (n, c, h, w) = batch_dims(input);
        assert_eq!(c, self.channels(), "batchnorm channel mismatch");
        let plane = h * w;
        let count = T::from(n * plane).unwrap();

        // Batch statistics per feature map, accumulated in a fixed order so
        // results do not depend on the thread count.
        let mut mean = vec![T::zero(); c];
        let mut var = vec![T::zero(); c];
        for sample in 0..n {
            let x = input.sample(sample);
            for ch in 0..c {
                for &v in &x[ch * plane..(ch + 1) * plane] {
                    mean[ch] += v;
                }
            }
        }
        for m in &mut mean {
            *m = *m / count;
        }
        for sample in 0..n {
            let x = input.sample(sample);
            for ch in 0..c {
                let m = mean[ch];
                for &v in &x[ch * plane..(ch + 1) * plane] {
                    let d = v - m;
                    var[ch] += d * d;
                }
            }
        }
        for v in &mut var {
            *v = *v / count;
        }

        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.epsilon).sqrt()).collect();

        let mut xhat = Tensor::zeros(input.shape());
        let mut out = Tensor::zeros(input.shape());
        for sample in 0..n {
            let x = input.sample(sample);
            let xh = xhat.sample_mut(sample);
            for ch in 0..c {
                let (m, is) = (mean[ch], inv_std[ch]);
                for (dst, &v) in xh[ch * plane..(ch + 1) * plane].iter_mut().zip(&x[ch * plane..(ch + 1) * plane]) {
                    *dst = (v - m) * is;
                }
            }
        }
        for sample in 0..n {
            let xh = xhat.sample(sample);
            let y = out.sample_mut(sample);
            for ch in 0..c {
                let (g, b) = (self.scale.data()[ch], self.offset.data()[ch]);
                for (dst, &v) in y[ch * plane..(ch + 1) * plane].iter_mut().zip(&xh[ch * plane..(ch + 1) * plane]) {
                    *dst = g * v + b;
                }
            }
        }

        let keep = self.momentum;
        let new = T::one() - keep;
        for ch in 0..c {
            let rm = self.running_mean.data_mut();
            rm[ch] = keep * rm[ch] + new * mean[ch];
            let rv = self.running_var.data_mut();
            rv[ch] = keep * rv[ch] + new * var[ch];
        }

        (out, BnCache { xhat, inv_std })
    }

    pub fn forward_infer(&self, input: &Tensor<T>) -> Tensor<T> {
        let (n, c, h, w) = batch_dims(input);
        assert_eq!(c, self.channels(), "batchnorm channel mismatch");
        let plane = h * w;
        let mut out = Tensor::zeros(input.shape());
        for sample in 0..n {
            let x = input.sample(sample);
            let y = out.sample_mut(sample);
            for ch in 0..c {
                let is = T::one() / (self.running_var.data()[ch] + self.epsilon).sqrt();
                let g = self.scale.data()[ch] * is;
                let b = self.offset.data()[ch] - self.running_mean.data()[ch] * g;
                for (dst, &v) in y[ch * plane..(ch + 1) * plane].iter_mut().zip(&x[ch * plane..(ch + 1) * plane]) {
                    *dst = g * v + b;
                }
            }
        }
        out
    }

    pub fn backward(&self, cache: &BnCache<T>, grad_out: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Tensor<T>) {
        let (n, c, h, w) = batch_dims(grad_out);
        let plane = h * w;
        let count = T::from(n * plane).unwrap();

        let mut grad_scale = Tensor::zeros(&[c]);
        let mut grad_offset = Tensor::zeros(&[c]);
        for sample in 0..n {
            let g = grad_out.sample(sample);
            let xh = cache.xhat.sample(sample);
            for ch in 0..c {
                for (&gv, &xv) in g[ch * plane..(ch + 1) * plane].iter().zip(&xh[ch * plane..(ch + 1) * plane]) {
                    grad_scale.data_mut()[ch] += gv * xv;
                    grad_offset.data_mut()[ch] += gv;
                }
            }
        }

        // dL/dx = (scale · inv_std) · (g − mean(g) − xhat · mean(g·xhat))
        let mut grad_input = Tensor::zeros(grad_out.shape());
        let mean_g: Vec<T> = grad_offset.data().iter().map(|&v| v / count).collect();
        let mean_gx: Vec<T> = grad_scale.data().iter().map(|&v| v / count).collect();
        for sample in 0..n {
            let g = grad_out.sample(sample);
            let xh = cache.xhat.sample(sample);
            let gi = grad_input.sample_mut(sample);
            for ch in 0..c {
                let coeff = self.scale.data()[ch] * cache.inv_std[ch];
                let (mg, mgx) = (mean_g[ch], mean_gx[ch]);
                for ((dst, &gv), &xv) in gi[ch * plane..(ch + 1) * plane]
                    .iter_mut()
                    .zip(&g[ch * plane..(ch + 1) * plane])
                    .zip(&xh[ch * plane..(ch + 1) * plane])
                {
                    *dst = coeff * (gv - mg - xv * mgx);
                }
            }
        }

        (grad_input, grad_scale, grad_offset)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infer_with_unit_stats_is_identity_up_to_epsilon() {
        let mut bn = BatchNorm::<f64>::new(2);
        bn.epsilon = 0.0;
        let x = Tensor::from_vec(&[1, 2, 1, 2], vec![1.0, -2.0, 0.5, 3.0]);
        let y = bn.forward_infer(&x);
        for (a, b) in x.data().iter().zip(y.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn train_mode_standardises_each_map() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor::from_vec(&[2, 1, 1, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let (y, _) = bn.forward_train(&x);
        let mean: f64 = y.data().iter().sum::<f64>() / 6.0;
        let var: f64 = y.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 6.0;
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-4); // epsilon shrinks the variance slightly
    }

    #[test]
    fn running_stats_track_batch_statistics() {
        let mut bn = BatchNorm::<f64>::new(1);
        let x = Tensor::from_vec(&[1, 1, 1, 4], vec![2.0, 2.0, 2.0, 2.0]);
        let _ = bn.forward_train(&x);
        // one step of EMA from (0, 1) toward (2, 0)
        assert!((bn.running_mean.data()[0] - 0.2).abs() < 1e-12);
        assert!((bn.running_var.data()[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn inference_is_affine() {
        let mut bn = BatchNorm::<f64>::new(1);
        bn.running_mean = Tensor::from_vec(&[1], vec![0.7]);
        bn.running_var = Tensor::from_vec(&[1], vec![2.3]);
        bn.scale = Tensor::from_vec(&[1], vec![1.4]);
        bn.offset = Tensor::from_vec(&[1], vec![-0.3]);
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![1.0, -2.0]);
        let y = Tensor::from_vec(&[1, 1, 1, 2], vec![0.25, 4.0]);
        let zero = Tensor::zeros(&[1, 1, 1, 2]);
        let (a, b) = (1.7, -0.6);
        let mixed = Tensor::from_vec(
            &[1, 1, 1, 2],
            x.data().iter().zip(y.data()).map(|(&xv, &yv)| a * xv + b * yv).collect(),
        );
        let lhs = bn.forward_infer(&mixed);
        let (fx, fy, f0) = (bn.forward_infer(&x), bn.forward_infer(&y), bn.forward_infer(&zero));
        for i in 0..2 {
            let rhs = a * fx.data()[i] + b * fy.data()[i] - (a + b - 1.0) * f0.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-10);
        }
    }
}
