//! 2-d convolution (cross-correlation) with im2col + GEMM kernels.

use rayon::prelude::*;

use crate::scalar::{gemm, gemm_nt, gemm_tn, Scalar};

use super::tensor::Tensor;

/// Samples per parallel work unit. Fixed so that gradient reduction order
/// (and therefore the result) does not depend on the thread count.
const CHUNK: usize = 8;

/// Convolution layer operating on `[n, c, h, w]` batches.
///
/// `padded` selects "same" zero padding (odd kernels only); otherwise the
/// output shrinks to `h - kh + 1` × `w - kw + 1`. Convolution is implemented
/// as cross-correlation (no kernel flip).
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    /// `[c_out, c_in, kh, kw]`
    pub kernels: Tensor<T>,
    /// One bias per output channel; only the final classification layer
    /// carries one (elsewhere batch normalisation supplies the offset).
    pub bias: Option<Tensor<T>>,
    pub padded: bool,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(kernels: Tensor<T>, bias: Option<Tensor<T>>, padded: bool) -> Self {
        assert_eq!(kernels.shape().len(), 4, "conv kernels must be [c_out, c_in, kh, kw]");
        if padded {
            assert!(
                kernels.shape()[2] % 2 == 1 && kernels.shape()[3] % 2 == 1,
                "same-padding requires odd kernel sizes"
            );
        }
        if let Some(b) = &bias {
            assert_eq!(b.numel(), kernels.shape()[0], "one bias per output channel");
        }
        Conv2d { kernels, bias, padded }
    }

    pub fn c_out(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn c_in(&self) -> usize {
        self.kernels.shape()[1]
    }

    fn kh(&self) -> usize {
        self.kernels.shape()[2]
    }

    fn kw(&self) -> usize {
        self.kernels.shape()[3]
    }

    fn padding(&self) -> (usize, usize) {
        if self.padded {
            ((self.kh() - 1) / 2, (self.kw() - 1) / 2)
        } else {
            (0, 0)
        }
    }

    /// Output spatial size for an `h`×`w` input.
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        if self.padded {
            (h, w)
        } else {
            assert!(h + 1 > self.kh() && w + 1 > self.kw(), "kernel larger than input");
            (h - self.kh() + 1, w - self.kw() + 1)
        }
    }

    pub fn forward(&self, input: &Tensor<T>) -> Tensor<T> {
        let (n, c_in, h, w) = batch_dims(input);
        assert_eq!(c_in, self.c_in(), "channel mismatch: input {c_in} vs kernels {}", self.c_in());
        let (oh, ow) = self.out_hw(h, w);
        let (c_out, k, s) = (self.c_out(), c_in * self.kh() * self.kw(), oh * ow);

        let mut out = Tensor::zeros(&[n, c_out, oh, ow]);
        let in_stride = c_in * h * w;
        out.data_mut()
            .par_chunks_mut(c_out * s * CHUNK)
            .enumerate()
            .for_each(|(chunk_idx, out_chunk)| {
                let mut cols = vec![T::zero(); k * s];
                for (local, out_sample) in out_chunk.chunks_mut(c_out * s).enumerate() {
                    let sample = chunk_idx * CHUNK + local;
                    let x = &input.data()[sample * in_stride..(sample + 1) * in_stride];
                    self.im2col(x, h, w, oh, ow, &mut cols);
                    gemm(c_out, k, s, T::one(), self.kernels.data(), &cols, T::zero(), out_sample);
                    if let Some(bias) = &self.bias {
                        for (ch, &b) in bias.data().iter().enumerate() {
                            for v in &mut out_sample[ch * s..(ch + 1) * s] {
                                *v += b;
                            }
                        }
                    }
                }
            });
        out
    }

    /// Gradients of the scalar loss w.r.t. input, kernels and bias, given the
    /// gradient w.r.t. the output and the cached forward input.
    pub fn backward(&self, input: &Tensor<T>, grad_out: &Tensor<T>) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
        let (n, c_in, h, w) = batch_dims(input);
        let (oh, ow) = self.out_hw(h, w);
        assert_eq!(
            grad_out.shape(),
            &[n, self.c_out(), oh, ow],
            "grad_out shape mismatch in conv backward"
        );
        let (c_out, k, s) = (self.c_out(), c_in * self.kh() * self.kw(), oh * ow);
        let in_stride = c_in * h * w;
        let out_stride = c_out * s;

        let mut grad_input = Tensor::zeros(input.shape());
        let partial_kernels: Vec<Vec<T>> = grad_input
            .data_mut()
            .par_chunks_mut(in_stride * CHUNK)
            .enumerate()
            .map(|(chunk_idx, gi_chunk)| {
                let mut cols = vec![T::zero(); k * s];
                let mut grad_cols = vec![T::zero(); k * s];
                let mut gk = vec![T::zero(); c_out * k];
                for (local, gi_sample) in gi_chunk.chunks_mut(in_stride).enumerate() {
                    let sample = chunk_idx * CHUNK + local;
                    let x = &input.data()[sample * in_stride..(sample + 1) * in_stride];
                    let go = &grad_out.data()[sample * out_stride..(sample + 1) * out_stride];
                    // dK += dY · colsᵀ
                    self.im2col(x, h, w, oh, ow, &mut cols);
                    gemm_nt(c_out, s, k, T::one(), go, &cols, T::one(), &mut gk);
                    // dX = col2im(Kᵀ · dY)
                    gemm_tn(k, c_out, s, T::one(), self.kernels.data(), go, T::zero(), &mut grad_cols);
                    self.col2im(&grad_cols, h, w, oh, ow, gi_sample);
                }
                gk
            })
            .collect();

        let mut grad_kernels = Tensor::zeros(self.kernels.shape());
        for partial in partial_kernels {
            for (dst, src) in grad_kernels.data_mut().iter_mut().zip(partial) {
                *dst += src;
            }
        }

        let grad_bias = self.bias.as_ref().map(|_| {
            let mut gb = Tensor::zeros(&[c_out]);
            for sample in 0..n {
                let go = &grad_out.data()[sample * out_stride..(sample + 1) * out_stride];
                for (ch, gbc) in gb.data_mut().iter_mut().enumerate() {
                    for &g in &go[ch * s..(ch + 1) * s] {
                        *gbc += g;
                    }
                }
            }
            gb
        });

        (grad_input, grad_kernels, grad_bias)
    }

    /// Patch matrix `[c_in·kh·kw, oh·ow]` for one `[c_in, h, w]` sample.
    fn im2col(&self, x: &[T], h: usize, w: usize, oh: usize, ow: usize, cols: &mut [T]) {
        let (ph, pw) = self.padding();
        let (kh, kw) = (self.kh(), self.kw());
        let c_in = self.c_in();
        for ci in 0..c_in {
            let plane = &x[ci * h * w..(ci + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = ((ci * kh + ki) * kw + kj) * oh * ow;
                    // valid ox range so that ix = ox + kj - pw stays inside [0, w)
                    let ox0 = pw.saturating_sub(kj);
                    let ox1 = ow.min((w + pw).saturating_sub(kj));
                    for oy in 0..oh {
                        let dst = &mut cols[row + oy * ow..row + (oy + 1) * ow];
                        let iy = oy + ki;
                        if iy < ph || iy - ph >= h {
                            dst.fill(T::zero());
                            continue;
                        }
                        let iy = iy - ph;
                        dst[..ox0].fill(T::zero());
                        dst[ox1..].fill(T::zero());
                        if ox1 > ox0 {
                            let ix0 = ox0 + kj - pw;
                            dst[ox0..ox1].copy_from_slice(&plane[iy * w + ix0..iy * w + ix0 + (ox1 - ox0)]);
                        }
                    }
                }
            }
        }
    }

    /// Scatter-add inverse of [`Self::im2col`]; `grad_x` must be zeroed.
    fn col2im(&self, grad_cols: &[T], h: usize, w: usize, oh: usize, ow: usize, grad_x: &mut [T]) {
        let (ph, pw) = self.padding();
        let (kh, kw) = (self.kh(), self.kw());
        let c_in = self.c_in();
        grad_x.fill(T::zero());
        for ci in 0..c_in {
            let plane = &mut grad_x[ci * h * w..(ci + 1) * h * w];
            for ki in 0..kh {
                for kj in 0..kw {
                    let row = ((ci * kh + ki) * kw + kj) * oh * ow;
                    let ox0 = pw.saturating_sub(kj);
                    let ox1 = ow.min((w + pw).saturating_sub(kj));
                    if ox1 <= ox0 {
                        continue;
                    }
                    for oy in 0..oh {
                        let iy = oy + ki;
                        if iy < ph || iy - ph >= h {
                            continue;
                        }
                        let iy = iy - ph;
                        let src = &grad_cols[row + oy * ow + ox0..row + oy * ow + ox1];
                        let ix0 = ox0 + kj - pw;
                        let dst = &mut plane[iy * w + ix0..iy * w + ix0 + (ox1 - ox0)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += *s;
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn batch_dims<T: Scalar>(t: &Tensor<T>) -> (usize, usize, usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 4, "expected [n, c, h, w] batch, got {s:?}");
    (s[0], s[1], s[2], s[3])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(kernels: Tensor<f64>, padded: bool) -> Conv2d<f64> {
        Conv2d::new(kernels, None, padded)
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_vec(&[1, 1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let layer = conv(Tensor::from_vec(&[1, 1, 1, 1], vec![1.0]), false);
        let y = layer.forward(&x);
        assert_eq!(y.shape(), &[1, 1, 2, 3]);
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn padded_conv_keeps_spatial_size() {
        let x = Tensor::from_vec(&[1, 1, 3, 3], (1..=9).map(|v| v as f64).collect());
        // 3×3 averaging kernel
        let layer = conv(Tensor::filled(&[1, 1, 3, 3], 1.0), true);
        let y = layer.forward(&x);
        assert_eq!(y.shape(), &[1, 1, 3, 3]);
        // centre = sum of all nine entries
        assert_eq!(y.data()[4], 45.0);
        // top-left corner only sees the 2×2 block {1,2,4,5}
        assert_eq!(y.data()[0], 12.0);
    }

    #[test]
    fn unpadded_conv_shrinks_output() {
        let x = Tensor::zeros(&[2, 3, 7, 5]);
        let layer = conv(Tensor::zeros(&[4, 3, 3, 3]), false);
        assert_eq!(layer.forward(&x).shape(), &[2, 4, 5, 3]);
    }

    #[test]
    fn cross_correlation_orientation() {
        // kernel picks the right neighbour: y[., x] = input[., x+1]
        let x = Tensor::from_vec(&[1, 1, 1, 3], vec![1.0, 2.0, 3.0]);
        let layer = conv(Tensor::from_vec(&[1, 1, 1, 2], vec![0.0, 1.0]), false);
        let y = layer.forward(&x);
        assert_eq!(y.data(), &[2.0, 3.0]);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_gradients() {
        let x = Tensor::filled(&[1, 2, 4, 4], 1.5);
        let layer = conv(Tensor::filled(&[3, 2, 3, 3], 0.5), false);
        let go = Tensor::zeros(&[1, 3, 2, 2]);
        let (gi, gk, _) = layer.backward(&x, &go);
        assert!(gi.data().iter().all(|&v| v == 0.0));
        assert!(gk.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        let x = Tensor::from_vec(&[1, 1, 3, 3], (0..9).map(|v| v as f64 * 0.3 - 1.0).collect());
        let layer = conv(Tensor::from_vec(&[1, 1, 2, 2], vec![0.5, -1.0, 2.0, 0.25]), false);
        let g = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, -2.0, 0.5, 3.0]);
        let g3 = Tensor::from_vec(&[1, 1, 2, 2], g.data().iter().map(|v| v * 3.0).collect());
        let (gi, gk, _) = layer.backward(&x, &g);
        let (gi3, gk3, _) = layer.backward(&x, &g3);
        for (a, b) in gi.data().iter().zip(gi3.data()) {
            assert!((a * 3.0 - b).abs() < 1e-12);
        }
        for (a, b) in gk.data().iter().zip(gk3.data()) {
            assert!((a * 3.0 - b).abs() < 1e-12);
        }
    }
}
