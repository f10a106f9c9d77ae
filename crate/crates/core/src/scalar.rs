//! Scalar abstraction for the numeric core.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point element type the toolkit is generic over.
///
/// Implemented for `f32` (the training/runtime default) and `f64` (used by
/// the gradient-check and enumeration oracles in the test suites).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + rustfft::FftNum
    + 'static
{
    /// Element type tag stored in the tensor container format.
    const DTYPE: &'static str;

    /// General strided matrix product `C = alpha * A B + beta * C` with
    /// `A: m×k`, `B: k×n`, `C: m×n`; `rs*`/`cs*` are row/column strides in
    /// elements.
    ///
    /// # Safety
    /// Every `(row, col)` index reachable through the strides must be in
    /// bounds for the corresponding slice; the safe wrappers below validate
    /// the dense layouts used in this crate.
    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    unsafe fn gemm_strided(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `C = alpha * A B + beta * C`, all operands dense row-major.
pub fn gemm<T: Scalar>(m: usize, k: usize, n: usize, alpha: T, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert_eq!(a.len(), m * k, "gemm: lhs length");
    assert_eq!(b.len(), k * n, "gemm: rhs length");
    assert_eq!(c.len(), m * n, "gemm: out length");
    unsafe {
        T::gemm_strided(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C = alpha * A Bᵀ + beta * C` where `b` is stored row-major as `n×k`.
pub fn gemm_nt<T: Scalar>(m: usize, k: usize, n: usize, alpha: T, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert_eq!(a.len(), m * k, "gemm_nt: lhs length");
    assert_eq!(b.len(), n * k, "gemm_nt: rhs length");
    assert_eq!(c.len(), m * n, "gemm_nt: out length");
    unsafe {
        T::gemm_strided(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `C = alpha * Aᵀ B + beta * C` where `a` is stored row-major as `k×m`.
pub fn gemm_tn<T: Scalar>(m: usize, k: usize, n: usize, alpha: T, a: &[T], b: &[T], beta: T, c: &mut [T]) {
    assert_eq!(a.len(), k * m, "gemm_tn: lhs length");
    assert_eq!(b.len(), k * n, "gemm_tn: rhs length");
    assert_eq!(c.len(), m * n, "gemm_tn: out length");
    unsafe {
        T::gemm_strided(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive_product() {
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [7.0f64, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3×2
        let mut c = [0.0f64; 4];
        gemm(2, 3, 2, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn gemm_applies_alpha_and_beta() {
        let a = [1.0f32, 0.0, 0.0, 1.0]; // identity 2×2
        let b = [3.0f32, 4.0, 5.0, 6.0];
        let mut c = [1.0f32; 4];
        gemm(2, 2, 2, 2.0, &a, &b, 1.0, &mut c);
        assert_eq!(c, [7.0, 9.0, 11.0, 13.0]);
    }

    #[test]
    fn transposed_variants_agree_with_explicit_transpose() {
        // A: 2×3, B stored 2×3 → A Bᵀ is 2×2.
        let a = [1.0f64, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0f64, 0.0, 1.0, 0.0, 2.0, 0.0];
        let mut c = [0.0f64; 4];
        gemm_nt(2, 3, 2, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, [4.0, 4.0, 10.0, 10.0]);

        // Aᵀ where a stored 3×2 → (2×3)·B with B: 3×1.
        let a = [1.0f64, 4.0, 2.0, 5.0, 3.0, 6.0];
        let b = [1.0f64, 1.0, 1.0];
        let mut c = [0.0f64; 2];
        gemm_tn(2, 3, 1, 1.0, &a, &b, 0.0, &mut c);
        assert_eq!(c, [6.0, 15.0]);
    }
}
