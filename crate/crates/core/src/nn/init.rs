//! Parameter initialisation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Scaled uniform fan-in/fan-out ("Glorot") initialisation:
/// `U(−a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<T: Scalar>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..shape.iter().product::<usize>())
        .map(|_| T::from(rng.gen_range(-bound..bound)).unwrap())
        .collect();
    Tensor::from_vec(shape, data)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;

    #[test]
    fn values_stay_within_the_fan_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let t: Tensor<f64> = glorot_uniform(&[16, 4], 4, 16, &mut rng);
        let bound = (6.0f64 / 20.0).sqrt();
        assert!(t.data().iter().all(|v| v.abs() < bound));
    }

    #[test]
    fn equal_seeds_give_identical_tensors() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let ta: Tensor<f32> = glorot_uniform(&[8, 8], 8, 8, &mut a);
        let tb: Tensor<f32> = glorot_uniform(&[8, 8], 8, 8, &mut b);
        assert_eq!(ta.data(), tb.data());
    }
}
