//! Batch loss: categorical cross-entropy plus an L2 penalty on the
//! parameters.

use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Probabilities below this floor are clamped before taking the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// `−(1/D) Σᵢ yᵢ · log ỹᵢ` over a `[n, k]` batch of predicted distributions
/// and one-hot targets.
pub fn cross_entropy<T: Scalar>(predictions: &Tensor<T>, targets: &Tensor<T>) -> T {
    assert_eq!(predictions.shape(), targets.shape(), "prediction/target shape mismatch");
    let n = predictions.shape()[0];
    let floor = T::from(LOG_FLOOR).unwrap();
    let mut total = T::zero();
    for (&p, &y) in predictions.data().iter().zip(targets.data()) {
        if y > T::zero() {
            total -= y * p.max(floor).ln();
        }
    }
    total / T::from(n).unwrap()
}

/// Gradient of [`cross_entropy`] with respect to the predictions.
pub fn cross_entropy_grad<T: Scalar>(predictions: &Tensor<T>, targets: &Tensor<T>) -> Tensor<T> {
    let n = predictions.shape()[0];
    let floor = T::from(LOG_FLOOR).unwrap();
    let scale = T::one() / T::from(n).unwrap();
    let mut grad = Tensor::zeros(predictions.shape());
    for ((g, &p), &y) in grad.data_mut().iter_mut().zip(predictions.data()).zip(targets.data()) {
        if y > T::zero() {
            *g = -y / p.max(floor) * scale;
        }
    }
    grad
}

/// Euclidean norm of all parameter tensors viewed as one vector.
pub fn l2_norm<'a, T: Scalar>(params: impl IntoIterator<Item = &'a Tensor<T>>) -> T {
    params
        .into_iter()
        .map(|t| t.sq_sum())
        .fold(T::zero(), |acc, v| acc + v)
        .sqrt()
}

/// The full training criterion: cross-entropy plus `λ · ‖θ‖₂` (the norm
/// itself, not its square).
pub fn cross_entropy_l2_loss<'a, T: Scalar>(
    predictions: &Tensor<T>,
    targets: &Tensor<T>,
    params: impl IntoIterator<Item = &'a Tensor<T>>,
    lambda: T,
) -> T {
    cross_entropy(predictions, targets) + lambda * l2_norm(params)
}

/// Adds `λ ∂‖θ‖₂/∂θ = λ θ / ‖θ‖₂` to existing parameter gradients.
/// The zero-parameter-vector subgradient is taken as 0.
pub fn add_l2_norm_grad<'a, T: Scalar>(
    params: impl IntoIterator<Item = &'a Tensor<T>>,
    grads: impl IntoIterator<Item = &'a mut Tensor<T>>,
    lambda: T,
) {
    let params: Vec<&Tensor<T>> = params.into_iter().collect();
    let norm = l2_norm(params.iter().copied());
    if norm <= T::zero() {
        return;
    }
    let coeff = lambda / norm;
    for (param, grad) in params.into_iter().zip(grads) {
        for (g, &p) in grad.data_mut().iter_mut().zip(param.data()) {
            *g += coeff * p;
        }
    }
}
