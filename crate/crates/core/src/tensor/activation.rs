use super::{mismatch, Real, Tensor, TensorError};

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Gradient of ReLU given its input; the derivative at zero is taken as zero.
pub fn relu_backward<T: Real>(
    input: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if input.shape() != grad_out.shape() {
        return Err(mismatch("relu: upstream gradient shape"));
    }
    Tensor::new(
        input.shape().to_vec(),
        input
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
            .collect(),
    )
}

/// Logistic function evaluated without overflowing `exp` for large |x|.
///
/// The result stays strictly inside (0, 1): saturated values are pinned to the nearest
/// representable neighbours of 0 and 1.
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    let y = if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    };
    let below_one = T::one() - T::epsilon() / T::from_f64(2.0);
    y.max(T::min_positive_value()).min(below_one)
}

pub fn sigmoid<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(sigmoid_scalar)
}

/// Gradient of the sigmoid given its output `y`: `g·y·(1−y)`.
pub fn sigmoid_backward<T: Real>(
    output: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if output.shape() != grad_out.shape() {
        return Err(mismatch("sigmoid: upstream gradient shape"));
    }
    Tensor::new(
        output.shape().to_vec(),
        output
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&y, &g)| g * y * (T::one() - y))
            .collect(),
    )
}
