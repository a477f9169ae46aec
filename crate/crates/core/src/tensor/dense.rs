use super::conv::accumulate;
use super::{gemm, mismatch, Real, Tensor, TensorError};

fn dims<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<(usize, usize, usize), TensorError> {
    match (input.shape(), weights.shape()) {
        (&[n, d], &[wd, u]) if d == wd => Ok((n, d, u)),
        (a, b) => Err(mismatch(format!(
            "dense: input {a:?} against weights {b:?}"
        ))),
    }
}

/// Affine map `input·weights + bias` for `N×D` inputs and `D×U` weights.
pub fn dense<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    let (n, d, u) = dims(input, weights)?;
    if bias.len() != u {
        return Err(mismatch(format!(
            "dense: bias has {} entries, expected {u}",
            bias.len()
        )));
    }
    let mut out: Vec<T> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
    gemm(
        n,
        d,
        u,
        T::one(),
        input.data(),
        (d, 1),
        weights.data(),
        (u, 1),
        T::one(),
        &mut out,
        (u, 1),
    );
    Tensor::new(vec![n, u], out)
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn dense_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<DenseGrads<T>, TensorError> {
    let (n, d, u) = dims(input, weights)?;
    if grad_out.shape() != [n, u] {
        return Err(mismatch("dense: upstream gradient shape"));
    }
    let g = grad_out.data();
    let mut dx = vec![T::zero(); n * d];
    gemm(
        n,
        u,
        d,
        T::one(),
        g,
        (u, 1),
        weights.data(),
        (1, u),
        T::zero(),
        &mut dx,
        (d, 1),
    );
    let mut dw = vec![T::zero(); d * u];
    gemm(
        d,
        n,
        u,
        T::one(),
        input.data(),
        (1, d),
        g,
        (u, 1),
        T::zero(),
        &mut dw,
        (u, 1),
    );
    let mut db = vec![T::zero(); u];
    for row in g.chunks_exact(u) {
        for (b, &v) in db.iter_mut().zip(row) {
            *b += v;
        }
    }
    Ok(DenseGrads {
        input: Tensor::new(vec![n, d], dx)?,
        weights: Tensor::new(vec![d, u], dw)?,
        bias: Tensor::new(vec![u], db)?,
    })
}

/// Fully connected layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, units: usize) -> Self {
        Self {
            weights: Tensor::zeros(&[inputs, units]),
            bias: Tensor::zeros(&[units]),
        }
    }

    pub fn units(&self) -> usize {
        self.bias.len()
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        dense(input, &self.weights, &self.bias)
    }

    pub fn backward(
        &mut self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>, TensorError> {
        let grads = dense_backward(input, &self.weights, grad_out)?;
        accumulate(&mut self.weights, &grads.weights);
        accumulate(&mut self.bias, &grads.bias);
        Ok(grads.input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_weights() {
        let x = Tensor::from_fn(&[2, 3], |i| i as f64 - 1.5);
        let w = Tensor::from_fn(&[3, 3], |i| if i % 4 == 0 { 1.0 } else { 0.0 });
        let y = dense(&x, &w, &Tensor::zeros(&[3])).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn hand_example() {
        let x = Tensor::new(vec![1, 2], vec![1.0f64, 2.0]).unwrap();
        let w = Tensor::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let b = Tensor::new(vec![1], vec![0.5]).unwrap();
        assert_eq!(dense(&x, &w, &b).unwrap().data(), &[3.5]);
    }

    #[test]
    fn zero_input_broadcasts_bias() {
        let x = Tensor::<f32>::zeros(&[3, 4]);
        let w = Tensor::from_fn(&[4, 2], |i| i as f32);
        let b = Tensor::new(vec![2], vec![0.25, -4.0]).unwrap();
        let y = dense(&x, &w, &b).unwrap();
        for row in y.data().chunks(2) {
            assert_eq!(row, &[0.25, -4.0]);
        }
    }

    #[test]
    fn shape_mismatch() {
        let x = Tensor::<f32>::zeros(&[3, 4]);
        let w = Tensor::<f32>::zeros(&[5, 2]);
        assert!(dense(&x, &w, &Tensor::zeros(&[2])).is_err());
        assert!(dense(&x, &Tensor::zeros(&[4, 2]), &Tensor::zeros(&[3])).is_err());
    }
}
