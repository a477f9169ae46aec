use super::{mismatch, nhwc, with_rank, Real, Tensor, TensorError};

/// Flat input index of the maximum for every pooled output element.
#[derive(Debug, Clone)]
pub struct PoolIndices {
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

/// 2×2 max pooling with stride 2. A trailing odd row or column is dropped; ties go to the
/// first element in row-major window order.
pub fn maxpool2x2<T: Real>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices), TensorError> {
    let [n, h, w, c] = nhwc(input.shape())?;
    if h < 2 || w < 2 {
        return Err(mismatch(format!("max pooling needs H, W ≥ 2, got {h}×{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let x = input.data();
    let mut out = Vec::with_capacity(n * oh * ow * c);
    let mut argmax = Vec::with_capacity(n * oh * ow * c);
    for b in 0..n {
        for y in 0..oh {
            for xw in 0..ow {
                for ch in 0..c {
                    let mut best = ((b * h + 2 * y) * w + 2 * xw) * c + ch;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = ((b * h + 2 * y + dy) * w + 2 * xw + dx) * c + ch;
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                    argmax.push(best);
                    out.push(x[best]);
                }
            }
        }
    }
    let output_shape = with_rank(input.shape(), [n, oh, ow, c]);
    Ok((
        Tensor::new(output_shape.clone(), out)?,
        PoolIndices {
            argmax,
            input_shape: input.shape().to_vec(),
            output_shape,
        },
    ))
}

/// Route each upstream gradient to the input element that won its window.
pub fn maxpool2x2_backward<T: Real>(
    indices: &PoolIndices,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    if grad_out.shape() != indices.output_shape.as_slice() {
        return Err(mismatch("upstream gradient does not match pooled output"));
    }
    let mut dx = Tensor::zeros(&indices.input_shape);
    let d = dx.data_mut();
    for (&i, &g) in indices.argmax.iter().zip(grad_out.data()) {
        d[i] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picks_window_max() {
        let x = Tensor::new(vec![2, 2, 1], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2x2(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
        let g = maxpool2x2_backward(&idx, &Tensor::full(&[1, 1, 1], 1.0)).unwrap();
        assert_eq!(g.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn odd_dims_floor() {
        let x = Tensor::<f32>::zeros(&[1, 187, 96, 2]);
        let (y, _) = maxpool2x2(&x).unwrap();
        assert_eq!(y.shape(), &[1, 93, 48, 2]);
    }

    #[test]
    fn ties_route_to_first() {
        let x = Tensor::new(vec![2, 2, 1], vec![5.0f64; 4]).unwrap();
        let (_, idx) = maxpool2x2(&x).unwrap();
        let g = maxpool2x2_backward(&idx, &Tensor::full(&[1, 1, 1], 2.0)).unwrap();
        assert_eq!(g.data(), &[2.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn too_small_rejected() {
        assert!(maxpool2x2(&Tensor::<f64>::zeros(&[1, 5, 1])).is_err());
    }

    #[test]
    fn channel_permutation_commutes() {
        let x = Tensor::from_fn(&[1, 4, 6, 3], |i| ((i * 37) % 23) as f64);
        let perm = [2, 0, 1];
        let permuted = Tensor::from_fn(&[1, 4, 6, 3], |i| x.data()[i - i % 3 + perm[i % 3]]);
        let (a, _) = maxpool2x2(&x).unwrap();
        let (b, _) = maxpool2x2(&permuted).unwrap();
        for i in 0..b.len() {
            assert_eq!(b.data()[i], a.data()[i - i % 3 + perm[i % 3]]);
        }
    }
}
