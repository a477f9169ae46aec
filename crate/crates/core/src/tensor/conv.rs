//! 3×3 "same" convolution with stride 1, computed as im2col followed by a matrix multiply.
//!
//! Kernels are laid out `3×3×Cin×Cout`, which makes them directly usable as a
//! `(9·Cin)×Cout` matrix against im2col rows ordered `(ky, kx, cin)`.

use super::{gemm, mismatch, nhwc, with_rank, Real, Tensor, TensorError};

const K: usize = 3;

fn check_shapes<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
) -> Result<([usize; 4], usize), TensorError> {
    let dims = nhwc(input.shape())?;
    let cin = dims[3];
    match *kernel.shape() {
        [K, K, kc, cout] if kc == cin => Ok((dims, cout)),
        [K, K, kc, _] => Err(mismatch(format!(
            "kernel expects {kc} input channels, input has {cin}"
        ))),
        ref other => Err(mismatch(format!(
            "kernel must be 3×3×Cin×Cout, got {other:?}"
        ))),
    }
}

/// Fill `col` (`(h·w)×(9·c)`) with the zero-padded 3×3 neighbourhoods of one sample.
fn im2col<T: Real>(sample: &[T], h: usize, w: usize, c: usize, col: &mut [T]) {
    let row_len = K * K * c;
    for y in 0..h {
        for x in 0..w {
            let row = &mut col[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            for ky in 0..K {
                let dst = &mut row[ky * K * c..(ky + 1) * K * c];
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    dst.fill(T::zero());
                    continue;
                }
                let line = sy as usize * w;
                if x >= 1 && x + 1 < w {
                    // The three taps of an interior row are contiguous in the input.
                    let src = (line + x - 1) * c;
                    dst.copy_from_slice(&sample[src..src + K * c]);
                    continue;
                }
                for kx in 0..K {
                    let part = &mut dst[kx * c..(kx + 1) * c];
                    let sx = x as isize + kx as isize - 1;
                    if sx < 0 || sx >= w as isize {
                        part.fill(T::zero());
                    } else {
                        let src = (line + sx as usize) * c;
                        part.copy_from_slice(&sample[src..src + c]);
                    }
                }
            }
        }
    }
}

/// Scatter-add im2col gradients back onto one sample's input gradient.
fn col2im<T: Real>(col: &[T], h: usize, w: usize, c: usize, out: &mut [T]) {
    let row_len = K * K * c;
    for y in 0..h {
        for x in 0..w {
            let row = &col[(y * w + x) * row_len..(y * w + x + 1) * row_len];
            for ky in 0..K {
                let sy = y as isize + ky as isize - 1;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                let line = sy as usize * w;
                let src = &row[ky * K * c..(ky + 1) * K * c];
                let (x0, k0) = if x == 0 { (0, 1) } else { (x - 1, 0) };
                let k1 = if x + 1 < w { K } else { K - 1 };
                let dst = (line + x0) * c;
                let len = (k1 - k0) * c;
                for (o, &g) in out[dst..dst + len].iter_mut().zip(&src[k0 * c..k1 * c]) {
                    *o += g;
                }
            }
        }
    }
}

/// Zero-padded 3×3 cross-correlation: `H×W×Cin → H×W×Cout` (optionally batched).
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    let ([n, h, w, cin], cout) = check_shapes(input, kernel)?;
    if bias.len() != cout {
        return Err(mismatch(format!(
            "bias has {} entries, expected {cout}",
            bias.len()
        )));
    }
    let hw = h * w;
    let kdim = K * K * cin;
    let mut out = vec![T::zero(); n * hw * cout];
    let mut col = vec![T::zero(); hw * kdim];
    for (sample, dst) in input
        .data()
        .chunks_exact(hw * cin)
        .zip(out.chunks_exact_mut(hw * cout))
    {
        for row in dst.chunks_exact_mut(cout) {
            row.copy_from_slice(bias.data());
        }
        im2col(sample, h, w, cin, &mut col);
        gemm(
            hw,
            kdim,
            cout,
            T::one(),
            &col,
            (kdim, 1),
            kernel.data(),
            (cout, 1),
            T::one(),
            dst,
            (cout, 1),
        );
    }
    Tensor::new(with_rank(input.shape(), [n, h, w, cout]), out)
}

/// Gradients of [`conv2d`] with respect to its three operands.
#[derive(Debug, Clone)]
pub struct Conv2dGrads<T> {
    pub input: Option<Tensor<T>>,
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Backward pass of [`conv2d`]. The input gradient is skipped when `need_input` is false
/// (first layer of a network).
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &Tensor<T>,
    need_input: bool,
) -> Result<Conv2dGrads<T>, TensorError> {
    let ([n, h, w, cin], cout) = check_shapes(input, kernel)?;
    if nhwc(grad_out.shape())? != [n, h, w, cout] {
        return Err(mismatch(format!(
            "upstream gradient {:?} does not match conv output",
            grad_out.shape()
        )));
    }
    let hw = h * w;
    let kdim = K * K * cin;
    let mut dk = vec![T::zero(); kdim * cout];
    let mut db = vec![T::zero(); cout];
    let mut dx = need_input.then(|| vec![T::zero(); input.len()]);
    let mut col = vec![T::zero(); hw * kdim];
    let mut dcol = vec![T::zero(); if need_input { hw * kdim } else { 0 }];

    for (idx, (sample, g)) in input
        .data()
        .chunks_exact(hw * cin)
        .zip(grad_out.data().chunks_exact(hw * cout))
        .enumerate()
    {
        for row in g.chunks_exact(cout) {
            for (b, &v) in db.iter_mut().zip(row) {
                *b += v;
            }
        }
        im2col(sample, h, w, cin, &mut col);
        // dK += colᵀ · g
        gemm(
            kdim,
            hw,
            cout,
            T::one(),
            &col,
            (1, kdim),
            g,
            (cout, 1),
            T::one(),
            &mut dk,
            (cout, 1),
        );
        if let Some(dx) = dx.as_mut() {
            // dcol = g · Kᵀ
            gemm(
                hw,
                cout,
                kdim,
                T::one(),
                g,
                (cout, 1),
                kernel.data(),
                (1, cout),
                T::zero(),
                &mut dcol,
                (kdim, 1),
            );
            col2im(
                &dcol,
                h,
                w,
                cin,
                &mut dx[idx * hw * cin..(idx + 1) * hw * cin],
            );
        }
    }
    Ok(Conv2dGrads {
        input: dx
            .map(|d| Tensor::new(input.shape().to_vec(), d))
            .transpose()?,
        kernel: Tensor::new(kernel.shape().to_vec(), dk)?,
        bias: Tensor::new(vec![cout], db)?,
    })
}

/// Convolution layer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub kernel: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Conv2d<T> {
    pub fn zeros(cin: usize, cout: usize) -> Self {
        Self {
            kernel: Tensor::zeros(&[K, K, cin, cout]),
            bias: Tensor::zeros(&[cout]),
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape()[3]
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        conv2d(input, &self.kernel, &self.bias)
    }

    /// Accumulate parameter gradients and return the input gradient if requested.
    pub fn backward(
        &mut self,
        input: &Tensor<T>,
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Result<Option<Tensor<T>>, TensorError> {
        let grads = conv2d_backward(input, &self.kernel, grad_out, need_input)?;
        accumulate(&mut self.kernel, &grads.kernel);
        accumulate(&mut self.bias, &grads.bias);
        Ok(grads.input)
    }
}

pub(crate) fn accumulate<T: Real>(param: &mut Tensor<T>, grad: &Tensor<T>) {
    for (g, &d) in param.grad_mut().iter_mut().zip(grad.data()) {
        *g += d;
    }
}
