use super::conv::accumulate;
use super::{mismatch, nhwc, Mode, Real, Tensor, TensorError};

/// Moving-average momentum for the running statistics.
pub const BN_MOMENTUM: f64 = 0.99;
/// Variance offset inside the square root.
pub const BN_EPSILON: f64 = 1e-3;

/// Per-channel batch normalization over the last axis.
///
/// `gamma` and `beta` are trainable; `moving_mean` and `moving_var` are running statistics
/// updated in training mode and used in inference mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub moving_mean: Tensor<T>,
    pub moving_var: Tensor<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<f64>,
    /// Whether batch statistics were used (training) rather than running statistics.
    batch_stats: bool,
    shape: Vec<usize>,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            moving_mean: Tensor::zeros(&[channels]),
            moving_var: Tensor::full(&[channels], T::one()),
            momentum: BN_MOMENTUM,
            epsilon: BN_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, input: &Tensor<T>) -> Result<[usize; 4], TensorError> {
        let dims = nhwc(input.shape())?;
        if dims[3] != self.channels() {
            return Err(mismatch(format!(
                "batch norm over {} channels, input has {}",
                self.channels(),
                dims[3]
            )));
        }
        Ok(dims)
    }

    /// Normalize `input`. Training mode uses batch statistics and updates the running
    /// averages; inference mode uses the running averages.
    pub fn forward(
        &mut self,
        input: &Tensor<T>,
        mode: Mode,
    ) -> Result<(Tensor<T>, BatchNormCache<T>), TensorError> {
        let [n, h, w, c] = self.check(input)?;
        let count = n * h * w;
        let (mean, var) = match mode {
            Mode::Train => {
                if count < 2 {
                    return Err(mismatch(format!(
                        "training-mode batch norm needs at least 2 values per channel, got {count}"
                    )));
                }
                let (mean, var) = channel_moments(input.data(), c);
                let keep = self.momentum;
                for ch in 0..c {
                    let mm = &mut self.moving_mean.data_mut()[ch];
                    *mm = T::from_f64(keep * mm.as_f64() + (1.0 - keep) * mean[ch]);
                    let mv = &mut self.moving_var.data_mut()[ch];
                    *mv = T::from_f64(keep * mv.as_f64() + (1.0 - keep) * var[ch]);
                }
                (mean, var)
            }
            Mode::Infer => (
                self.moving_mean.data().iter().map(|v| v.as_f64()).collect(),
                self.moving_var.data().iter().map(|v| v.as_f64()).collect(),
            ),
        };
        Ok(self.normalize(input, &mean, &var, mode == Mode::Train))
    }

    /// Inference-mode forward without touching any state.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        self.check(input)?;
        let mean: Vec<f64> = self.moving_mean.data().iter().map(|v| v.as_f64()).collect();
        let var: Vec<f64> = self.moving_var.data().iter().map(|v| v.as_f64()).collect();
        Ok(self.normalize(input, &mean, &var, false).0)
    }

    fn normalize(
        &self,
        input: &Tensor<T>,
        mean: &[f64],
        var: &[f64],
        batch_stats: bool,
    ) -> (Tensor<T>, BatchNormCache<T>) {
        let c = self.channels();
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + self.epsilon).sqrt())
            .collect();
        // xhat = (x − mean)·inv_std, out = gamma·xhat + beta, with per-channel coefficients.
        let shift: Vec<T> = mean
            .iter()
            .zip(&inv_std)
            .map(|(m, s)| T::from_f64(-m * s))
            .collect();
        let scale: Vec<T> = inv_std.iter().map(|&s| T::from_f64(s)).collect();
        let gamma = self.gamma.data();
        let beta = self.beta.data();
        let mut xhat = vec![T::zero(); input.len()];
        let mut out = vec![T::zero(); input.len()];
        for ((px, xh), o) in input
            .data()
            .chunks_exact(c)
            .zip(xhat.chunks_exact_mut(c))
            .zip(out.chunks_exact_mut(c))
        {
            let coeffs = scale.iter().zip(&shift).zip(gamma.iter().zip(beta));
            for (((&x, z), y), ((&a, &sh), (&g, &b))) in px.iter().zip(xh).zip(o).zip(coeffs) {
                *z = x * a + sh;
                *y = g * *z + b;
            }
        }
        let shape = input.shape().to_vec();
        (
            Tensor::new(shape.clone(), out).expect("same shape as input"),
            BatchNormCache {
                xhat,
                inv_std,
                batch_stats,
                shape,
            },
        )
    }

    /// Accumulate `gamma`/`beta` gradients and return the input gradient.
    pub fn backward(
        &mut self,
        cache: &BatchNormCache<T>,
        grad_out: &Tensor<T>,
    ) -> Result<Tensor<T>, TensorError> {
        if grad_out.shape() != cache.shape.as_slice() {
            return Err(mismatch(
                "upstream gradient does not match batch norm output",
            ));
        }
        let c = self.channels();
        let count = (grad_out.len() / c) as f64;
        let mut sum_dy = vec![0f64; c];
        let mut sum_dy_xhat = vec![0f64; c];
        for (g, xh) in grad_out
            .data()
            .chunks_exact(c)
            .zip(cache.xhat.chunks_exact(c))
        {
            for (((&g, &x), sd), sdx) in g.iter().zip(xh).zip(&mut sum_dy).zip(&mut sum_dy_xhat) {
                *sd += g.as_f64();
                *sdx += g.as_f64() * x.as_f64();
            }
        }
        let dgamma = Tensor::new(
            vec![c],
            sum_dy_xhat.iter().map(|&v| T::from_f64(v)).collect(),
        )?;
        let dbeta = Tensor::new(vec![c], sum_dy.iter().map(|&v| T::from_f64(v)).collect())?;

        // dx = k_g·dy − k_0 − k_x·xhat per channel; the last two vanish with running statistics.
        let mut k_g = vec![T::zero(); c];
        let mut k_0 = vec![T::zero(); c];
        let mut k_x = vec![T::zero(); c];
        for ch in 0..c {
            let scale = self.gamma.data()[ch].as_f64() * cache.inv_std[ch];
            k_g[ch] = T::from_f64(scale);
            if cache.batch_stats {
                k_0[ch] = T::from_f64(scale * sum_dy[ch] / count);
                k_x[ch] = T::from_f64(scale * sum_dy_xhat[ch] / count);
            }
        }
        let mut dx = vec![T::zero(); grad_out.len()];
        for ((g, xh), d) in grad_out
            .data()
            .chunks_exact(c)
            .zip(cache.xhat.chunks_exact(c))
            .zip(dx.chunks_exact_mut(c))
        {
            let coeffs = k_g.iter().zip(&k_0).zip(&k_x);
            for (((&g, &x), d), ((&kg, &k0), &kx)) in g.iter().zip(xh).zip(d).zip(coeffs) {
                *d = kg * g - k0 - kx * x;
            }
        }
        accumulate(&mut self.gamma, &dgamma);
        accumulate(&mut self.beta, &dbeta);
        Tensor::new(cache.shape.clone(), dx)
    }
}

/// Per-channel mean and population variance, accumulated in f64.
fn channel_moments<T: Real>(data: &[T], c: usize) -> (Vec<f64>, Vec<f64>) {
    let count = (data.len() / c) as f64;
    let mut mean = vec![0f64; c];
    for px in data.chunks_exact(c) {
        for (m, v) in mean.iter_mut().zip(px) {
            *m += v.as_f64();
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0f64; c];
    for px in data.chunks_exact(c) {
        for ((s, v), m) in var.iter_mut().zip(px).zip(&mean) {
            let d = v.as_f64() - m;
            *s += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= count);
    (mean, var)
}
