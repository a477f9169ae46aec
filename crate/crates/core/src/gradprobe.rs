//! Finite-difference probes for every differentiable op and for a full convolution block.
//!
//! Each probe draws a random point (inputs and parameters in f64), forms the scalar
//! `L = Σ w ⊙ op(x)` with fixed random weights `w`, and compares the analytic gradient of `L`
//! against central differences via [`gradient_check`]. Points are drawn away from kinks
//! (ReLU at zero, max-pool ties, probability clipping) so the finite differences are valid.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Block;
use crate::tensor::{
    bce_backward, bce_loss, conv2d, conv2d_backward, dense, dense_backward, dropout,
    dropout_backward, gradient_check, maxpool2x2, maxpool2x2_backward, relu, relu_backward,
    sigmoid, sigmoid_backward, sigmoid_bce_logit_grad, BatchNorm, GradCheckReport, Mode, Tensor,
    TensorError,
};

/// Largest accepted `|analytic − numeric| / max(1, |numeric|)`.
pub const PROBE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Probe {
    Conv2d,
    Relu,
    BatchNorm,
    MaxPool,
    Dropout,
    Dense,
    Sigmoid,
    Bce,
    SigmoidBce,
    Block,
}

impl Probe {
    pub const ALL: [Probe; 10] = [
        Probe::Conv2d,
        Probe::Relu,
        Probe::BatchNorm,
        Probe::MaxPool,
        Probe::Dropout,
        Probe::Dense,
        Probe::Sigmoid,
        Probe::Bce,
        Probe::SigmoidBce,
        Probe::Block,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Probe::Conv2d => "conv2d 3x3",
            Probe::Relu => "relu",
            Probe::BatchNorm => "batch norm (train)",
            Probe::MaxPool => "max pool 2x2",
            Probe::Dropout => "dropout (fixed mask)",
            Probe::Dense => "dense",
            Probe::Sigmoid => "sigmoid",
            Probe::Bce => "binary cross-entropy",
            Probe::SigmoidBce => "sigmoid + bce (logit gradient)",
            Probe::Block => "conv block",
        }
    }
}

/// Worst result over all points of one probe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub probe: Probe,
    pub points: usize,
    pub parameters: usize,
    pub worst: GradCheckReport,
}

impl ProbeResult {
    pub fn passed(&self) -> bool {
        self.worst.passed()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Uniform values kept at least `gap` away from zero.
fn away_from_zero<R: Rng + ?Sized>(rng: &mut R, n: usize, gap: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.random_range(gap..1.0);
            if rng.random::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect()
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).expect("probe shapes are consistent")
}

fn weighted_sum(y: &Tensor<f64>, w: &[f64]) -> f64 {
    y.data().iter().zip(w).map(|(a, b)| a * b).sum()
}

/// Slice `x` into consecutive pieces of the given lengths.
fn parts<'a>(x: &'a [f64], sizes: &[usize]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(sizes.len());
    let mut at = 0;
    for &s in sizes {
        out.push(&x[at..at + s]);
        at += s;
    }
    out
}

type Objective = Box<dyn FnMut(&[f64]) -> (f64, Vec<f64>)>;

/// A random point and the objective for `probe`.
fn build<R: Rng + ?Sized>(probe: Probe, rng: &mut R) -> (Vec<f64>, Objective) {
    match probe {
        Probe::Conv2d => {
            let (xs, ks, n_out) = ([2, 4, 5, 2], [3, 3, 2, 3], 2 * 4 * 5 * 3);
            let sizes = [80, 54, 3];
            let point = uniform(rng, sizes.iter().sum(), -1.0, 1.0);
            let w = uniform(rng, n_out, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let p = parts(x, &sizes);
                let (input, kernel) = (t(&xs, p[0]), t(&ks, p[1]));
                let y = conv2d(&input, &kernel, &t(&[3], p[2])).expect("conv");
                let g =
                    conv2d_backward(&input, &kernel, &t(y.shape(), &w), true).expect("conv bwd");
                let mut grad = g.input.expect("input gradient").into_data();
                grad.extend(g.kernel.data());
                grad.extend(g.bias.data());
                (weighted_sum(&y, &w), grad)
            };
            (point, Box::new(f))
        }
        Probe::Relu => {
            let point = away_from_zero(rng, 30, 0.05);
            let w = uniform(rng, 30, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let input = t(&[30], x);
                let y = relu(&input);
                let g = relu_backward(&input, &t(&[30], &w)).expect("relu bwd");
                (weighted_sum(&y, &w), g.into_data())
            };
            (point, Box::new(f))
        }
        Probe::BatchNorm => {
            let shape = [3, 2, 2, 3];
            let sizes = [36, 3, 3];
            let mut point = uniform(rng, 36, -2.0, 2.0);
            point.extend(uniform(rng, 3, 0.5, 1.5));
            point.extend(uniform(rng, 3, -0.5, 0.5));
            let w = uniform(rng, 36, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let p = parts(x, &sizes);
                let mut bn = BatchNorm::<f64>::new(3);
                bn.gamma = t(&[3], p[1]);
                bn.beta = t(&[3], p[2]);
                let (y, cache) = bn.forward(&t(&shape, p[0]), Mode::Train).expect("bn");
                let dx = bn.backward(&cache, &t(&shape, &w)).expect("bn bwd");
                let mut grad = dx.into_data();
                grad.extend(bn.gamma.grad().expect("gamma gradient"));
                grad.extend(bn.beta.grad().expect("beta gradient"));
                (weighted_sum(&y, &w), grad)
            };
            (point, Box::new(f))
        }
        Probe::MaxPool => {
            let shape = [2, 4, 4, 2];
            // Distinct levels 0.1 apart plus small jitter: no window has a near tie.
            let mut levels: Vec<f64> = (0..64).map(|i| i as f64 * 0.1).collect();
            levels.shuffle(rng);
            let point: Vec<f64> = levels
                .iter()
                .map(|v| v + rng.random_range(-0.02..0.02))
                .collect();
            let w = uniform(rng, 16, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let (y, idx) = maxpool2x2(&t(&shape, x)).expect("pool");
                let g = maxpool2x2_backward(&idx, &t(y.shape(), &w)).expect("pool bwd");
                (weighted_sum(&y, &w), g.into_data())
            };
            (point, Box::new(f))
        }
        Probe::Dropout => {
            let point = uniform(rng, 40, -1.0, 1.0);
            let w = uniform(rng, 40, -1.0, 1.0);
            let seed = rng.random::<u64>();
            let f = move |x: &[f64]| {
                let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
                let (y, mask) =
                    dropout(&t(&[40], x), 0.25, Mode::Train, &mut mask_rng).expect("dropout");
                let g = dropout_backward(&mask, &t(&[40], &w)).expect("dropout bwd");
                (weighted_sum(&y, &w), g.into_data())
            };
            (point, Box::new(f))
        }
        Probe::Dense => {
            let sizes = [12, 20, 5];
            let point = uniform(rng, 37, -1.0, 1.0);
            let w = uniform(rng, 15, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let p = parts(x, &sizes);
                let (input, weights) = (t(&[3, 4], p[0]), t(&[4, 5], p[1]));
                let y = dense(&input, &weights, &t(&[5], p[2])).expect("dense");
                let g = dense_backward(&input, &weights, &t(&[3, 5], &w)).expect("dense bwd");
                let mut grad = g.input.into_data();
                grad.extend(g.weights.data());
                grad.extend(g.bias.data());
                (weighted_sum(&y, &w), grad)
            };
            (point, Box::new(f))
        }
        Probe::Sigmoid => {
            let point = uniform(rng, 20, -4.0, 4.0);
            let w = uniform(rng, 20, -1.0, 1.0);
            let f = move |x: &[f64]| {
                let y = sigmoid(&t(&[20], x));
                let g = sigmoid_backward(&y, &t(&[20], &w)).expect("sigmoid bwd");
                (weighted_sum(&y, &w), g.into_data())
            };
            (point, Box::new(f))
        }
        Probe::Bce => {
            let point = uniform(rng, 12, 0.05, 0.95);
            let targets: Vec<f64> = (0..12).map(|_| rng.random_range(0..2) as f64).collect();
            let f = move |x: &[f64]| {
                let (p, tg) = (t(&[3, 4], x), t(&[3, 4], &targets));
                let loss = bce_loss(&p, &tg).expect("bce");
                (loss, bce_backward(&p, &tg).expect("bce bwd").into_data())
            };
            (point, Box::new(f))
        }
        Probe::SigmoidBce => {
            let point = uniform(rng, 12, -4.0, 4.0);
            let targets: Vec<f64> = (0..12).map(|_| rng.random_range(0..2) as f64).collect();
            let f = move |x: &[f64]| {
                let (p, tg) = (sigmoid(&t(&[3, 4], x)), t(&[3, 4], &targets));
                let loss = bce_loss(&p, &tg).expect("bce");
                (
                    loss,
                    sigmoid_bce_logit_grad(&p, &tg)
                        .expect("logit grad")
                        .into_data(),
                )
            };
            (point, Box::new(f))
        }
        Probe::Block => {
            let (xs, cin, cout) = ([2, 4, 4, 2], 2, 3);
            let sizes = [64, 9 * cin * cout, cout, cout, cout];
            let mut point = uniform(rng, 64 + 9 * cin * cout + cout, -1.0, 1.0);
            point.extend(uniform(rng, cout, 0.5, 1.5));
            point.extend(uniform(rng, cout, -0.5, 0.5));
            let w = uniform(rng, 2 * 2 * 2 * cout, -1.0, 1.0);
            let seed = rng.random::<u64>();
            let f = move |x: &[f64]| {
                let p = parts(x, &sizes);
                let mut block = Block::<f64>::new(cin, cout, 0.25);
                block.conv.kernel = t(&[3, 3, cin, cout], p[1]);
                block.conv.bias = t(&[cout], p[2]);
                block.bn.gamma = t(&[cout], p[3]);
                block.bn.beta = t(&[cout], p[4]);
                let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
                let (y, trace) = block
                    .forward(t(&xs, p[0]), Mode::Train, &mut mask_rng)
                    .expect("block");
                let dx = block
                    .backward(&trace, &t(y.shape(), &w), true)
                    .expect("block bwd")
                    .expect("input gradient");
                let mut grad = dx.into_data();
                for param in [
                    &block.conv.kernel,
                    &block.conv.bias,
                    &block.bn.gamma,
                    &block.bn.beta,
                ] {
                    grad.extend(param.grad().expect("parameter gradient"));
                }
                (weighted_sum(&y, &w), grad)
            };
            (point, Box::new(f))
        }
    }
}

/// Check `probe` at `points` random points and keep the worst.
pub fn run_probe<R: Rng + ?Sized>(
    probe: Probe,
    points: usize,
    rng: &mut R,
) -> Result<ProbeResult, TensorError> {
    let mut worst: Option<GradCheckReport> = None;
    let mut parameters = 0;
    for _ in 0..points {
        let (point, objective) = build(probe, rng);
        parameters = point.len();
        let r = gradient_check(objective, &point, PROBE_TOLERANCE)?;
        if worst.is_none_or(|w| r.max_rel_error > w.max_rel_error) {
            worst = Some(r);
        }
    }
    Ok(ProbeResult {
        probe,
        points,
        parameters,
        worst: worst.unwrap_or(GradCheckReport {
            max_rel_error: 0.0,
            worst_index: 0,
            tolerance: PROBE_TOLERANCE,
        }),
    })
}

/// Every probe, `points` points each, from one seeded generator.
pub fn run_all(points: usize, seed: u64) -> Result<Vec<ProbeResult>, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Probe::ALL
        .iter()
        .map(|&p| run_probe(p, points, &mut rng))
        .collect()
}
