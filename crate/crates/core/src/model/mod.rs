//! The shared convolutional trunk with a mood head and an optional metadata head.
//!
//! Each of the five blocks is `conv 3×3 (ReLU) → batch norm → max pool 2×2 → dropout`.
//! For a 187×96 input the spatial size shrinks 93×48 → 46×24 → 23×12 → 11×6 → 5×3, and the
//! flattened 5·3·128 = 1920 features feed both heads directly. Only the mood head is used
//! at prediction time.

mod checkpoint;
mod config;
mod predict;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::tensor::{
    bce_loss, dropout, dropout_backward, maxpool2x2, maxpool2x2_backward, relu, relu_backward,
    sigmoid, sigmoid_bce_logit_grad, BatchNorm, BatchNormCache, Conv2d, Dense, DropoutMask, Mode,
    PoolIndices, Real, Tensor, TensorError,
};

pub use checkpoint::{
    checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, load_checkpoint_checked,
    save_checkpoint, CheckpointHeader,
};
pub use config::{default_alpha, AlphaSetting, ModelConfig};
pub use predict::{extract_window, predict_song, segment_starts};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("automatic alpha needs at least one metadata label")]
    ZeroMetadataLabels,
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("spectrogram has no frames")]
    EmptySpectrogram,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint i/o on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// One `conv → ReLU → batch norm → pool → dropout` block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<T> {
    pub conv: Conv2d<T>,
    pub bn: BatchNorm<T>,
    pub dropout_rate: f64,
}

/// Intermediate values of a block's training forward pass.
#[derive(Debug)]
pub struct BlockTrace<T> {
    input: Tensor<T>,
    pre_activation: Tensor<T>,
    bn: BatchNormCache<T>,
    pool: PoolIndices,
    dropout: DropoutMask<T>,
}

impl<T: Real> Block<T> {
    pub fn new(cin: usize, cout: usize, dropout_rate: f64) -> Self {
        Self {
            conv: Conv2d::zeros(cin, cout),
            bn: BatchNorm::new(cout),
            dropout_rate,
        }
    }

    /// Training-capable forward. The input is kept in the returned trace.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        input: Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Tensor<T>, BlockTrace<T>), TensorError> {
        let pre_activation = self.conv.forward(&input)?;
        let activated = relu(&pre_activation);
        let (normed, bn) = self.bn.forward(&activated, mode)?;
        let (pooled, pool) = maxpool2x2(&normed)?;
        let (out, dropout) = dropout(&pooled, self.dropout_rate, mode, rng)?;
        Ok((
            out,
            BlockTrace {
                input,
                pre_activation,
                bn,
                pool,
                dropout,
            },
        ))
    }

    /// Inference-mode forward that leaves the block untouched.
    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let activated = relu(&self.conv.forward(input)?);
        let normed = self.bn.infer(&activated)?;
        Ok(maxpool2x2(&normed)?.0)
    }

    /// Accumulate parameter gradients; returns the input gradient when `need_input`.
    pub fn backward(
        &mut self,
        trace: &BlockTrace<T>,
        grad_out: &Tensor<T>,
        need_input: bool,
    ) -> Result<Option<Tensor<T>>, TensorError> {
        let g = dropout_backward(&trace.dropout, grad_out)?;
        let g = maxpool2x2_backward(&trace.pool, &g)?;
        let g = self.bn.backward(&trace.bn, &g)?;
        let g = relu_backward(&trace.pre_activation, &g)?;
        self.conv.backward(&trace.input, &g, need_input)
    }

    fn trainable(&self) -> [&Tensor<T>; 4] {
        [
            &self.conv.kernel,
            &self.conv.bias,
            &self.bn.gamma,
            &self.bn.beta,
        ]
    }

    fn trainable_mut(&mut self) -> [&mut Tensor<T>; 4] {
        [
            &mut self.conv.kernel,
            &mut self.conv.bias,
            &mut self.bn.gamma,
            &mut self.bn.beta,
        ]
    }
}

/// Sigmoid outputs of both heads for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutput<T> {
    pub mood: Tensor<T>,
    pub metadata: Option<Tensor<T>>,
}

/// Everything [`Model::backward`] needs from a training forward pass.
#[derive(Debug)]
pub struct ForwardTrace<T> {
    blocks: Vec<BlockTrace<T>>,
    trunk_shape: Vec<usize>,
    flat: Tensor<T>,
}

/// Loss gradients with respect to the head logits. A missing metadata gradient means the
/// metadata head takes no part in the backward pass.
#[derive(Debug, Clone)]
pub struct HeadGradients<T> {
    pub mood: Tensor<T>,
    pub metadata: Option<Tensor<T>>,
}

/// Labels and provenance carried inside a checkpoint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, serde::Deserialize)]
pub struct ModelAnnotations {
    pub mood_labels: Vec<String>,
    pub mood_vocab_hash: String,
    pub metadata_vocab_hash: String,
    pub stats_file: Option<String>,
}

/// Trainable parameter counts, split by role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamReport {
    /// Convolution kernels and biases of the trunk.
    pub trunk_conv: usize,
    /// Batch-norm scale and shift of the trunk.
    pub trunk_batchnorm: usize,
    /// Batch-norm running statistics (not trainable).
    pub trunk_batchnorm_state: usize,
    pub mood_head: usize,
    pub metadata_head: usize,
}

impl ParamReport {
    pub fn total_trainable(&self) -> usize {
        self.trunk_conv + self.trunk_batchnorm + self.mood_head + self.metadata_head
    }
}

impl std::fmt::Display for ParamReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "trunk conv (kernel + bias)   {:>10}", self.trunk_conv)?;
        writeln!(
            f,
            "trunk batch norm (γ, β)      {:>10}",
            self.trunk_batchnorm
        )?;
        writeln!(
            f,
            "trunk batch norm state       {:>10}",
            self.trunk_batchnorm_state
        )?;
        writeln!(f, "mood head                    {:>10}", self.mood_head)?;
        writeln!(f, "metadata head                {:>10}", self.metadata_head)?;
        write!(
            f,
            "total trainable              {:>10}",
            self.total_trainable()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f32> {
    config: ModelConfig,
    blocks: Vec<Block<T>>,
    mood_head: Dense<T>,
    metadata_head: Option<Dense<T>>,
    pub annotations: ModelAnnotations,
}

fn glorot<T: Real, R: Rng + ?Sized>(
    tensor: &mut Tensor<T>,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in tensor.data_mut() {
        *v = T::from_f64(rng.random_range(-limit..limit));
    }
}

impl<T: Real> Model<T> {
    /// Build and initialize a model. Kernels and head weights are drawn Glorot-uniform in
    /// declaration order (blocks, mood head, metadata head); biases start at zero.
    pub fn build<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        let mut model = Self::zeros(config)?;
        for block in &mut model.blocks {
            let (cin, cout) = (block.conv.in_channels(), block.conv.out_channels());
            glorot(&mut block.conv.kernel, 9 * cin, 9 * cout, rng);
        }
        let flat = model.config.flatten_width()?;
        let heads = std::iter::once(&mut model.mood_head).chain(model.metadata_head.as_mut());
        for head in heads {
            let units = head.units();
            glorot(&mut head.weights, flat, units, rng);
        }
        Ok(model)
    }

    /// All-zero parameters with the right shapes (used when loading checkpoints).
    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let filters = config.filters_per_block;
        let blocks = (0..config.num_blocks)
            .map(|i| {
                let cin = if i == 0 { 1 } else { filters };
                let mut block = Block::new(cin, filters, config.dropout_rate);
                block.bn.momentum = config.bn_momentum;
                block.bn.epsilon = config.bn_epsilon;
                block
            })
            .collect();
        let flat = config.flatten_width()?;
        Ok(Self {
            mood_head: Dense::zeros(flat, config.n_mood),
            metadata_head: (config.n_metadata > 0).then(|| Dense::zeros(flat, config.n_metadata)),
            blocks,
            config,
            annotations: ModelAnnotations::default(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn blocks(&self) -> &[Block<T>] {
        &self.blocks
    }

    pub fn mood_head(&self) -> &Dense<T> {
        &self.mood_head
    }

    pub fn metadata_head(&self) -> Option<&Dense<T>> {
        self.metadata_head.as_ref()
    }

    /// Loss weight of the metadata task (0 when the head is absent).
    pub fn alpha(&self) -> f64 {
        self.config.resolved_alpha()
    }

    pub fn param_report(&self) -> ParamReport {
        let head = |d: &Dense<T>| d.weights.len() + d.bias.len();
        ParamReport {
            trunk_conv: self
                .blocks
                .iter()
                .map(|b| b.conv.kernel.len() + b.conv.bias.len())
                .sum(),
            trunk_batchnorm: self
                .blocks
                .iter()
                .map(|b| b.bn.gamma.len() + b.bn.beta.len())
                .sum(),
            trunk_batchnorm_state: self
                .blocks
                .iter()
                .map(|b| b.bn.moving_mean.len() + b.bn.moving_var.len())
                .sum(),
            mood_head: head(&self.mood_head),
            metadata_head: self.metadata_head.as_ref().map_or(0, head),
        }
    }

    /// Trainable tensors in checkpoint declaration order.
    pub fn trainable(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            for (name, t) in ["conv.kernel", "conv.bias", "bn.gamma", "bn.beta"]
                .into_iter()
                .zip(block.trainable())
            {
                out.push((format!("block{i}.{name}"), t));
            }
        }
        out.push(("mood.weights".into(), &self.mood_head.weights));
        out.push(("mood.bias".into(), &self.mood_head.bias));
        if let Some(h) = &self.metadata_head {
            out.push(("metadata.weights".into(), &h.weights));
            out.push(("metadata.bias".into(), &h.bias));
        }
        out
    }

    /// Same order as [`Model::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out: Vec<&mut Tensor<T>> = Vec::new();
        for block in &mut self.blocks {
            out.extend(block.trainable_mut());
        }
        out.push(&mut self.mood_head.weights);
        out.push(&mut self.mood_head.bias);
        if let Some(h) = &mut self.metadata_head {
            out.push(&mut h.weights);
            out.push(&mut h.bias);
        }
        out
    }

    /// Non-trainable running statistics in checkpoint declaration order.
    pub fn state(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.bn.moving_mean"), &block.bn.moving_mean));
            out.push((format!("block{i}.bn.moving_var"), &block.bn.moving_var));
        }
        out
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for block in &mut self.blocks {
            out.push(&mut block.bn.moving_mean);
            out.push(&mut block.bn.moving_var);
        }
        out
    }

    pub fn zero_grad(&mut self) {
        for t in self.trainable_mut() {
            t.zero_grad();
        }
    }

    fn check_batch(&self, batch: &Tensor<T>) -> Result<(), ModelError> {
        let c = &self.config;
        match batch.shape() {
            [_, f, b, 1] if *f == c.input_frames && *b == c.input_bands => Ok(()),
            other => Err(TensorError::ShapeMismatch(format!(
                "model expects N×{}×{}×1 input, got {other:?}",
                c.input_frames, c.input_bands
            ))
            .into()),
        }
    }

    fn heads(&self, flat: &Tensor<T>) -> Result<ModelOutput<T>, ModelError> {
        Ok(ModelOutput {
            mood: sigmoid(&self.mood_head.forward(flat)?),
            metadata: self
                .metadata_head
                .as_ref()
                .map(|h| h.forward(flat).map(|z| sigmoid(&z)))
                .transpose()?,
        })
    }

    fn flatten(x: Tensor<T>) -> Result<Tensor<T>, TensorError> {
        let n = x.shape()[0];
        let width = x.len() / n;
        x.reshape(&[n, width])
    }

    /// Forward pass recording what the backward pass needs. Training mode updates the batch
    /// norm running statistics and draws dropout masks from `rng`.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        batch: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(ModelOutput<T>, ForwardTrace<T>), ModelError> {
        self.check_batch(batch)?;
        let mut traces = Vec::with_capacity(self.blocks.len());
        let mut x = batch.clone();
        for block in &mut self.blocks {
            let (y, trace) = block.forward(x, mode, rng)?;
            traces.push(trace);
            x = y;
        }
        let trunk_shape = x.shape().to_vec();
        let flat = Self::flatten(x)?;
        let output = self.heads(&flat)?;
        Ok((
            output,
            ForwardTrace {
                blocks: traces,
                trunk_shape,
                flat,
            },
        ))
    }

    /// Inference-mode forward on a shared model: no dropout, running batch-norm statistics.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<ModelOutput<T>, ModelError> {
        self.heads(&self.trunk_features(batch)?)
    }

    /// Inference-mode mood probabilities only.
    pub fn mood_only(&self, batch: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let flat = self.trunk_features(batch)?;
        Ok(sigmoid(&self.mood_head.forward(&flat)?))
    }

    /// Flattened inference-mode trunk output, `N × flatten_width`.
    pub fn trunk_features(&self, batch: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        self.check_batch(batch)?;
        let mut x = batch.clone();
        for block in &self.blocks {
            x = block.infer(&x)?;
        }
        Ok(Self::flatten(x)?)
    }

    /// Back-propagate head-logit gradients, accumulating into every parameter's gradient.
    pub fn backward(
        &mut self,
        trace: &ForwardTrace<T>,
        grads: &HeadGradients<T>,
    ) -> Result<(), ModelError> {
        let mut g_flat = self.mood_head.backward(&trace.flat, &grads.mood)?;
        if let (Some(head), Some(g)) = (&mut self.metadata_head, &grads.metadata) {
            let g_meta = head.backward(&trace.flat, g)?;
            for (a, &b) in g_flat.data_mut().iter_mut().zip(g_meta.data()) {
                *a += b;
            }
        }
        let mut g = g_flat.reshape(&trace.trunk_shape)?;
        for (i, (block, bt)) in self.blocks.iter_mut().zip(&trace.blocks).enumerate().rev() {
            match block.backward(bt, &g, i > 0)? {
                Some(next) => g = next,
                None => break,
            }
        }
        Ok(())
    }
}

/// Loss values of one batch and the matching head-logit gradients.
#[derive(Debug, Clone)]
pub struct CombinedLoss<T> {
    pub total: f64,
    pub mood: f64,
    pub metadata: Option<f64>,
    pub grads: HeadGradients<T>,
}

/// `L = L_mood + alpha·L_metadata`, each a mean binary cross-entropy.
///
/// Without a metadata head (or targets) the second term is absent. With `alpha == 0` the
/// metadata loss is still reported but contributes nothing, and no metadata gradient is
/// produced, so the trunk sees exactly the mood-only gradient.
pub fn combined_loss<T: Real>(
    output: &ModelOutput<T>,
    mood_targets: &Tensor<T>,
    metadata_targets: Option<&Tensor<T>>,
    alpha: f64,
) -> Result<CombinedLoss<T>, ModelError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidConfig(format!(
            "alpha must be ≥ 0, got {alpha}"
        )));
    }
    let mood = bce_loss(&output.mood, mood_targets)?;
    let mood_grad = sigmoid_bce_logit_grad(&output.mood, mood_targets)?;
    let (metadata, metadata_grad) = match (&output.metadata, metadata_targets) {
        (Some(probs), Some(targets)) => {
            let loss = bce_loss(probs, targets)?;
            let grad = if alpha > 0.0 {
                let a = T::from_f64(alpha);
                Some(sigmoid_bce_logit_grad(probs, targets)?.map(|g| g * a))
            } else {
                None
            };
            (Some(loss), grad)
        }
        (None, _) => (None, None),
        (Some(_), None) => {
            return Err(TensorError::ShapeMismatch(
                "metadata head present but no metadata targets given".into(),
            )
            .into())
        }
    };
    let total = match metadata {
        Some(m) => mood + alpha * m,
        None => mood,
    };
    Ok(CombinedLoss {
        total,
        mood,
        metadata,
        grads: HeadGradients {
            mood: mood_grad,
            metadata: metadata_grad,
        },
    })
}

#[cfg(test)]
mod tests;
