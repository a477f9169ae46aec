use super::{mismatch, Real, Tensor, TensorError};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before taking logs.
pub const PROB_CLIP: f64 = 1e-7;

fn check<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>) -> Result<(), TensorError> {
    if probs.shape() != targets.shape() {
        return Err(mismatch(format!(
            "bce: probabilities {:?} vs targets {:?}",
            probs.shape(),
            targets.shape()
        )));
    }
    Ok(())
}

/// Mean binary cross-entropy over every entry, accumulated in f64.
pub fn bce_loss<T: Real>(probs: &Tensor<T>, targets: &Tensor<T>) -> Result<f64, TensorError> {
    check(probs, targets)?;
    let sum: f64 = probs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&p, &t)| {
            let p = p.as_f64().clamp(PROB_CLIP, 1.0 - PROB_CLIP);
            let t = t.as_f64();
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / probs.len() as f64)
}

/// Exact gradient of [`bce_loss`] with respect to the probabilities (zero where clipped).
pub fn bce_backward<T: Real>(
    probs: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    check(probs, targets)?;
    let n = probs.len() as f64;
    let grad = probs
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&p, &t)| {
            let p = p.as_f64();
            if !(PROB_CLIP..=1.0 - PROB_CLIP).contains(&p) {
                return T::zero();
            }
            T::from_f64((p - t.as_f64()) / (p * (1.0 - p)) / n)
        })
        .collect();
    Tensor::new(probs.shape().to_vec(), grad)
}

/// Gradient of `bce_loss(sigmoid(z), t)` with respect to the logits `z`, given `p = sigmoid(z)`:
/// `(p − t) / count`. Unlike chaining [`bce_backward`] through the sigmoid this stays
/// informative when the sigmoid saturates.
pub fn sigmoid_bce_logit_grad<T: Real>(
    probs: &Tensor<T>,
    targets: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    check(probs, targets)?;
    let n = T::from_f64(probs.len() as f64);
    Tensor::new(
        probs.shape().to_vec(),
        probs
            .data()
            .iter()
            .zip(targets.data())
            .map(|(&p, &t)| (p - t) / n)
            .collect(),
    )
}
