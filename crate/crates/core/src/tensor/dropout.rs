use rand::Rng;

use super::{mismatch, Mode, Real, Tensor, TensorError};

/// Per-element multipliers applied by a training-mode dropout pass (`None` = identity).
#[derive(Debug, Clone)]
pub struct DropoutMask<T> {
    scale: Option<Vec<T>>,
}

impl<T> DropoutMask<T> {
    pub fn is_identity(&self) -> bool {
        self.scale.is_none()
    }
}

/// Inverted dropout: in training mode each entry is zeroed with probability `rate` and the
/// survivors are scaled by `1/(1-rate)`. Inference mode, and `rate == 0`, are the identity and
/// draw nothing from `rng`.
pub fn dropout<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, DropoutMask<T>), TensorError> {
    if !(0.0..1.0).contains(&rate) {
        return Err(TensorError::InvalidRate(rate));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), DropoutMask { scale: None }));
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    let scale: Vec<T> = (0..input.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let out = input
        .data()
        .iter()
        .zip(&scale)
        .map(|(&x, &s)| x * s)
        .collect();
    Ok((
        Tensor::new(input.shape().to_vec(), out)?,
        DropoutMask { scale: Some(scale) },
    ))
}

pub fn dropout_backward<T: Real>(
    mask: &DropoutMask<T>,
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    match &mask.scale {
        None => Ok(grad_out.clone()),
        Some(scale) if scale.len() == grad_out.len() => Ok(Tensor::new(
            grad_out.shape().to_vec(),
            grad_out
                .data()
                .iter()
                .zip(scale)
                .map(|(&g, &s)| g * s)
                .collect(),
        )?),
        Some(_) => Err(mismatch("upstream gradient does not match dropout mask")),
    }
}
