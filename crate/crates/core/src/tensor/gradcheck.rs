use super::TensorError;

/// Central-difference step.
pub const GRADCHECK_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// `max_i |analytic_i − numeric_i| / max(1, |numeric_i|)`.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compare an analytic gradient against central finite differences.
///
/// `objective` maps a flat parameter vector to a scalar and its analytic gradient. Every
/// coordinate of `point` is perturbed by ±[`GRADCHECK_STEP`].
pub fn gradient_check<F>(
    mut objective: F,
    point: &[f64],
    tolerance: f64,
) -> Result<GradCheckReport, TensorError>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = objective(point);
    assert_eq!(
        analytic.len(),
        point.len(),
        "gradient length must match the point"
    );
    let mut x = point.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        tolerance,
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + GRADCHECK_STEP;
        let (up, _) = objective(&x);
        x[i] = orig - GRADCHECK_STEP;
        let (down, _) = objective(&x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * GRADCHECK_STEP);
        if !numeric.is_finite() || !analytic[i].is_finite() {
            return Err(TensorError::NonFiniteGradient { index: i });
        }
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_correct_gradient() {
        let f = |x: &[f64]| {
            let v = x[0] * x[0] * x[1] + x[1].sin();
            (v, vec![2.0 * x[0] * x[1], x[0] * x[0] + x[1].cos()])
        };
        let r = gradient_check(f, &[0.7, -1.3], 1e-6).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn flags_wrong_gradient() {
        let f = |x: &[f64]| (x[0] * x[0], vec![x[0]]);
        let r = gradient_check(f, &[2.0], 1e-4).unwrap();
        assert!(!r.passed());
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn non_finite_is_an_error() {
        let f = |x: &[f64]| (x[0].ln(), vec![1.0 / x[0]]);
        assert!(matches!(
            gradient_check(f, &[0.0], 1e-4),
            Err(TensorError::NonFiniteGradient { index: 0 })
        ));
    }
}
