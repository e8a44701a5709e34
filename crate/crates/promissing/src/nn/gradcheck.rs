//! Central-difference verification of backpropagated gradients.

use super::network::{DropoutMode, Network};
use super::NnError;
use crate::masked::MaskedMatrix;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Flat parameter index where the largest discrepancy occurred.
    pub worst_param: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub n_params: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares every backpropagated parameter gradient against a symmetric
/// finite difference of the total loss. `dropout_seed` fixes the dropout
/// cell masks across all probes (`None` disables dropout), so the loss is a
/// deterministic function of the parameters.
///
/// The relative error uses the scale-aware denominator
/// max(1, |analytic|, |numeric|).
pub fn gradcheck(
    net: &mut Network,
    inputs: &[&MaskedMatrix],
    targets: &[f64],
    dropout_seed: Option<u64>,
    h: f64,
) -> Result<GradCheckReport, NnError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(NnError::Spec(format!("step size {h} invalid")));
    }
    let mode = match dropout_seed {
        Some(seed) => DropoutMode::Seeded(seed),
        None => DropoutMode::Disabled,
    };

    let pass = net.forward(inputs, mode)?;
    let (_, analytic) = net.backward(&pass, targets)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_param: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        n_params: net.n_params(),
    };
    for (i, &grad) in analytic.iter().enumerate() {
        let original = net.params()[i];
        net.params_mut()[i] = original + h;
        let plus = net.loss_of(&net.forward(inputs, mode)?, targets)?;
        net.params_mut()[i] = original - h;
        let minus = net.loss_of(&net.forward(inputs, mode)?, targets)?;
        net.params_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * h);
        let denom = 1.0f64.max(grad.abs()).max(numeric.abs());
        let rel = (grad - numeric).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_param = i;
            report.analytic_at_worst = grad;
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}
