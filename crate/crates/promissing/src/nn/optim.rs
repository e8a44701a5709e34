//! Gradient-descent parameter updates: plain SGD and Adam.

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerConfig {
    Sgd { lr: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerConfig {
    pub fn sgd(lr: f64) -> Self {
        OptimizerConfig::Sgd { lr }
    }

    /// Adam with the customary moment decays (0.9, 0.999) and 1e-8 epsilon.
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |what: &str| Err(NnError::Optimizer(what.to_string()));
        match *self {
            OptimizerConfig::Sgd { lr } => {
                if !(lr.is_finite() && lr > 0.0) {
                    return bad("sgd learning rate must be positive and finite");
                }
            }
            OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
                if !(lr.is_finite() && lr > 0.0) {
                    return bad("adam learning rate must be positive and finite");
                }
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return bad("adam moment decays must lie in [0, 1)");
                }
                if !(eps.is_finite() && eps > 0.0) {
                    return bad("adam epsilon must be positive and finite");
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerConfig::Sgd { .. } => "sgd",
            OptimizerConfig::Adam { .. } => "adam",
        }
    }
}

/// Per-parameter moment estimates; SGD leaves them untouched.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(n_params: usize) -> Self {
        Self { t: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

/// One update of `params` in place from `grads`.
pub fn optimizer_step(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    params: &mut [f64],
    grads: &[f64],
) -> Result<(), NnError> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(NnError::Optimizer(format!(
            "size mismatch: {} params, {} grads, state for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    match *config {
        OptimizerConfig::Sgd { lr } => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        OptimizerConfig::Adam { lr, beta1, beta2, eps } => {
            // Bias correction via the 1-β^t factors.
            let c1 = 1.0 - beta1.powi(state.t as i32);
            let c2 = 1.0 - beta2.powi(state.t as i32);
            for i in 0..params.len() {
                state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
                state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
                let m_hat = state.m[i] / c1;
                let v_hat = state.v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
    Ok(())
}
