//! Transfer (activation) functions and their backward forms.

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transfer {
    Tanh,
    Sigmoid,
    Relu,
    Softmax,
    Linear,
}

impl Transfer {
    pub fn name(self) -> &'static str {
        match self {
            Transfer::Tanh => "tanh",
            Transfer::Sigmoid => "sigmoid",
            Transfer::Relu => "relu",
            Transfer::Softmax => "softmax",
            Transfer::Linear => "linear",
        }
    }

    pub fn from_name(name: &str) -> Option<Transfer> {
        Some(match name {
            "tanh" => Transfer::Tanh,
            "sigmoid" => Transfer::Sigmoid,
            "relu" => Transfer::Relu,
            "softmax" => Transfer::Softmax,
            "linear" => Transfer::Linear,
            _ => return None,
        })
    }

    /// Applies the transfer in place. Softmax normalizes each row after
    /// subtracting its max, so it never overflows.
    pub fn apply(self, a: &mut Array2<f64>) {
        match self {
            Transfer::Linear => {}
            Transfer::Tanh => a.mapv_inplace(f64::tanh),
            Transfer::Sigmoid => a.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Transfer::Relu => a.mapv_inplace(|v| v.max(0.0)),
            Transfer::Softmax => {
                for mut row in a.rows_mut() {
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut sum = 0.0;
                    for v in row.iter_mut() {
                        *v = (*v - max).exp();
                        sum += *v;
                    }
                    for v in row.iter_mut() {
                        *v /= sum;
                    }
                }
            }
        }
    }

    /// Converts an output-space gradient `g = dL/dy` into the
    /// pre-activation gradient `dL/da`, using only the cached outputs `y`.
    ///
    /// Elementwise transfers multiply by the derivative expressed in `y`
    /// (relu uses `y > 0`, which matches `a > 0` and picks 0 at the kink).
    /// Softmax applies its full Jacobian row by row,
    /// `da_i = y_i (g_i - Σ_j g_j y_j)`, which stays correct when the output
    /// feeds several consumers.
    pub fn backward(self, y: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
        match self {
            Transfer::Linear => g.clone(),
            Transfer::Tanh => {
                let mut da = g.clone();
                da.zip_mut_with(y, |d, &yv| *d *= 1.0 - yv * yv);
                da
            }
            Transfer::Sigmoid => {
                let mut da = g.clone();
                da.zip_mut_with(y, |d, &yv| *d *= yv * (1.0 - yv));
                da
            }
            Transfer::Relu => {
                let mut da = g.clone();
                da.zip_mut_with(y, |d, &yv| {
                    if yv <= 0.0 {
                        *d = 0.0;
                    }
                });
                da
            }
            Transfer::Softmax => {
                let mut da = Array2::zeros(g.dim());
                for r in 0..g.nrows() {
                    let mut dot = 0.0;
                    for j in 0..g.ncols() {
                        dot += g[(r, j)] * y[(r, j)];
                    }
                    for i in 0..g.ncols() {
                        da[(r, i)] = y[(r, i)] * (g[(r, i)] - dot);
                    }
                }
                da
            }
        }
    }
}
