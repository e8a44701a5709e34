//! Column standardization fitted on observed training cells only.

use super::DataError;
use crate::masked::MaskedMatrix;

/// Per-column mean and population standard deviation over observed cells.
/// Constant columns are kept with std 1 and flagged so callers can warn.
#[derive(Debug, Clone)]
pub struct StandardizerStats {
    cols: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
}

impl StandardizerStats {
    /// Fits on the observed cells of `train` for the given columns.
    pub fn fit(train: &MaskedMatrix, cols: &[usize]) -> Result<Self, DataError> {
        let mut mean = Vec::with_capacity(cols.len());
        let mut std = Vec::with_capacity(cols.len());
        let mut constant = Vec::with_capacity(cols.len());
        for &c in cols {
            let observed: Vec<f64> = train.observed_in_col(c).into_iter().map(|(_, v)| v).collect();
            if observed.is_empty() {
                return Err(DataError::EmptyColumn { col: c });
            }
            let n = observed.len() as f64;
            let m = observed.iter().sum::<f64>() / n;
            let var = observed.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            mean.push(m);
            if s == 0.0 {
                std.push(1.0);
                constant.push(true);
            } else {
                std.push(s);
                constant.push(false);
            }
        }
        Ok(Self {
            cols: cols.to_vec(),
            mean,
            std,
            constant,
        })
    }

    /// Applies `(v - mean) / std` to observed cells of the fitted columns.
    /// Masks are untouched.
    pub fn apply(&self, m: &MaskedMatrix) -> MaskedMatrix {
        let mut out = m.clone();
        for (idx, &c) in self.cols.iter().enumerate() {
            for (row, v) in m.observed_in_col(c) {
                out.set(row, c, (v - self.mean[idx]) / self.std[idx]);
            }
        }
        out
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn mean(&self, idx: usize) -> f64 {
        self.mean[idx]
    }

    pub fn std(&self, idx: usize) -> f64 {
        self.std[idx]
    }

    /// True if the fitted column was constant (std recorded as 1).
    pub fn is_constant(&self, idx: usize) -> bool {
        self.constant[idx]
    }

    pub fn any_constant(&self) -> bool {
        self.constant.iter().any(|&c| c)
    }
}

/// Fits on `train` and transforms `train` plus every matrix in `others`.
/// The first returned matrix is the transformed `train`.
pub fn standardize(
    train: &MaskedMatrix,
    others: &[&MaskedMatrix],
    cols: &[usize],
) -> Result<(Vec<MaskedMatrix>, StandardizerStats), DataError> {
    let stats = StandardizerStats::fit(train, cols)?;
    let mut out = Vec::with_capacity(1 + others.len());
    out.push(stats.apply(train));
    for m in others {
        out.push(stats.apply(m));
    }
    Ok((out, stats))
}
