//! Dense matrix with an explicit per-cell missingness mask.

use ndarray::Array2;

/// An `n x p` real matrix where every cell is either observed or missing.
///
/// Missingness is carried by an explicit boolean mask rather than a sentinel
/// payload. The payload under a masked cell is normalized to `NaN` at
/// construction time, so a masked cell carries no information and any
/// accidental arithmetic on it poisons the result instead of silently
/// producing a number.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    values: Array2<f64>,
    mask: Array2<bool>,
}

/// Two matrices are equal when their masks agree and every observed cell
/// matches. Masked payloads are all `NaN`, so a derived comparison would
/// make any matrix with a missing cell unequal to itself.
impl PartialEq for MaskedMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.mask == other.mask
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .zip(self.mask.iter())
                .all(|((a, b), &missing)| missing || a == b)
    }
}

impl MaskedMatrix {
    /// Builds a matrix from values and a mask of the same shape.
    ///
    /// Payloads under masked cells are discarded and replaced with `NaN`.
    ///
    /// # Panics
    /// Panics if the shapes differ.
    pub fn new(mut values: Array2<f64>, mask: Array2<bool>) -> Self {
        assert_eq!(
            values.dim(),
            mask.dim(),
            "values and mask must have identical shape"
        );
        for (v, &m) in values.iter_mut().zip(mask.iter()) {
            if m {
                *v = f64::NAN;
            }
        }
        Self { values, mask }
    }

    /// Wraps a fully observed matrix (all-false mask).
    pub fn from_dense(values: Array2<f64>) -> Self {
        let mask = Array2::from_elem(values.dim(), false);
        Self { values, mask }
    }

    /// An `n x p` matrix with every cell missing.
    pub fn all_missing(n: usize, p: usize) -> Self {
        Self {
            values: Array2::from_elem((n, p), f64::NAN),
            mask: Array2::from_elem((n, p), true),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.mask[(row, col)]
    }

    /// The observed value at a cell, or `None` if the cell is missing.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if self.mask[(row, col)] {
            None
        } else {
            Some(self.values[(row, col)])
        }
    }

    /// The observed value at a cell.
    ///
    /// # Panics
    /// Panics if the cell is missing; reading a masked cell through an
    /// observed-cell accessor is a programmer error.
    pub fn observed(&self, row: usize, col: usize) -> f64 {
        assert!(
            !self.mask[(row, col)],
            "cell ({row}, {col}) is missing; it has no observable value"
        );
        self.values[(row, col)]
    }

    /// Sets an observed value.
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[(row, col)] = value;
        self.mask[(row, col)] = false;
    }

    /// Marks a cell missing, discarding its payload.
    pub fn set_missing(&mut self, row: usize, col: usize) {
        self.values[(row, col)] = f64::NAN;
        self.mask[(row, col)] = true;
    }

    /// Number of observed cells in a row (`q`). `q + r = p` always holds,
    /// with `r` the missing count.
    pub fn observed_count(&self, row: usize) -> usize {
        self.mask.row(row).iter().filter(|&&m| !m).count()
    }

    pub fn missing_count(&self, row: usize) -> usize {
        self.n_cols() - self.observed_count(row)
    }

    /// Total number of missing cells.
    pub fn total_missing(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.mask.iter().any(|&m| m)
    }

    /// Raw values array. Masked cells hold `NaN`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn mask(&self) -> &Array2<bool> {
        &self.mask
    }

    /// Observed values of one column, with their row indices.
    pub fn observed_in_col(&self, col: usize) -> Vec<(usize, f64)> {
        (0..self.n_rows())
            .filter(|&i| !self.mask[(i, col)])
            .map(|i| (i, self.values[(i, col)]))
            .collect()
    }

    /// Copies the given rows into a new matrix, preserving their order.
    pub fn select_rows(&self, rows: &[usize]) -> MaskedMatrix {
        let p = self.n_cols();
        let mut values = Array2::zeros((rows.len(), p));
        let mut mask = Array2::from_elem((rows.len(), p), false);
        for (out, &r) in rows.iter().enumerate() {
            for j in 0..p {
                values[(out, j)] = self.values[(r, j)];
                mask[(out, j)] = self.mask[(r, j)];
            }
        }
        Self { values, mask }
    }

    /// Copies the given column range into a new matrix.
    pub fn select_cols(&self, cols: std::ops::Range<usize>) -> MaskedMatrix {
        let n = self.n_rows();
        let width = cols.len();
        let mut values = Array2::zeros((n, width));
        let mut mask = Array2::from_elem((n, width), false);
        for i in 0..n {
            for (out, j) in cols.clone().enumerate() {
                values[(i, out)] = self.values[(i, j)];
                mask[(i, out)] = self.mask[(i, j)];
            }
        }
        Self { values, mask }
    }

    /// Stacks matrices vertically. All inputs must share the column count.
    pub fn vstack(parts: &[&MaskedMatrix]) -> MaskedMatrix {
        assert!(!parts.is_empty());
        let p = parts[0].n_cols();
        assert!(parts.iter().all(|m| m.n_cols() == p));
        let n: usize = parts.iter().map(|m| m.n_rows()).sum();
        let mut values = Array2::zeros((n, p));
        let mut mask = Array2::from_elem((n, p), false);
        let mut at = 0;
        for part in parts {
            for i in 0..part.n_rows() {
                for j in 0..p {
                    values[(at, j)] = part.values[(i, j)];
                    mask[(at, j)] = part.mask[(i, j)];
                }
                at += 1;
            }
        }
        MaskedMatrix { values, mask }
    }

    /// Stacks matrices horizontally. All inputs must share the row count.
    pub fn hstack(parts: &[&MaskedMatrix]) -> MaskedMatrix {
        assert!(!parts.is_empty());
        let n = parts[0].n_rows();
        assert!(parts.iter().all(|m| m.n_rows() == n));
        let p: usize = parts.iter().map(|m| m.n_cols()).sum();
        let mut values = Array2::zeros((n, p));
        let mut mask = Array2::from_elem((n, p), false);
        let mut at = 0;
        for part in parts {
            for j in 0..part.n_cols() {
                for i in 0..n {
                    values[(i, at)] = part.values[(i, j)];
                    mask[(i, at)] = part.mask[(i, j)];
                }
                at += 1;
            }
        }
        MaskedMatrix { values, mask }
    }
}
