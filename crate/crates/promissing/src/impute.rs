//! Baseline imputers: constant, column mean, k-nearest-neighbor, and
//! iterative chained-equations regression.
//!
//! An `Imputer` only exists in fitted form (`fit_imputer` is the sole
//! constructor), so applying an unfitted imputer is unrepresentable.

use std::str::FromStr;

use ndarray::Array2;
use thiserror::Error;

use crate::masked::MaskedMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ImputeError {
    #[error("column {col} has no observed training cells")]
    AllMissingColumn { col: usize },
    #[error("imputer fitted on {expected} columns, applied to {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("row {row} shares no observed feature with any training row")]
    NoCoObserved { row: usize },
    #[error("invalid imputer parameters: {0}")]
    BadConfig(String),
}

/// Imputation strategy plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImputerKind {
    Constant(f64),
    Mean,
    Knn { k: usize },
    Iterative { max_cycles: usize, tol: f64 },
}

impl ImputerKind {
    pub const DEFAULT_ITERATIVE: ImputerKind = ImputerKind::Iterative {
        max_cycles: 10,
        tol: 1e-3,
    };
}

impl FromStr for ImputerKind {
    type Err = ImputeError;

    /// Parses the config syntax `zero | constant:c | mean | knn:k |
    /// iterative[:cycles[:tol]]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || ImputeError::BadConfig(s.to_string());
        match parts[0] {
            "zero" if parts.len() == 1 => Ok(ImputerKind::Constant(0.0)),
            "constant" if parts.len() == 2 => {
                Ok(ImputerKind::Constant(parts[1].parse().map_err(|_| bad())?))
            }
            "mean" if parts.len() == 1 => Ok(ImputerKind::Mean),
            "knn" if parts.len() <= 2 => {
                let k = if parts.len() == 2 {
                    parts[1].parse().map_err(|_| bad())?
                } else {
                    5
                };
                if k == 0 {
                    return Err(bad());
                }
                Ok(ImputerKind::Knn { k })
            }
            "iterative" if parts.len() <= 3 => {
                let max_cycles = if parts.len() >= 2 {
                    parts[1].parse().map_err(|_| bad())?
                } else {
                    10
                };
                let tol = if parts.len() == 3 {
                    parts[2].parse().map_err(|_| bad())?
                } else {
                    1e-3
                };
                if max_cycles == 0 || tol <= 0.0 {
                    return Err(bad());
                }
                Ok(ImputerKind::Iterative { max_cycles, tol })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone)]
enum FittedState {
    Constant,
    Mean(Vec<f64>),
    /// Retained training matrix plus per-column means (fallback fill when a
    /// cell has no usable neighbor).
    Knn {
        train: MaskedMatrix,
        means: Vec<f64>,
    },
    Iterative {
        means: Vec<f64>,
        /// models[j] = regression of column j on all other columns:
        /// p-1 slopes in ascending column order, then the intercept.
        models: Vec<Vec<f64>>,
        /// All columns, ordered by ascending training missing count.
        visit_order: Vec<usize>,
        converged: bool,
        cycles_run: usize,
    },
}

/// A fitted imputer. Immutable after `fit_imputer`; `apply_imputer` is pure.
#[derive(Debug, Clone)]
pub struct Imputer {
    kind: ImputerKind,
    width: usize,
    state: FittedState,
}

impl Imputer {
    pub fn kind(&self) -> ImputerKind {
        self.kind
    }

    /// Convergence flag of an iterative fit; `None` for other kinds.
    pub fn converged(&self) -> Option<bool> {
        match &self.state {
            FittedState::Iterative { converged, .. } => Some(*converged),
            _ => None,
        }
    }

    /// Cycles used by an iterative fit; `None` for other kinds.
    pub fn cycles_run(&self) -> Option<usize> {
        match &self.state {
            FittedState::Iterative { cycles_run, .. } => Some(*cycles_run),
            _ => None,
        }
    }
}

fn column_means(train: &MaskedMatrix) -> Result<Vec<f64>, ImputeError> {
    (0..train.n_cols())
        .map(|j| {
            let observed = train.observed_in_col(j);
            if observed.is_empty() {
                Err(ImputeError::AllMissingColumn { col: j })
            } else {
                Ok(observed.iter().map(|(_, v)| v).sum::<f64>() / observed.len() as f64)
            }
        })
        .collect()
}

/// Solves `(AᵀA + λI) w = Aᵀy` by Gaussian elimination with partial
/// pivoting. The damping λ keeps rank-deficient designs solvable.
fn ridge_solve(a: &Array2<f64>, y: &[f64], lambda: f64) -> Vec<f64> {
    let (n, p) = a.dim();
    let mut ata = vec![vec![0.0; p + 1]; p];
    for i in 0..p {
        for j in 0..p {
            let mut s = 0.0;
            for r in 0..n {
                s += a[(r, i)] * a[(r, j)];
            }
            ata[i][j] = s + if i == j { lambda } else { 0.0 };
        }
        let mut s = 0.0;
        for r in 0..n {
            s += a[(r, i)] * y[r];
        }
        ata[i][p] = s;
    }

    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&a_, &b_| ata[a_][col].abs().partial_cmp(&ata[b_][col].abs()).unwrap())
            .unwrap();
        ata.swap(col, pivot);
        let diag = ata[col][col];
        for row in col + 1..p {
            let (top, bottom) = ata.split_at_mut(row);
            let upper = &top[col];
            let lower = &mut bottom[0];
            let factor = lower[col] / diag;
            for (l, &u) in lower[col..=p].iter_mut().zip(&upper[col..=p]) {
                *l -= factor * u;
            }
        }
    }
    let mut w = vec![0.0; p];
    for col in (0..p).rev() {
        let mut s = ata[col][p];
        for k in col + 1..p {
            s -= ata[col][k] * w[k];
        }
        w[col] = s / ata[col][col];
    }
    w
}

/// Regresses column `target` of `work` on all other columns plus an
/// intercept, over the given rows. Returns p-1 slopes then the intercept.
fn fit_column_model(work: &Array2<f64>, target: usize, rows: &[usize]) -> Vec<f64> {
    let p = work.ncols();
    let mut design = Array2::zeros((rows.len(), p));
    let mut y = Vec::with_capacity(rows.len());
    for (r, &row) in rows.iter().enumerate() {
        let mut c = 0;
        for j in 0..p {
            if j != target {
                design[(r, c)] = work[(row, j)];
                c += 1;
            }
        }
        design[(r, p - 1)] = 1.0;
        y.push(work[(row, target)]);
    }
    ridge_solve(&design, &y, 1e-6)
}

fn predict_column_model(model: &[f64], work: &Array2<f64>, target: usize, row: usize) -> f64 {
    let p = work.ncols();
    let mut s = model[p - 1];
    let mut c = 0;
    for j in 0..p {
        if j != target {
            s += model[c] * work[(row, j)];
            c += 1;
        }
    }
    s
}

fn fit_iterative(
    train: &MaskedMatrix,
    max_cycles: usize,
    tol: f64,
) -> Result<FittedState, ImputeError> {
    let means = column_means(train)?;
    let (n, p) = (train.n_rows(), train.n_cols());

    let mut work = train.values().clone();
    for i in 0..n {
        for j in 0..p {
            if train.is_missing(i, j) {
                work[(i, j)] = means[j];
            }
        }
    }

    let mut visit_order: Vec<usize> = (0..p).collect();
    let missing_count =
        |j: usize| (0..n).filter(|&i| train.is_missing(i, j)).count();
    visit_order.sort_by_key(|&j| (missing_count(j), j));
    let needs_fill: Vec<usize> = visit_order
        .iter()
        .copied()
        .filter(|&j| missing_count(j) > 0)
        .collect();

    let mut converged = needs_fill.is_empty();
    let mut cycles_run = 0;
    for _ in 0..max_cycles {
        if converged {
            break;
        }
        cycles_run += 1;
        let mut max_change: f64 = 0.0;
        for &j in &needs_fill {
            let observed_rows: Vec<usize> =
                (0..n).filter(|&i| !train.is_missing(i, j)).collect();
            let model = fit_column_model(&work, j, &observed_rows);
            for i in 0..n {
                if train.is_missing(i, j) {
                    let new = predict_column_model(&model, &work, j, i);
                    max_change = max_change.max((new - work[(i, j)]).abs());
                    work[(i, j)] = new;
                }
            }
        }
        if max_change < tol {
            converged = true;
        }
    }

    // Final per-column models on the fully imputed matrix, so apply can fill
    // any column, including ones that were complete during training.
    let models = (0..p)
        .map(|j| {
            let observed_rows: Vec<usize> =
                (0..n).filter(|&i| !train.is_missing(i, j)).collect();
            fit_column_model(&work, j, &observed_rows)
        })
        .collect();

    Ok(FittedState::Iterative {
        means,
        models,
        visit_order,
        converged,
        cycles_run,
    })
}

/// Fits an imputer of the given kind on a training matrix.
pub fn fit_imputer(kind: ImputerKind, train: &MaskedMatrix) -> Result<Imputer, ImputeError> {
    let state = match kind {
        ImputerKind::Constant(_) => FittedState::Constant,
        ImputerKind::Mean => FittedState::Mean(column_means(train)?),
        ImputerKind::Knn { .. } => FittedState::Knn {
            train: train.clone(),
            means: column_means(train)?,
        },
        ImputerKind::Iterative { max_cycles, tol } => fit_iterative(train, max_cycles, tol)?,
    };
    Ok(Imputer {
        kind,
        width: train.n_cols(),
        state,
    })
}

/// Distance between a query row of `x` and a training row: Euclidean over
/// co-observed features, scaled by `sqrt(p / co)`. `None` when no feature is
/// co-observed.
fn masked_distance(
    x: &MaskedMatrix,
    row: usize,
    train: &MaskedMatrix,
    train_row: usize,
) -> Option<f64> {
    let p = x.n_cols();
    let mut co = 0usize;
    let mut sum = 0.0;
    for j in 0..p {
        if let (Some(a), Some(b)) = (x.get(row, j), train.get(train_row, j)) {
            co += 1;
            sum += (a - b) * (a - b);
        }
    }
    if co == 0 {
        None
    } else {
        Some((p as f64 / co as f64 * sum).sqrt())
    }
}

fn knn_fill(
    train: &MaskedMatrix,
    means: &[f64],
    k: usize,
    x: &MaskedMatrix,
    out: &mut Array2<f64>,
) -> Result<(), ImputeError> {
    for i in 0..x.n_rows() {
        if x.missing_count(i) == 0 {
            continue;
        }
        // Distances are shared by every missing cell of the row.
        let distances: Vec<Option<f64>> = (0..train.n_rows())
            .map(|t| masked_distance(x, i, train, t))
            .collect();
        if x.observed_count(i) > 0 && distances.iter().all(|d| d.is_none()) {
            return Err(ImputeError::NoCoObserved { row: i });
        }
        for j in 0..x.n_cols() {
            if !x.is_missing(i, j) {
                continue;
            }
            if x.observed_count(i) == 0 {
                return Err(ImputeError::NoCoObserved { row: i });
            }
            let mut candidates: Vec<(f64, usize)> = distances
                .iter()
                .enumerate()
                .filter_map(|(t, d)| {
                    d.and_then(|d| train.get(t, j).map(|_| (d, t)))
                })
                .collect();
            if candidates.is_empty() {
                // No neighbor observes this column; fall back to its mean.
                out[(i, j)] = means[j];
                continue;
            }
            candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let take = k.min(candidates.len());
            let sum: f64 = candidates[..take]
                .iter()
                .map(|&(_, t)| train.observed(t, j))
                .sum();
            out[(i, j)] = sum / take as f64;
        }
    }
    Ok(())
}

fn iterative_fill(
    means: &[f64],
    models: &[Vec<f64>],
    visit_order: &[usize],
    max_cycles: usize,
    tol: f64,
    x: &MaskedMatrix,
    out: &mut Array2<f64>,
) {
    let n = x.n_rows();
    for i in 0..n {
        for j in 0..x.n_cols() {
            if x.is_missing(i, j) {
                out[(i, j)] = means[j];
            }
        }
    }
    let fill_cols: Vec<usize> = visit_order
        .iter()
        .copied()
        .filter(|&j| (0..n).any(|i| x.is_missing(i, j)))
        .collect();
    for _ in 0..max_cycles {
        let mut max_change: f64 = 0.0;
        for &j in &fill_cols {
            for i in 0..n {
                if x.is_missing(i, j) {
                    let new = predict_column_model(&models[j], out, j, i);
                    max_change = max_change.max((new - out[(i, j)]).abs());
                    out[(i, j)] = new;
                }
            }
        }
        if max_change < tol {
            break;
        }
    }
}

/// Fills every missing cell of `x`; observed cells are copied bit for bit.
/// The result carries an all-false mask.
pub fn apply_imputer(imp: &Imputer, x: &MaskedMatrix) -> Result<MaskedMatrix, ImputeError> {
    if x.n_cols() != imp.width {
        return Err(ImputeError::WidthMismatch {
            expected: imp.width,
            got: x.n_cols(),
        });
    }
    let mut out = x.values().clone();
    match &imp.state {
        FittedState::Constant => {
            let ImputerKind::Constant(c) = imp.kind else {
                unreachable!()
            };
            for ((i, j), v) in out.indexed_iter_mut() {
                if x.is_missing(i, j) {
                    *v = c;
                }
            }
        }
        FittedState::Mean(means) => {
            for ((i, j), v) in out.indexed_iter_mut() {
                if x.is_missing(i, j) {
                    *v = means[j];
                }
            }
        }
        FittedState::Knn { train, means } => {
            let ImputerKind::Knn { k } = imp.kind else {
                unreachable!()
            };
            knn_fill(train, means, k, x, &mut out)?;
        }
        FittedState::Iterative {
            means,
            models,
            visit_order,
            ..
        } => {
            let ImputerKind::Iterative { max_cycles, tol } = imp.kind else {
                unreachable!()
            };
            iterative_fill(means, models, visit_order, max_cycles, tol, x, &mut out);
        }
    }
    Ok(MaskedMatrix::from_dense(out))
}
