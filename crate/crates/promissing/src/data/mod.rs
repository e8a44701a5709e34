//! Dataset ingestion, encoding, standardization, splitting, rebalancing, and
//! synthetic data generation on the masked-matrix data model.

mod csv_io;
mod encode;
mod split;
mod standardize;
mod synth;

pub use csv_io::{load_csv, load_csv_str, write_csv, ColumnKind, Schema};
pub use encode::{decode_category, encode, EncodingMap};
pub use split::{rebalance, split_kfold, Fold, FoldPlan};
pub use standardize::{standardize, StandardizerStats};
pub use synth::{simulate_multimodal, simulate_xor, MultimodalSpec};

use crate::masked::MaskedMatrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: ::csv::Error,
    },
    #[error("cell ({row}, {col}) is not a number: {token:?}")]
    Parse { row: usize, col: usize, token: String },
    #[error("target value missing at row {row}")]
    TargetMissing { row: usize },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("column {col}: code {code} does not index the {n_categories} known categories")]
    UnknownCategory {
        col: usize,
        code: f64,
        n_categories: usize,
    },
    #[error("column {col} has no observed cells")]
    EmptyColumn { col: usize },
    #[error("cannot split {n} rows into {k} folds")]
    Split { n: usize, k: usize },
    #[error("rebalancing needs both classes present")]
    Rebalance,
    #[error("{0}")]
    Invalid(String),
}

/// Kind of a source feature column. Categorical columns carry their category
/// labels in first-seen order; the stored cell value is the label's index.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Continuous,
    Binary,
    Categorical(Vec<String>),
}

/// Whether the target is a 0/1 class label or a real-valued response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Binary,
    Continuous,
}

/// A named tabular dataset: masked feature matrix, fully observed target,
/// and per-column metadata.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub features: MaskedMatrix,
    pub target: Vec<f64>,
    pub feature_names: Vec<String>,
    pub feature_meta: Vec<FeatureKind>,
    pub target_kind: TargetKind,
}

impl Dataset {
    pub fn new(
        name: String,
        features: MaskedMatrix,
        target: Vec<f64>,
        feature_names: Vec<String>,
        feature_meta: Vec<FeatureKind>,
        target_kind: TargetKind,
    ) -> Result<Self, DataError> {
        if target.len() != features.n_rows() {
            return Err(DataError::Invalid(format!(
                "target length {} does not match {} feature rows",
                target.len(),
                features.n_rows()
            )));
        }
        if feature_meta.len() != features.n_cols() || feature_names.len() != features.n_cols() {
            return Err(DataError::Invalid(format!(
                "metadata covers {} columns but the matrix has {}",
                feature_meta.len(),
                features.n_cols()
            )));
        }
        for (j, kind) in feature_meta.iter().enumerate() {
            if let FeatureKind::Categorical(cats) = kind {
                if cats.len() < 2 {
                    return Err(DataError::Invalid(format!(
                        "categorical column {j} lists {} categories; need at least 2",
                        cats.len()
                    )));
                }
            }
        }
        if target_kind == TargetKind::Binary {
            if let Some(bad) = target.iter().find(|&&t| t != 0.0 && t != 1.0) {
                return Err(DataError::Invalid(format!(
                    "binary target contains non-0/1 value {bad}"
                )));
            }
        }
        Ok(Self {
            name,
            features,
            target,
            feature_names,
            feature_meta,
            target_kind,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    /// New dataset restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: self.features.select_rows(rows),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            feature_names: self.feature_names.clone(),
            feature_meta: self.feature_meta.clone(),
            target_kind: self.target_kind,
        }
    }
}

/// A multimodal dataset: named feature blocks over the same rows, plus a
/// shared target vector.
#[derive(Debug, Clone)]
pub struct ModalDataset {
    modalities: Vec<(String, MaskedMatrix)>,
    pub target: Vec<f64>,
}

impl ModalDataset {
    pub fn new(
        modalities: Vec<(String, MaskedMatrix)>,
        target: Vec<f64>,
    ) -> Result<Self, DataError> {
        if modalities.is_empty() {
            return Err(DataError::Invalid("no modalities given".into()));
        }
        let n = modalities[0].1.n_rows();
        if modalities.iter().any(|(_, m)| m.n_rows() != n) {
            return Err(DataError::Invalid(
                "modalities disagree on row count".into(),
            ));
        }
        if target.len() != n {
            return Err(DataError::Invalid(format!(
                "target length {} does not match {} rows",
                target.len(),
                n
            )));
        }
        for (i, (name, _)) in modalities.iter().enumerate() {
            if modalities[..i].iter().any(|(other, _)| other == name) {
                return Err(DataError::Invalid(format!(
                    "duplicate modality name {name:?}"
                )));
            }
        }
        Ok(Self { modalities, target })
    }

    /// Number of modalities (`M`).
    pub fn n_modalities(&self) -> usize {
        self.modalities.len()
    }

    pub fn n_rows(&self) -> usize {
        self.modalities[0].1.n_rows()
    }

    pub fn names(&self) -> Vec<&str> {
        self.modalities.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn modality(&self, i: usize) -> &MaskedMatrix {
        &self.modalities[i].1
    }

    pub fn modality_name(&self, i: usize) -> &str {
        &self.modalities[i].0
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.modalities.iter().map(|(_, m)| m.n_cols()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, MaskedMatrix)> {
        self.modalities.iter()
    }

    pub fn select_rows(&self, rows: &[usize]) -> ModalDataset {
        ModalDataset {
            modalities: self
                .modalities
                .iter()
                .map(|(name, m)| (name.clone(), m.select_rows(rows)))
                .collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
        }
    }

    /// Copy with the listed modalities fully masked in every row.
    pub fn with_modalities_masked(&self, masked: &[usize]) -> ModalDataset {
        let mut out = self.clone();
        for &mi in masked {
            let (_, m) = &mut out.modalities[mi];
            *m = MaskedMatrix::all_missing(m.n_rows(), m.n_cols());
        }
        out
    }

    /// Vertical concatenation. Modality names and widths must match.
    pub fn vstack(parts: &[&ModalDataset]) -> Result<ModalDataset, DataError> {
        let first = parts
            .first()
            .ok_or_else(|| DataError::Invalid("vstack of nothing".into()))?;
        let m = first.n_modalities();
        for p in parts {
            if p.n_modalities() != m || p.names() != first.names() {
                return Err(DataError::Invalid(
                    "vstack parts disagree on modalities".into(),
                ));
            }
        }
        let modalities = (0..m)
            .map(|i| {
                let blocks: Vec<&MaskedMatrix> = parts.iter().map(|p| p.modality(i)).collect();
                (
                    first.modality_name(i).to_string(),
                    MaskedMatrix::vstack(&blocks),
                )
            })
            .collect();
        let target = parts.iter().flat_map(|p| p.target.iter().copied()).collect();
        Ok(ModalDataset { modalities, target })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dataset_rejects_length_mismatch() {
        let features = MaskedMatrix::from_dense(array![[1.0], [2.0]]);
        let err = Dataset::new(
            "t".into(),
            features,
            vec![0.0],
            vec!["a".into()],
            vec![FeatureKind::Continuous],
            TargetKind::Binary,
        );
        assert!(err.is_err());
    }

    #[test]
    fn dataset_rejects_single_category() {
        let features = MaskedMatrix::from_dense(array![[0.0]]);
        let err = Dataset::new(
            "t".into(),
            features,
            vec![0.0],
            vec!["a".into()],
            vec![FeatureKind::Categorical(vec!["only".into()])],
            TargetKind::Binary,
        );
        assert!(err.is_err());
    }

    #[test]
    fn modal_masking_hides_whole_block() {
        let md = ModalDataset::new(
            vec![
                ("a".into(), MaskedMatrix::from_dense(array![[1.0, 2.0]])),
                ("b".into(), MaskedMatrix::from_dense(array![[3.0]])),
            ],
            vec![1.0],
        )
        .unwrap();
        let masked = md.with_modalities_masked(&[0]);
        assert!(masked.modality(0).is_missing(0, 0));
        assert!(masked.modality(0).is_missing(0, 1));
        assert_eq!(masked.modality(1).get(0, 0), Some(3.0));
    }
}
