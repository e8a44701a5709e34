//! CSV ingestion and export with an explicit sidecar schema.
//!
//! Schema files are line-oriented `key=value` text: one `column=kind` line
//! per column (kind ∈ `continuous`, `binary`, `categorical`) and a
//! `target=column` line naming the target. Blank lines and `#` comments are
//! ignored. In data files, an empty field or the token `NaN`
//! (case-insensitive) denotes a missing value.

use std::path::Path;

use ndarray::Array2;

use super::{DataError, Dataset, FeatureKind, TargetKind};
use crate::masked::MaskedMatrix;

/// Declared kind of a column, before categories are discovered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Binary,
    Categorical,
}

/// Column kinds plus the target column name, as read from a schema file.
#[derive(Debug, Clone)]
pub struct Schema {
    pub target: String,
    columns: Vec<(String, ColumnKind)>,
}

impl Schema {
    pub fn new(target: &str, columns: Vec<(String, ColumnKind)>) -> Result<Self, DataError> {
        if !columns.iter().any(|(name, _)| name == target) {
            return Err(DataError::Schema(format!(
                "target column {target:?} has no kind declaration"
            )));
        }
        Ok(Self {
            target: target.to_string(),
            columns,
        })
    }

    /// Parses the sidecar format described in the module docs.
    pub fn from_file(path: &Path) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Schema::from_text(&text, &path.display().to_string())
    }

    /// Parses schema text directly; `origin` labels parse errors.
    pub fn from_text(text: &str, origin: &str) -> Result<Self, DataError> {
        let mut target = None;
        let mut columns = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                DataError::Schema(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    origin,
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key == "target" {
                target = Some(value.to_string());
            } else {
                let kind = match value {
                    "continuous" => ColumnKind::Continuous,
                    "binary" => ColumnKind::Binary,
                    "categorical" => ColumnKind::Categorical,
                    other => {
                        return Err(DataError::Schema(format!(
                            "column {key:?} has unknown kind {other:?}"
                        )))
                    }
                };
                columns.push((key.to_string(), kind));
            }
        }
        let target =
            target.ok_or_else(|| DataError::Schema("schema declares no target column".into()))?;
        Schema::new(&target, columns)
    }

    pub fn kind_of(&self, column: &str) -> Option<ColumnKind> {
        self.columns
            .iter()
            .find(|(name, _)| name == column)
            .map(|&(_, kind)| kind)
    }

    pub fn columns(&self) -> &[(String, ColumnKind)] {
        &self.columns
    }
}

fn is_missing_token(field: &str) -> bool {
    field.is_empty() || field.eq_ignore_ascii_case("nan")
}

/// Loads a CSV file under the given schema. Column order follows the file
/// header; categorical labels are recorded in first-seen order and stored as
/// their index.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| DataError::Csv {
            path: path.display().to_string(),
            source,
        })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    load_from_reader(reader, &path.display().to_string(), name, schema)
}

/// Loads CSV text directly (e.g. an embedded dataset), naming the result.
pub fn load_csv_str(name: &str, text: &str, schema: &Schema) -> Result<Dataset, DataError> {
    let reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    load_from_reader(reader, name, name.to_string(), schema)
}

fn load_from_reader<R: std::io::Read>(
    mut reader: csv::Reader<R>,
    label: &str,
    name: String,
    schema: &Schema,
) -> Result<Dataset, DataError> {
    let wrap_csv = |source| DataError::Csv {
        path: label.to_string(),
        source,
    };

    let headers: Vec<String> = reader
        .headers()
        .map_err(wrap_csv)?
        .iter()
        .map(|h| h.to_string())
        .collect();
    let mut target_col = None;
    let mut feature_cols: Vec<(usize, String, ColumnKind)> = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        let kind = schema.kind_of(name).ok_or_else(|| {
            DataError::Schema(format!("header column {name:?} not declared in schema"))
        })?;
        if name == &schema.target {
            target_col = Some((idx, kind));
        } else {
            feature_cols.push((idx, name.clone(), kind));
        }
    }
    let (target_idx, target_col_kind) = target_col.ok_or_else(|| {
        DataError::Schema(format!("target column {:?} not in header", schema.target))
    })?;
    for (name, _) in schema.columns() {
        if !headers.iter().any(|h| h == name) {
            return Err(DataError::Schema(format!(
                "schema column {name:?} not in header"
            )));
        }
    }
    let target_kind = match target_col_kind {
        ColumnKind::Continuous => TargetKind::Continuous,
        ColumnKind::Binary => TargetKind::Binary,
        ColumnKind::Categorical => {
            return Err(DataError::Schema(
                "categorical targets are not supported; use binary".into(),
            ))
        }
    };

    let mut rows: Vec<Vec<Option<f64>>> = Vec::new();
    let mut target = Vec::new();
    let mut categories: Vec<Vec<String>> = vec![Vec::new(); feature_cols.len()];
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(wrap_csv)?;
        let target_field = record.get(target_idx).unwrap_or("");
        if is_missing_token(target_field) {
            return Err(DataError::TargetMissing { row: row_idx });
        }
        target.push(
            target_field
                .parse::<f64>()
                .map_err(|_| DataError::Parse {
                    row: row_idx,
                    col: target_idx,
                    token: target_field.to_string(),
                })?,
        );

        let mut row = Vec::with_capacity(feature_cols.len());
        for (out_col, (file_col, _, kind)) in feature_cols.iter().enumerate() {
            let field = record.get(*file_col).unwrap_or("");
            if is_missing_token(field) {
                row.push(None);
                continue;
            }
            let value = match kind {
                ColumnKind::Continuous | ColumnKind::Binary => {
                    field.parse::<f64>().map_err(|_| DataError::Parse {
                        row: row_idx,
                        col: *file_col,
                        token: field.to_string(),
                    })?
                }
                ColumnKind::Categorical => {
                    let cats = &mut categories[out_col];
                    let code = match cats.iter().position(|c| c == field) {
                        Some(i) => i,
                        None => {
                            cats.push(field.to_string());
                            cats.len() - 1
                        }
                    };
                    code as f64
                }
            };
            row.push(Some(value));
        }
        rows.push(row);
    }

    let n = rows.len();
    let p = feature_cols.len();
    let mut values = Array2::zeros((n, p));
    let mut mask = Array2::from_elem((n, p), false);
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            match cell {
                Some(v) => values[(i, j)] = *v,
                None => mask[(i, j)] = true,
            }
        }
    }

    let feature_names: Vec<String> = feature_cols.iter().map(|(_, n, _)| n.clone()).collect();
    let feature_meta = feature_cols
        .iter()
        .zip(&categories)
        .map(|((_, name, kind), cats)| match kind {
            ColumnKind::Continuous => Ok(FeatureKind::Continuous),
            ColumnKind::Binary => Ok(FeatureKind::Binary),
            ColumnKind::Categorical => {
                if cats.len() < 2 {
                    Err(DataError::Schema(format!(
                        "categorical column {name:?} holds {} distinct values; need at least 2",
                        cats.len()
                    )))
                } else {
                    Ok(FeatureKind::Categorical(cats.clone()))
                }
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    Dataset::new(
        name,
        MaskedMatrix::new(values, mask),
        target,
        feature_names,
        feature_meta,
        target_kind,
    )
}

/// Writes a dataset back to CSV: features in order, then the target column.
/// Missing cells become empty fields; categorical codes become their labels.
pub fn write_csv(ds: &Dataset, target_name: &str, path: &Path) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_path(path).map_err(|source| DataError::Csv {
        path: path.display().to_string(),
        source,
    })?;
    let wrap_csv = |source| DataError::Csv {
        path: path.display().to_string(),
        source,
    };

    let mut header: Vec<&str> = ds.feature_names.iter().map(|s| s.as_str()).collect();
    header.push(target_name);
    writer.write_record(&header).map_err(wrap_csv)?;

    for i in 0..ds.n_rows() {
        let mut record: Vec<String> = Vec::with_capacity(ds.n_cols() + 1);
        for j in 0..ds.n_cols() {
            let field = match ds.features.get(i, j) {
                None => String::new(),
                Some(v) => match &ds.feature_meta[j] {
                    FeatureKind::Categorical(cats) => {
                        let code = v as usize;
                        if v.fract() != 0.0 || code >= cats.len() {
                            return Err(DataError::UnknownCategory {
                                col: j,
                                code: v,
                                n_categories: cats.len(),
                            });
                        }
                        cats[code].clone()
                    }
                    _ => format!("{v:?}"),
                },
            };
            record.push(field);
        }
        record.push(format!("{:?}", ds.target[i]));
        writer.write_record(&record).map_err(wrap_csv)?;
    }
    writer.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}
