//! Feature encoding: one-hot expansion of categorical columns.

use std::ops::Range;

use ndarray::Array2;

use super::{DataError, Dataset, FeatureKind};
use crate::masked::MaskedMatrix;

/// Where each source column landed in the encoded matrix.
#[derive(Debug, Clone)]
pub struct EncodingMap {
    spans: Vec<Range<usize>>,
    kinds: Vec<FeatureKind>,
    width: usize,
}

impl EncodingMap {
    /// Encoded column range of a source column.
    pub fn span(&self, source_col: usize) -> Range<usize> {
        self.spans[source_col].clone()
    }

    pub fn encoded_width(&self) -> usize {
        self.width
    }

    pub fn source_count(&self) -> usize {
        self.spans.len()
    }

    pub fn source_kind(&self, source_col: usize) -> &FeatureKind {
        &self.kinds[source_col]
    }

    /// Encoded indices of continuous source columns (standardization targets).
    pub fn continuous_cols(&self) -> Vec<usize> {
        self.spans
            .iter()
            .zip(&self.kinds)
            .filter(|(_, kind)| matches!(kind, FeatureKind::Continuous))
            .map(|(span, _)| span.start)
            .collect()
    }

    /// True if any source column is categorical (one-hot blocks present).
    pub fn has_categorical(&self) -> bool {
        self.kinds
            .iter()
            .any(|k| matches!(k, FeatureKind::Categorical(_)))
    }
}

/// Expands categorical columns to one-hot blocks; continuous and binary
/// columns are copied as-is. A missing categorical cell yields an all-missing
/// block, so downstream layers see the whole category as unknown.
pub fn encode(ds: &Dataset) -> Result<(MaskedMatrix, EncodingMap), DataError> {
    let mut spans = Vec::with_capacity(ds.n_cols());
    let mut width = 0;
    for kind in &ds.feature_meta {
        let w = match kind {
            FeatureKind::Continuous | FeatureKind::Binary => 1,
            FeatureKind::Categorical(cats) => cats.len(),
        };
        spans.push(width..width + w);
        width += w;
    }

    let n = ds.n_rows();
    let mut values = Array2::zeros((n, width));
    let mut mask = Array2::from_elem((n, width), false);
    for i in 0..n {
        for (j, kind) in ds.feature_meta.iter().enumerate() {
            let span = spans[j].clone();
            match ds.features.get(i, j) {
                None => {
                    for e in span {
                        values[(i, e)] = f64::NAN;
                        mask[(i, e)] = true;
                    }
                }
                Some(v) => match kind {
                    FeatureKind::Continuous | FeatureKind::Binary => {
                        values[(i, span.start)] = v;
                    }
                    FeatureKind::Categorical(cats) => {
                        let code = v as usize;
                        if v.fract() != 0.0 || v < 0.0 || code >= cats.len() {
                            return Err(DataError::UnknownCategory {
                                col: j,
                                code: v,
                                n_categories: cats.len(),
                            });
                        }
                        values[(i, span.start + code)] = 1.0;
                    }
                },
            }
        }
    }

    let map = EncodingMap {
        spans,
        kinds: ds.feature_meta.clone(),
        width,
    };
    Ok((MaskedMatrix::new(values, mask), map))
}

/// Recovers the category label of one encoded cell block, or `None` if the
/// block is missing. The block must be a valid one-hot vector.
pub fn decode_category<'a>(
    map: &'a EncodingMap,
    encoded: &MaskedMatrix,
    row: usize,
    source_col: usize,
) -> Result<Option<&'a str>, DataError> {
    let FeatureKind::Categorical(cats) = &map.kinds[source_col] else {
        return Err(DataError::Invalid(format!(
            "source column {source_col} is not categorical"
        )));
    };
    let span = map.span(source_col);
    if encoded.is_missing(row, span.start) {
        return Ok(None);
    }
    let mut hot = None;
    for (offset, e) in span.enumerate() {
        let v = encoded.get(row, e).ok_or_else(|| {
            DataError::Invalid(format!(
                "one-hot block of source column {source_col} is partially missing at row {row}"
            ))
        })?;
        if v == 1.0 {
            if hot.is_some() {
                return Err(DataError::Invalid(format!(
                    "row {row} has multiple hot cells in source column {source_col}"
                )));
            }
            hot = Some(offset);
        } else if v != 0.0 {
            return Err(DataError::Invalid(format!(
                "row {row} holds non-0/1 value {v} in a one-hot block"
            )));
        }
    }
    let offset = hot.ok_or_else(|| {
        DataError::Invalid(format!(
            "row {row} has no hot cell in source column {source_col}"
        ))
    })?;
    Ok(Some(&cats[offset]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TargetKind;
    use ndarray::array;

    fn cat_dataset() -> Dataset {
        // Column 0 categorical over {a,b,c} (codes 0,1,2), column 1 continuous.
        let values = array![[1.0, 10.0], [0.0, 20.0], [2.0, 30.0], [f64::NAN, 40.0]];
        let mask = array![
            [false, false],
            [false, false],
            [false, false],
            [true, false]
        ];
        Dataset::new(
            "t".into(),
            MaskedMatrix::new(values, mask),
            vec![0.0, 1.0, 0.0, 1.0],
            vec!["cat".into(), "x".into()],
            vec![
                FeatureKind::Categorical(vec!["a".into(), "b".into(), "c".into()]),
                FeatureKind::Continuous,
            ],
            TargetKind::Binary,
        )
        .unwrap()
    }

    #[test]
    fn one_hot_blocks_match_codes() {
        let ds = cat_dataset();
        let (enc, map) = encode(&ds).unwrap();
        assert_eq!(map.encoded_width(), 4);
        assert_eq!(map.span(0), 0..3);
        assert_eq!(map.span(1), 3..4);
        // Code 1 ("b") → [0,1,0].
        assert_eq!(enc.get(0, 0), Some(0.0));
        assert_eq!(enc.get(0, 1), Some(1.0));
        assert_eq!(enc.get(0, 2), Some(0.0));
        assert_eq!(enc.get(0, 3), Some(10.0));
    }

    #[test]
    fn missing_category_masks_whole_block() {
        let ds = cat_dataset();
        let (enc, _) = encode(&ds).unwrap();
        for e in 0..3 {
            assert!(enc.is_missing(3, e));
        }
        assert_eq!(enc.get(3, 3), Some(40.0));
    }

    #[test]
    fn continuous_only_encoding_is_identity() {
        let values = array![[1.0, 2.0], [3.0, f64::NAN]];
        let mask = array![[false, false], [false, true]];
        let ds = Dataset::new(
            "t".into(),
            MaskedMatrix::new(values, mask),
            vec![0.0, 1.0],
            vec!["a".into(), "b".into()],
            vec![FeatureKind::Continuous, FeatureKind::Continuous],
            TargetKind::Binary,
        )
        .unwrap();
        let (enc, map) = encode(&ds).unwrap();
        assert_eq!(enc, ds.features);
        assert!(!map.has_categorical());
        assert_eq!(map.continuous_cols(), vec![0, 1]);
    }

    #[test]
    fn decode_round_trips_observed_categories() {
        let ds = cat_dataset();
        let (enc, map) = encode(&ds).unwrap();
        assert_eq!(decode_category(&map, &enc, 0, 0).unwrap(), Some("b"));
        assert_eq!(decode_category(&map, &enc, 1, 0).unwrap(), Some("a"));
        assert_eq!(decode_category(&map, &enc, 2, 0).unwrap(), Some("c"));
        assert_eq!(decode_category(&map, &enc, 3, 0).unwrap(), None);
    }

    #[test]
    fn out_of_range_code_is_rejected() {
        let ds = Dataset::new(
            "t".into(),
            MaskedMatrix::from_dense(array![[5.0]]),
            vec![0.0],
            vec!["cat".into()],
            vec![FeatureKind::Categorical(vec!["a".into(), "b".into()])],
            TargetKind::Binary,
        )
        .unwrap();
        assert!(matches!(
            encode(&ds),
            Err(DataError::UnknownCategory { col: 0, .. })
        ));
    }
}
