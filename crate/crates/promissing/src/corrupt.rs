//! Missingness simulators (MCAR, MAR, MNAR), mutual-information feature
//! ranking, and modality-removal augmentation.
//!
//! MAR and MNAR mask the rows whose conditioning value falls inside a random
//! percentile window of width `100·f`: the lower bound is drawn uniformly
//! from `[0, 100 - 100·f]`, so the expected masked fraction equals `f` by
//! construction. MNAR windows are taken over the corrupted feature itself
//! (censoring); MAR windows over a separate conditioning feature.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::ModalDataset;
use crate::masked::MaskedMatrix;

#[derive(Debug, Error)]
pub enum CorruptError {
    #[error("fraction {fraction} of {n} rows masks fewer than one row")]
    TooFewRows { fraction: f64, n: usize },
    #[error("fraction must lie in [0, 1], got {0}")]
    BadFraction(f64),
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error("column {col} already has missing cells")]
    PreexistingMissing { col: usize },
    #[error("no columns to rank")]
    Rank,
    #[error("need at least 2 bins, got {0}")]
    BadBins(usize),
    #[error("cannot remove up to {max_removed} of {m} modalities")]
    Augment { max_removed: usize, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mechanism {
    Mcar,
    Mar,
    Mnar,
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        })
    }
}

impl FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mcar" => Ok(Mechanism::Mcar),
            "mar" => Ok(Mechanism::Mar),
            "mnar" => Ok(Mechanism::Mnar),
            other => Err(format!("unknown mechanism {other:?}")),
        }
    }
}

/// How to corrupt one feature column.
#[derive(Debug, Clone)]
pub struct MissingSpec {
    pub mechanism: Mechanism,
    /// Fraction of samples to affect, in [0, 1].
    pub fraction: f64,
    /// Column whose values are removed.
    pub target_feature: usize,
    /// Conditioning column for MAR; ignored by MCAR/MNAR.
    pub cond_feature: Option<usize>,
    pub seed: u64,
}

/// What a corruption pass did: which rows were masked and, for MAR/MNAR,
/// the percentile window that selected them.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionReport {
    pub mechanism: Mechanism,
    pub target_feature: usize,
    pub fraction: f64,
    /// Sorted row indices that were masked.
    pub rows_masked: Vec<usize>,
    /// `[l, l + 100·f]` percentile bounds; `None` for MCAR or `f = 0`.
    pub percentile_window: Option<(f64, f64)>,
}

impl CorruptionReport {
    pub fn csv_header() -> &'static str {
        "mechanism,feature,lower_percentile,fraction,rows_masked"
    }

    pub fn csv_row(&self) -> String {
        let l = self
            .percentile_window
            .map(|(l, _)| format!("{l:?}"))
            .unwrap_or_default();
        format!(
            "{},{},{},{:?},{}",
            self.mechanism,
            self.target_feature,
            l,
            self.fraction,
            self.rows_masked.len()
        )
    }
}

/// Empirical quantile by midpoint interpolation: sorted value `v_i` sits at
/// plotting position `(i + 0.5) / n`; quantiles between positions are linear,
/// and quantiles outside the positions clamp to the extremes.
fn quantile(sorted: &[f64], t: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0);
    let pos = |i: usize| (i as f64 + 0.5) / n as f64;
    if t <= pos(0) {
        return sorted[0];
    }
    if t >= pos(n - 1) {
        return sorted[n - 1];
    }
    // pos is strictly increasing, so t sits between two adjacent positions.
    let i = ((t * n as f64) - 0.5).floor() as usize;
    let (lo, hi) = (pos(i), pos(i + 1));
    let w = (t - lo) / (hi - lo);
    sorted[i] + w * (sorted[i + 1] - sorted[i])
}

/// Applies one missingness mechanism to one column.
///
/// MCAR masks exactly `round(f·n)` uniformly chosen rows. MAR/MNAR mask the
/// rows whose conditioning value lies inside the drawn percentile window,
/// boundary ties included. Cells outside the target column are untouched.
pub fn corrupt(
    x: &MaskedMatrix,
    spec: &MissingSpec,
) -> Result<(MaskedMatrix, CorruptionReport), CorruptError> {
    let n = x.n_rows();
    let f = spec.fraction;
    if !(0.0..=1.0).contains(&f) || !f.is_finite() {
        return Err(CorruptError::BadFraction(f));
    }
    if spec.target_feature >= x.n_cols() {
        return Err(CorruptError::Spec(format!(
            "target feature {} out of range for {} columns",
            spec.target_feature,
            x.n_cols()
        )));
    }
    if (0..n).any(|i| x.is_missing(i, spec.target_feature)) {
        return Err(CorruptError::PreexistingMissing {
            col: spec.target_feature,
        });
    }

    if f == 0.0 {
        return Ok((
            x.clone(),
            CorruptionReport {
                mechanism: spec.mechanism,
                target_feature: spec.target_feature,
                fraction: 0.0,
                rows_masked: Vec::new(),
                percentile_window: None,
            },
        ));
    }
    if f * (n as f64) < 1.0 {
        return Err(CorruptError::TooFewRows { fraction: f, n });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rows_masked, window) = match spec.mechanism {
        Mechanism::Mcar => {
            let k = (f * n as f64).round() as usize;
            let mut rows = rand::seq::index::sample(&mut rng, n, k).into_vec();
            rows.sort_unstable();
            (rows, None)
        }
        Mechanism::Mar | Mechanism::Mnar => {
            let cond_col = match spec.mechanism {
                Mechanism::Mar => spec.cond_feature.ok_or_else(|| {
                    CorruptError::Spec("MAR needs a conditioning feature".into())
                })?,
                _ => spec.target_feature,
            };
            if spec.mechanism == Mechanism::Mar && cond_col == spec.target_feature {
                return Err(CorruptError::Spec(
                    "MAR conditioning feature must differ from the target".into(),
                ));
            }
            if cond_col >= x.n_cols() {
                return Err(CorruptError::Spec(format!(
                    "conditioning feature {cond_col} out of range for {} columns",
                    x.n_cols()
                )));
            }
            let lower = Uniform::new_inclusive(0.0, 100.0 - 100.0 * f).sample(&mut rng);
            let upper = lower + 100.0 * f;

            let mut observed: Vec<f64> = x
                .observed_in_col(cond_col)
                .into_iter()
                .map(|(_, v)| v)
                .collect();
            observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let v_lo = quantile(&observed, lower / 100.0);
            let v_hi = quantile(&observed, upper / 100.0);

            let rows: Vec<usize> = (0..n)
                .filter(|&i| {
                    x.get(i, cond_col)
                        .map(|v| v_lo <= v && v <= v_hi)
                        .unwrap_or(false)
                })
                .collect();
            (rows, Some((lower, upper)))
        }
    };

    let mut out = x.clone();
    for &i in &rows_masked {
        out.set_missing(i, spec.target_feature);
    }
    Ok((
        out,
        CorruptionReport {
            mechanism: spec.mechanism,
            target_feature: spec.target_feature,
            fraction: f,
            rows_masked,
            percentile_window: window,
        },
    ))
}

/// Equal-frequency discretization codes for one column: position `r` in the
/// stable (value, index) sort lands in bin `r·bins/n`. Columns with at most
/// `bins` distinct values keep those values as their own codes.
fn discretize(values: &[f64], bins: usize) -> Vec<usize> {
    let n = values.len();
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() <= bins {
        return values
            .iter()
            .map(|v| distinct.iter().position(|d| d == v).unwrap())
            .collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        values[a]
            .partial_cmp(&values[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut codes = vec![0; n];
    for (rank, &idx) in order.iter().enumerate() {
        codes[idx] = rank * bins / n;
    }
    codes
}

/// Plug-in mutual information (nats) between two code vectors.
fn mutual_information(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |&m| m + 1);
    let kb = b.iter().max().map_or(0, |&m| m + 1);
    let mut joint = vec![0.0; ka * kb];
    let mut pa = vec![0.0; ka];
    let mut pb = vec![0.0; kb];
    for (&ai, &bi) in a.iter().zip(b) {
        joint[ai * kb + bi] += 1.0;
        pa[ai] += 1.0;
        pb[bi] += 1.0;
    }
    let mut mi = 0.0;
    for ai in 0..ka {
        for bi in 0..kb {
            let pj = joint[ai * kb + bi] / n;
            if pj > 0.0 {
                mi += pj * (pj * n * n / (pa[ai] * pb[bi])).ln();
            }
        }
    }
    mi
}

/// Ranks columns by mutual information with the target, descending; ties
/// break toward the lower column index. Continuous columns (more than `bins`
/// distinct values) are discretized into equal-frequency bins first.
pub fn rank_features_mi(
    x: &MaskedMatrix,
    y: &[f64],
    bins: usize,
) -> Result<Vec<(usize, f64)>, CorruptError> {
    if x.n_cols() == 0 {
        return Err(CorruptError::Rank);
    }
    if bins < 2 {
        return Err(CorruptError::BadBins(bins));
    }
    assert_eq!(x.n_rows(), y.len(), "target length must match row count");
    let y_codes = discretize(y, bins);
    let mut ranked: Vec<(usize, f64)> = (0..x.n_cols())
        .map(|j| {
            let col: Vec<f64> = (0..x.n_rows())
                .map(|i| {
                    x.get(i, j)
                        .expect("ranked columns must be fully observed")
                })
                .collect();
            (j, mutual_information(&discretize(&col, bins), &y_codes))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Total rows produced by `augment_modalities` for `m_modalities`, `n` source
/// rows, and subsets of up to `max_removed` removed modalities:
/// `n · Σ_{m=0}^{max_removed} C(M, m)`.
pub fn augmented_row_count(m_modalities: usize, n: usize, max_removed: usize) -> u128 {
    let mut subsets: u128 = 0;
    for m in 0..=max_removed {
        let mut c: u128 = 1;
        for i in 0..m {
            c = c * (m_modalities - i) as u128 / (i + 1) as u128;
        }
        subsets += c;
    }
    subsets * n as u128
}

/// Appends, for every modality subset of size 0..=max_removed in
/// lexicographic order, a copy of all rows with those modalities fully
/// masked. The size-0 subset comes first, so the output starts with the
/// original rows. Ordering is deterministic; the seed is accepted for
/// interface stability and unused.
pub fn augment_modalities(
    md: &ModalDataset,
    max_removed: usize,
    _seed: u64,
) -> Result<ModalDataset, CorruptError> {
    let m = md.n_modalities();
    if max_removed >= m {
        return Err(CorruptError::Augment { max_removed, m });
    }
    let mut blocks: Vec<ModalDataset> = Vec::new();
    for removed in 0..=max_removed {
        for subset in (0..m).combinations(removed) {
            blocks.push(md.with_modalities_masked(&subset));
        }
    }
    let refs: Vec<&ModalDataset> = blocks.iter().collect();
    ModalDataset::vstack(&refs).map_err(|e| CorruptError::Spec(e.to_string()))
}
