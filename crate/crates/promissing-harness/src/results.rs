//! Result and plot tables.
//!
//! Every experiment emits one row per (design cell × metric) into a
//! [`ResultTable`] with a fixed, versioned column schema. Floats are written
//! with shortest-roundtrip formatting, so saving and loading a table
//! reproduces every value bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Column names of results-schema v1. Loaders reject any other header.
pub const RESULT_SCHEMA_V1: [&str; 10] = [
    "experiment",
    "dataset",
    "mechanism",
    "fraction",
    "method",
    "repetition",
    "fold",
    "metric",
    "value",
    "seed",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub dataset: String,
    /// Corruption mechanism, or `none` for uncorrupted cells.
    pub mechanism: String,
    pub fraction: f64,
    pub method: String,
    pub repetition: usize,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
    /// The repetition-level derived seed, for exact re-runs of that cell.
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultTable {
    rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Values of every row matching the predicate, in emission order.
    pub fn values_where<F: Fn(&ResultRow) -> bool>(&self, pred: F) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| pred(r))
            .map(|r| r.value)
            .collect()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&RESULT_SCHEMA_V1.join(","));
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{},{},{},{},{:?},{}",
                r.experiment,
                r.dataset,
                r.mechanism,
                r.fraction,
                r.method,
                r.repetition,
                r.fold,
                r.metric,
                r.value,
                r.seed
            );
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .with_context(|| format!("writing results to {}", path.display()))
    }

    pub fn from_csv_string(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().context("results file is empty")?;
        if header != RESULT_SCHEMA_V1.join(",") {
            bail!("unrecognized results schema: {header:?} (this loader reads v1)");
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != RESULT_SCHEMA_V1.len() {
                bail!("line {}: expected {} fields, got {}", i + 2, RESULT_SCHEMA_V1.len(), fields.len());
            }
            let parse_err = |col: &str| format!("line {}: bad {col}", i + 2);
            rows.push(ResultRow {
                experiment: fields[0].to_string(),
                dataset: fields[1].to_string(),
                mechanism: fields[2].to_string(),
                fraction: fields[3].parse().with_context(|| parse_err("fraction"))?,
                method: fields[4].to_string(),
                repetition: fields[5].parse().with_context(|| parse_err("repetition"))?,
                fold: fields[6].parse().with_context(|| parse_err("fold"))?,
                metric: fields[7].to_string(),
                value: fields[8].parse().with_context(|| parse_err("value"))?,
                seed: fields[9].parse().with_context(|| parse_err("seed"))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading results from {}", path.display()))?;
        Self::from_csv_string(&text)
    }
}

/// One aggregated curve point for external plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotRow {
    pub curve: String,
    pub x: f64,
    pub y: f64,
    pub y_std: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotTable {
    pub rows: Vec<PlotRow>,
}

impl PlotTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("curve,x,y,y_std\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{:?},{:?},{:?}", r.curve, r.x, r.y, r.y_std);
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())
            .with_context(|| format!("writing plot data to {}", path.display()))
    }
}

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation; NaN for an empty slice.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Median with midpoint interpolation for even counts; NaN for empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median of NaN"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}
