//! Experiment configuration: method names, per-experiment defaults, and the
//! line-oriented `key=value` config file that command-line flags override.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use promissing::corrupt::Mechanism;
use promissing::impute::ImputerKind;
use promissing::nn::{FirstLayer, OptimizerConfig};

/// A configuration or command-line mistake; the CLI maps it to exit code 1
/// instead of the runtime-failure code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

/// A missing-data handling strategy under comparison. The imputer methods
/// fill values and feed a plain dense network; the pruning methods feed
/// masks directly into a nan_dense first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Zero,
    Mean,
    Knn,
    Iterative,
    Promissing,
    MPromissing,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Zero,
        Method::Mean,
        Method::Knn,
        Method::Iterative,
        Method::Promissing,
        Method::MPromissing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Zero => "zero",
            Method::Mean => "mean",
            Method::Knn => "knn",
            Method::Iterative => "iterative",
            Method::Promissing => "promissing",
            Method::MPromissing => "m_promissing",
        }
    }

    pub fn first_layer(self) -> FirstLayer {
        match self {
            Method::Promissing => FirstLayer::Promissing,
            Method::MPromissing => FirstLayer::MPromissing,
            _ => FirstLayer::Dense,
        }
    }

    /// The imputer this method fits, or `None` for the pruning methods.
    /// kNN drops to k=1 when one-hot blocks are present, so filled cells
    /// stay valid indicator patterns.
    pub fn imputer_kind(self, has_categorical: bool) -> Option<ImputerKind> {
        match self {
            Method::Zero => Some(ImputerKind::Constant(0.0)),
            Method::Mean => Some(ImputerKind::Mean),
            Method::Knn => Some(ImputerKind::Knn {
                k: if has_categorical { 1 } else { 5 },
            }),
            Method::Iterative => Some(ImputerKind::DEFAULT_ITERATIVE),
            Method::Promissing | Method::MPromissing => None,
        }
    }

    pub fn is_imputer(self) -> bool {
        !matches!(self, Method::Promissing | Method::MPromissing)
    }
}

impl FromStr for Method {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                UsageError(format!(
                    "unknown method {s:?}; expected one of zero, mean, knn, iterative, \
                     promissing, m_promissing"
                ))
            })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Xor,
    Benchmark,
    Fusion,
}

/// Everything an experiment run needs. Experiment-specific fields are
/// ignored by the other experiments; `*_defaults()` supply the desk-scale
/// values that the CLI and config file override.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub mechanisms: Vec<Mechanism>,
    pub fractions: Vec<f64>,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub master_seed: u64,
    /// Where the CLI writes the result table; run functions never write.
    pub output: Option<PathBuf>,

    // XOR simulation shape.
    pub n: usize,
    pub noise_var: f64,

    // Fusion shape.
    pub modality_sizes: Vec<usize>,
    pub repr_sizes: Vec<usize>,
    pub separation: f64,
    pub head_weight: f64,
    /// Cap on simultaneously removed modalities during augmentation;
    /// defaults to M-1.
    pub max_removed: Option<usize>,
}

impl ExperimentConfig {
    /// XOR learning-curve study: 1000 samples, noise variance 0.25, SGD.
    pub fn xor_defaults() -> Self {
        Self {
            experiment: ExperimentKind::Xor,
            mechanisms: vec![Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar],
            fractions: vec![0.3, 0.5],
            methods: Method::ALL.to_vec(),
            repetitions: 10,
            folds: 2,
            epochs: 100,
            batch_size: 10,
            optimizer: OptimizerConfig::sgd(0.1),
            master_seed: 42,
            output: None,
            n: 1000,
            noise_var: 0.25,
            modality_sizes: Vec::new(),
            repr_sizes: Vec::new(),
            separation: 0.0,
            head_weight: 1.0,
            max_removed: None,
        }
    }

    /// Tabular benchmark: 2-fold CV, SGD, 100 epochs, batches of 10.
    pub fn bench_defaults() -> Self {
        Self {
            experiment: ExperimentKind::Benchmark,
            fractions: vec![0.1, 0.25, 0.5, 0.9],
            ..Self::xor_defaults()
        }
    }

    /// Multimodal fusion: 5 synthetic modalities, Adam at the small rate a
    /// multi-head loss tolerates.
    pub fn fusion_defaults() -> Self {
        Self {
            experiment: ExperimentKind::Fusion,
            mechanisms: Vec::new(),
            fractions: Vec::new(),
            methods: vec![Method::Knn, Method::Promissing, Method::MPromissing],
            repetitions: 10,
            folds: 4,
            epochs: 80,
            batch_size: 32,
            optimizer: OptimizerConfig::adam(3e-4),
            master_seed: 42,
            output: None,
            n: 240,
            noise_var: 0.0,
            modality_sizes: vec![3, 2, 4, 2, 3],
            repr_sizes: vec![5, 2, 5, 2, 5],
            separation: 1.2,
            head_weight: 1.0,
            max_removed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(usage("repetitions must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(usage("no methods selected"));
        }
        for &f in &self.fractions {
            if !(0.0..=1.0).contains(&f) || !f.is_finite() {
                return Err(usage(format!("fraction {f} outside [0, 1]")));
            }
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(usage("epochs and batch size must be at least 1"));
        }
        self.optimizer
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        match self.experiment {
            ExperimentKind::Xor => {
                if self.mechanisms.is_empty() {
                    return Err(usage("no mechanisms selected"));
                }
                if self.n < 4 {
                    return Err(usage("xor needs at least 4 samples"));
                }
            }
            ExperimentKind::Benchmark => {
                if self.mechanisms.is_empty() {
                    return Err(usage("no mechanisms selected"));
                }
                if self.folds < 2 {
                    return Err(usage("cross-validation needs at least 2 folds"));
                }
            }
            ExperimentKind::Fusion => {
                let m = self.modality_sizes.len();
                if m < 2 {
                    return Err(usage("fusion needs at least 2 modalities"));
                }
                if self.repr_sizes.len() != m {
                    return Err(usage(format!(
                        "{} representation sizes for {m} modalities",
                        self.repr_sizes.len()
                    )));
                }
                if let Some(cap) = self.max_removed {
                    if cap >= m {
                        return Err(usage(format!(
                            "max_removed {cap} must be below the modality count {m}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Key=value pairs from a config file. Lookup is string-typed; the CLI
/// parses values on merge so a bad entry names its key.
#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    entries: HashMap<String, String>,
}

impl ConfigMap {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                usage(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            entries.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Parses the value under `key`, if present.
    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key {key}={raw:?} cannot be parsed"))),
        }
    }

    /// Splits a comma-separated value under `key` and parses each item.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => parse_list(raw)
                .map(Some)
                .map_err(|e| usage(format!("config key {key}: {e}"))),
        }
    }
}

/// Parses a comma-separated list, rejecting empty items.
pub fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>, String> {
    raw.split(',')
        .map(|item| {
            let item = item.trim();
            if item.is_empty() {
                return Err("empty list item".to_string());
            }
            item.parse()
                .map_err(|_| format!("cannot parse list item {item:?}"))
        })
        .collect()
}
