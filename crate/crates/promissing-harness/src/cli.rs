//! Command line interface. Every subcommand reads an optional `key=value`
//! config file, applies flag overrides on top, and writes its artifacts
//! under an output directory resolved from `--out-dir`, the config file,
//! the `PROMISSING_OUT_DIR` environment variable, or the working
//! directory, in that order.
//!
//! Exit codes: 0 on success, 1 for usage problems (bad flags, bad config
//! values), 2 for runtime failures (missing files, training errors).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use promissing::corrupt::{corrupt, rank_features_mi, Mechanism, MissingSpec};
use promissing::data::{
    encode, load_csv, simulate_multimodal, simulate_xor, write_csv, ColumnKind, Dataset,
    FeatureKind, MultimodalSpec, Schema, TargetKind,
};
use promissing::masked::MaskedMatrix;
use promissing::nn::{
    benchmark_network, load_network, save_network, train, xor_network, FirstLayer, Network,
    OptimizerConfig, TrainConfig,
};

use crate::bench::{bench_plot, bundled_datasets, run_benchmark};
use crate::config::{usage, ConfigMap, ExperimentConfig, Method, UsageError};
use crate::explain::{counterfactual_interpret, interpretation_to_csv, UnitKind};
use crate::fusion::{fusion_plot, run_fusion_experiment, write_trajectories};
use crate::xor::{run_xor_experiment, xor_plot};

const MI_BINS: usize = 10;

#[derive(Parser, Debug)]
#[command(
    name = "promissing",
    version,
    about = "Missing-value-native neural networks: simulation, corruption, imputation, and experiments"
)]
struct Cli {
    /// Line-oriented key=value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for artifacts without an explicit --out path.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset CSV plus a schema sidecar.
    Simulate(SimulateArgs),
    /// Remove values from one feature under a missingness mechanism.
    Corrupt(CorruptArgs),
    /// Fill the missing cells of a CSV with a fitted imputer.
    Impute(ImputeArgs),
    /// Train one network on a CSV and save the model.
    Train(TrainArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Learning-curve study on the two-feature XOR simulation.
    Xor(ExperimentArgs),
    /// Cross-validated imputer/pruning comparison on the bundled datasets.
    Bench(ExperimentArgs),
    /// Multimodal fusion study with progressive modality removal.
    Fusion(ExperimentArgs),
    /// Rank modalities or features of one sample by counterfactual masking.
    Explain(ExplainArgs),
    /// Export a pruning layer's neutralizer matrix as CSV.
    ExportNeutralizers(ExportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// xor or multimodal.
    #[arg(long, default_value = "xor")]
    kind: String,
    #[arg(long)]
    n: Option<usize>,
    /// Gaussian noise variance for the xor clusters.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Comma-separated feature counts per modality (multimodal).
    #[arg(long, value_delimiter = ',')]
    modality_sizes: Vec<usize>,
    /// Class separation in feature space (multimodal).
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; the schema sidecar replaces its extension with .schema.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorruptArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Schema file; defaults to the input with a .schema extension.
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    mechanism: Mechanism,
    #[arg(long)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Feature to corrupt, by column name. Defaults to the feature with
    /// the highest mutual information with the target; that ranking needs
    /// fully observed features, so inputs that already contain missing
    /// values must name the feature explicitly.
    #[arg(long)]
    feature: Option<String>,
    /// Conditioning feature for MAR, by column name. Defaults to the
    /// second-ranked feature.
    #[arg(long)]
    cond_feature: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ImputeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// zero, mean, knn, or iterative.
    #[arg(long, default_value = "mean")]
    method: Method,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    /// dense, promissing, or m_promissing.
    #[arg(long, default_value = "promissing")]
    first_layer: String,
    /// xor (4 tanh units, needs 2 features) or benchmark (two hidden
    /// layers sized from the feature count).
    #[arg(long, default_value = "benchmark")]
    preset: String,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    schema: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Shared experiment knobs; unset values fall back to the config file and
/// then the experiment's defaults.
#[derive(Args, Debug, Default)]
struct ExperimentArgs {
    /// Comma-separated mechanisms (mcar,mar,mnar).
    #[arg(long, value_delimiter = ',')]
    mechanism: Vec<Mechanism>,
    /// Comma-separated missing fractions.
    #[arg(long, value_delimiter = ',')]
    fraction: Vec<f64>,
    /// Comma-separated methods (zero,mean,knn,iterative,promissing,m_promissing).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Simulated sample count (xor and fusion).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    modality_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    repr_sizes: Vec<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    head_weight: Option<f64>,
    #[arg(long)]
    max_removed: Option<usize>,
    /// Results CSV path; plot and trajectory files are named after it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    /// Headerless CSV with one record; empty cells are missing values.
    #[arg(long)]
    row: PathBuf,
    /// modality or feature.
    #[arg(long, default_value = "modality")]
    unit: UnitKind,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// Which pruning layer, as an index into the model's pruning layers
    /// in graph order.
    #[arg(long, default_value_t = 0)]
    layer: usize,
    /// Stabilizer added to near-zero weights before dividing.
    #[arg(long, default_value_t = 1e-8)]
    epsilon: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses and runs one invocation. Returns the process exit code instead
/// of exiting so tests can call it in-process.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            if err.downcast_ref::<UsageError>().is_some() {
                eprintln!("usage error: {err:#}");
                1
            } else {
                eprintln!("error: {err:#}");
                2
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let cmap = match &cli.config {
        Some(path) => ConfigMap::from_file(path)?,
        None => ConfigMap::empty(),
    };
    let out_dir = resolve_out_dir(&cli, &cmap)?;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &cmap, &out_dir),
        Command::Corrupt(args) => cmd_corrupt(args, &out_dir),
        Command::Impute(args) => cmd_impute(args, &out_dir),
        Command::Train(args) => cmd_train(args, &cmap, &out_dir),
        Command::Predict(args) => cmd_predict(args, &out_dir),
        Command::Xor(args) => cmd_xor(args, &cmap, &out_dir),
        Command::Bench(args) => cmd_bench(args, &cmap, &out_dir),
        Command::Fusion(args) => cmd_fusion(args, &cmap, &out_dir),
        Command::Explain(args) => cmd_explain(args, &out_dir),
        Command::ExportNeutralizers(args) => cmd_export(args, &out_dir),
    }
}

fn resolve_out_dir(cli: &Cli, cmap: &ConfigMap) -> Result<PathBuf> {
    let dir = cli
        .out_dir
        .clone()
        .or_else(|| cmap.get("out_dir").map(PathBuf::from))
        .or_else(|| std::env::var_os("PROMISSING_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}

fn out_path(out: Option<PathBuf>, out_dir: &Path, default_name: &str) -> PathBuf {
    out.unwrap_or_else(|| out_dir.join(default_name))
}

/// Sibling path sharing `base`'s directory and stem: `r.csv` with suffix
/// `plot-mnar` becomes `r-plot-mnar.csv`.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    base.with_file_name(format!("{stem}-{suffix}.csv"))
}

fn schema_path(input: &Path, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| input.with_extension("schema"))
}

fn load_dataset(input: &Path, schema: Option<PathBuf>) -> Result<(Dataset, Schema)> {
    let spath = schema_path(input, schema);
    let schema = Schema::from_file(&spath)
        .with_context(|| format!("loading schema {}", spath.display()))?;
    let ds = load_csv(input, &schema)
        .with_context(|| format!("loading dataset {}", input.display()))?;
    Ok((ds, schema))
}

fn schema_text(ds: &Dataset, target_name: &str) -> String {
    let mut out = String::new();
    for (name, kind) in ds.feature_names.iter().zip(&ds.feature_meta) {
        let kind = match kind {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Binary => "binary",
            FeatureKind::Categorical(_) => "categorical",
        };
        out.push_str(&format!("{name}={kind}\n"));
    }
    let target_kind = match ds.target_kind {
        TargetKind::Binary => "binary",
        TargetKind::Continuous => "continuous",
    };
    out.push_str(&format!("{target_name}={target_kind}\n"));
    out.push_str(&format!("target={target_name}\n"));
    out
}

fn write_dataset(ds: &Dataset, target_name: &str, csv_path: &Path) -> Result<()> {
    write_csv(ds, target_name, csv_path)
        .with_context(|| format!("writing {}", csv_path.display()))?;
    let spath = csv_path.with_extension("schema");
    fs::write(&spath, schema_text(ds, target_name))
        .with_context(|| format!("writing {}", spath.display()))?;
    println!("wrote {} and {}", csv_path.display(), spath.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, cmap: &ConfigMap, out_dir: &Path) -> Result<()> {
    let seed = args.seed.or(cmap.get_parsed("seed")?).unwrap_or(42);
    match args.kind.as_str() {
        "xor" => {
            let n = args.n.or(cmap.get_parsed("n")?).unwrap_or(1000);
            let noise = args
                .noise_var
                .or(cmap.get_parsed("noise_var")?)
                .unwrap_or(0.25);
            let ds = simulate_xor(n, noise, seed)?;
            let path = out_path(args.out, out_dir, "xor-data.csv");
            write_dataset(&ds, "label", &path)
        }
        "multimodal" => {
            let n = args.n.or(cmap.get_parsed("n")?).unwrap_or(240);
            let sizes = if args.modality_sizes.is_empty() {
                cmap.get_list("modality_sizes")?
                    .unwrap_or_else(|| vec![3, 2, 4, 2, 3])
            } else {
                args.modality_sizes
            };
            let separation = args
                .separation
                .or(cmap.get_parsed("separation")?)
                .unwrap_or(1.2);
            let md = simulate_multimodal(
                &MultimodalSpec {
                    n,
                    modality_sizes: sizes,
                    separation,
                },
                seed,
            )?;
            // Flatten to one table; modality structure stays visible in the
            // column names.
            let mut names = Vec::new();
            for (name, block) in md.iter() {
                for j in 0..block.n_cols() {
                    names.push(format!("{name}_x{j}"));
                }
            }
            let blocks: Vec<&MaskedMatrix> = md.iter().map(|(_, m)| m).collect();
            let features = MaskedMatrix::hstack(&blocks);
            let width = features.n_cols();
            let ds = Dataset::new(
                "multimodal".into(),
                features,
                md.target.clone(),
                names,
                vec![FeatureKind::Continuous; width],
                TargetKind::Binary,
            )?;
            let path = out_path(args.out, out_dir, "multimodal-data.csv");
            write_dataset(&ds, "label", &path)
        }
        other => Err(usage(format!(
            "unknown simulation kind {other:?}, expected xor or multimodal"
        ))),
    }
}

fn feature_index(ds: &Dataset, name: &str) -> Result<usize> {
    ds.feature_names
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| {
            usage(format!(
                "no feature named {name:?}; columns are {:?}",
                ds.feature_names
            ))
        })
}

fn cmd_corrupt(args: CorruptArgs, out_dir: &Path) -> Result<()> {
    let (mut ds, _) = load_dataset(&args.input, args.schema)?;
    let explicit = args
        .feature
        .as_deref()
        .map(|name| feature_index(&ds, name))
        .transpose()?;
    let explicit_cond = args
        .cond_feature
        .as_deref()
        .map(|name| feature_index(&ds, name))
        .transpose()?;

    let (target_feature, cond_feature) = if ds.features.has_missing() {
        let target = explicit.ok_or_else(|| {
            usage(
                "input already has missing values, so the mutual-information ranking \
                 is unavailable; pass --feature (and --cond-feature for MAR)",
            )
        })?;
        if args.mechanism == Mechanism::Mar && explicit_cond.is_none() {
            return Err(usage("MAR on partially missing input needs --cond-feature"));
        }
        (target, explicit_cond)
    } else {
        let ranked = rank_features_mi(&ds.features, &ds.target, MI_BINS)?;
        let target = explicit.unwrap_or(ranked[0].0);
        let cond = explicit_cond.or_else(|| {
            ranked
                .iter()
                .map(|&(j, _)| j)
                .find(|&j| j != target)
        });
        (target, cond)
    };

    let spec = MissingSpec {
        mechanism: args.mechanism,
        fraction: args.fraction,
        target_feature,
        cond_feature: if args.mechanism == Mechanism::Mar {
            cond_feature
        } else {
            None
        },
        seed: args.seed,
    };
    let (corrupted, report) = corrupt(&ds.features, &spec)?;
    ds.features = corrupted;
    let path = out_path(args.out, out_dir, "corrupted.csv");
    write_dataset(&ds, &target_column_name(&args.input)?, &path)?;
    println!(
        "masked {} rows of feature {} ({})",
        report.rows_masked.len(),
        ds.feature_names[target_feature],
        match report.percentile_window {
            Some((lo, hi)) => format!("percentile window [{lo:.1}, {hi:.1}]"),
            None => "rows chosen uniformly".into(),
        }
    );
    Ok(())
}

/// Target column name as recorded in the input's schema sidecar.
fn target_column_name(input: &Path) -> Result<String> {
    let spath = input.with_extension("schema");
    Ok(Schema::from_file(&spath)?.target)
}

fn cmd_impute(args: ImputeArgs, out_dir: &Path) -> Result<()> {
    let spath = schema_path(&args.input, args.schema.clone());
    let schema = Schema::from_file(&spath)?;
    if schema
        .columns()
        .iter()
        .any(|(_, kind)| *kind == ColumnKind::Categorical)
    {
        return Err(usage(
            "imputing categorical columns is not supported here: fitted fills are \
             fractional category codes that cannot be written back as category names",
        ));
    }
    let (mut ds, _) = load_dataset(&args.input, Some(spath))?;
    let kind = args.method.imputer_kind(false).ok_or_else(|| {
        usage(format!(
            "{} is not an imputer; use zero, mean, knn, or iterative",
            args.method
        ))
    })?;
    let imputer = promissing::impute::fit_imputer(kind, &ds.features)?;
    ds.features = promissing::impute::apply_imputer(&imputer, &ds.features)?;
    let path = out_path(args.out, out_dir, "imputed.csv");
    write_dataset(&ds, &schema.target, &path)
}

fn parse_first_layer(name: &str) -> Result<FirstLayer> {
    match name {
        "dense" => Ok(FirstLayer::Dense),
        "promissing" => Ok(FirstLayer::Promissing),
        "m_promissing" => Ok(FirstLayer::MPromissing),
        other => Err(usage(format!(
            "unknown first layer {other:?}, expected dense, promissing, or m_promissing"
        ))),
    }
}

fn optimizer_from(name: Option<&str>, lr: Option<f64>, default: OptimizerConfig) -> Result<OptimizerConfig> {
    let base_lr = match default {
        OptimizerConfig::Sgd { lr } => lr,
        OptimizerConfig::Adam { lr, .. } => lr,
    };
    let lr = lr.unwrap_or(base_lr);
    match name {
        None => Ok(match default {
            OptimizerConfig::Sgd { .. } => OptimizerConfig::sgd(lr),
            OptimizerConfig::Adam { .. } => OptimizerConfig::adam(lr),
        }),
        Some("sgd") => Ok(OptimizerConfig::sgd(lr)),
        Some("adam") => Ok(OptimizerConfig::adam(lr)),
        Some(other) => Err(usage(format!(
            "unknown optimizer {other:?}, expected sgd or adam"
        ))),
    }
}

fn cmd_train(args: TrainArgs, cmap: &ConfigMap, out_dir: &Path) -> Result<()> {
    let (ds, schema) = load_dataset(&args.input, args.schema)?;
    let first = parse_first_layer(&args.first_layer)?;
    let (encoded, _emap) = encode(&ds)?;
    let regression = ds.target_kind == TargetKind::Continuous;

    let mut net = match args.preset.as_str() {
        "xor" => {
            if encoded.n_cols() != 2 {
                return Err(usage(format!(
                    "the xor preset takes exactly 2 features, got {}",
                    encoded.n_cols()
                )));
            }
            if regression {
                return Err(usage("the xor preset is a classifier"));
            }
            xor_network(first)
        }
        "benchmark" => benchmark_network(encoded.n_cols(), first, regression),
        other => {
            return Err(usage(format!(
                "unknown preset {other:?}, expected xor or benchmark"
            )))
        }
    };

    let opt_name = args
        .optimizer
        .or_else(|| cmap.get("optimizer").map(str::to_string));
    let lr = match args.lr {
        Some(v) => Some(v),
        None => cmap.get_parsed("learning_rate")?,
    };
    let tc = TrainConfig {
        epochs: args.epochs.or(cmap.get_parsed("epochs")?).unwrap_or(100),
        batch_size: args
            .batch_size
            .or(cmap.get_parsed("batch_size")?)
            .unwrap_or(10),
        seed: args.seed.or(cmap.get_parsed("seed")?).unwrap_or(42),
        shuffle: true,
        optimizer: optimizer_from(opt_name.as_deref(), lr, OptimizerConfig::sgd(0.1))?,
    };
    let history = train(&mut net, &[&encoded], &ds.target, &tc)?;
    let path = out_path(args.out, out_dir, "model.net");
    save_network(&net, &path)?;
    println!(
        "trained {} epochs on {} (target {}), final loss {:.6}; wrote {}",
        tc.epochs,
        args.input.display(),
        schema.target,
        history.epoch_loss.last().copied().unwrap_or(f64::NAN),
        path.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs, out_dir: &Path) -> Result<()> {
    let net = load_network(&args.model)?;
    let (ds, _) = load_dataset(&args.input, args.schema)?;
    let (encoded, _) = encode(&ds)?;
    let scores = net.predict_positive(&[&encoded])?;
    let mut text = String::from("prediction\n");
    for s in &scores {
        text.push_str(&format!("{s:?}\n"));
    }
    let path = out_path(args.out, out_dir, "predictions.csv");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {} predictions to {}", scores.len(), path.display());
    Ok(())
}

/// Applies config-file and flag overrides onto an experiment's defaults.
fn merge_experiment(
    mut cfg: ExperimentConfig,
    args: &ExperimentArgs,
    cmap: &ConfigMap,
) -> Result<ExperimentConfig> {
    if let Some(v) = cmap.get_list("mechanisms")? {
        cfg.mechanisms = v;
    }
    if !args.mechanism.is_empty() {
        cfg.mechanisms = args.mechanism.clone();
    }
    if let Some(v) = cmap.get_list("fractions")? {
        cfg.fractions = v;
    }
    if !args.fraction.is_empty() {
        cfg.fractions = args.fraction.clone();
    }
    if let Some(v) = cmap.get_list("methods")? {
        cfg.methods = v;
    }
    if !args.method.is_empty() {
        cfg.methods = args.method.clone();
    }
    if let Some(v) = args.reps.or(cmap.get_parsed("repetitions")?) {
        cfg.repetitions = v;
    }
    if let Some(v) = args.folds.or(cmap.get_parsed("folds")?) {
        cfg.folds = v;
    }
    if let Some(v) = args.epochs.or(cmap.get_parsed("epochs")?) {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size.or(cmap.get_parsed("batch_size")?) {
        cfg.batch_size = v;
    }
    if let Some(v) = args.seed.or(cmap.get_parsed("seed")?) {
        cfg.master_seed = v;
    }
    if let Some(v) = args.n.or(cmap.get_parsed("n")?) {
        cfg.n = v;
    }
    if let Some(v) = args.noise_var.or(cmap.get_parsed("noise_var")?) {
        cfg.noise_var = v;
    }
    if let Some(v) = cmap.get_list("modality_sizes")? {
        cfg.modality_sizes = v;
    }
    if !args.modality_sizes.is_empty() {
        cfg.modality_sizes = args.modality_sizes.clone();
    }
    if let Some(v) = cmap.get_list("repr_sizes")? {
        cfg.repr_sizes = v;
    }
    if !args.repr_sizes.is_empty() {
        cfg.repr_sizes = args.repr_sizes.clone();
    }
    if let Some(v) = args.separation.or(cmap.get_parsed("separation")?) {
        cfg.separation = v;
    }
    if let Some(v) = args.head_weight.or(cmap.get_parsed("head_weight")?) {
        cfg.head_weight = v;
    }
    if let Some(v) = args.max_removed.or(cmap.get_parsed("max_removed")?) {
        cfg.max_removed = Some(v);
    }
    let opt_name = args
        .optimizer
        .clone()
        .or_else(|| cmap.get("optimizer").map(str::to_string));
    let lr = match args.lr {
        Some(v) => Some(v),
        None => cmap.get_parsed("learning_rate")?,
    };
    if opt_name.is_some() || lr.is_some() {
        cfg.optimizer = optimizer_from(opt_name.as_deref(), lr, cfg.optimizer)?;
    }
    cfg.output = args.out.clone();
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_xor(args: ExperimentArgs, cmap: &ConfigMap, out_dir: &Path) -> Result<()> {
    let cfg = merge_experiment(ExperimentConfig::xor_defaults(), &args, cmap)?;
    let table = run_xor_experiment(&cfg)?;
    let results = out_path(cfg.output.clone(), out_dir, "xor-results.csv");
    table.save(&results)?;
    println!("wrote {} rows to {}", table.rows().len(), results.display());
    for mech in &cfg.mechanisms {
        for &fraction in &cfg.fractions {
            let plot = xor_plot(&table, &mech.to_string(), fraction);
            let path = sibling(&results, &format!("plot-{mech}-{fraction}"));
            plot.save(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_bench(args: ExperimentArgs, cmap: &ConfigMap, out_dir: &Path) -> Result<()> {
    let cfg = merge_experiment(ExperimentConfig::bench_defaults(), &args, cmap)?;
    let datasets = bundled_datasets()?;
    let table = run_benchmark(&datasets, &cfg)?;
    let results = out_path(cfg.output.clone(), out_dir, "bench-results.csv");
    table.save(&results)?;
    println!("wrote {} rows to {}", table.rows().len(), results.display());
    for mech in &cfg.mechanisms {
        for group in ["all-classification", "all-regression"] {
            let plot = bench_plot(&table, &mech.to_string(), group);
            if plot.rows.is_empty() {
                continue;
            }
            let path = sibling(&results, &format!("plot-{mech}-{group}"));
            plot.save(&path)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn cmd_fusion(args: ExperimentArgs, cmap: &ConfigMap, out_dir: &Path) -> Result<()> {
    let cfg = merge_experiment(ExperimentConfig::fusion_defaults(), &args, cmap)?;
    let (nets, trajectories, table) = run_fusion_experiment(&cfg)?;
    let results = out_path(cfg.output.clone(), out_dir, "fusion-results.csv");
    table.save(&results)?;
    println!("wrote {} rows to {}", table.rows().len(), results.display());

    let traj_path = sibling(&results, "trajectories");
    write_trajectories(&traj_path, &trajectories)?;
    println!("wrote {} trajectories to {}", trajectories.len(), traj_path.display());

    let plot_path = sibling(&results, "plot");
    fusion_plot(&trajectories).save(&plot_path)?;
    println!("wrote {}", plot_path.display());

    for (name, net) in &nets {
        let path = out_dir.join(format!("fusion-{name}.net"));
        save_network(net, &path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_explain(args: ExplainArgs, out_dir: &Path) -> Result<()> {
    let net = load_network(&args.model)?;
    let sample = read_modal_row(&args.row, &net)?;
    let interp = counterfactual_interpret(&net, &sample, args.unit)?;
    let path = out_path(args.out, out_dir, "attributions.csv");
    fs::write(&path, interpretation_to_csv(&interp))
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "base prediction {:.6}; wrote {} attributions to {}",
        interp.base,
        interp.attributions.len(),
        path.display()
    );
    Ok(())
}

/// Reads a headerless one-record CSV and splits it into the model's input
/// blocks. Empty cells and the literal `nan` mean missing.
fn read_modal_row(path: &Path, net: &Network) -> Result<Vec<(String, MaskedMatrix)>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| usage(format!("{} holds no data row", path.display())))?;
    let cells: Vec<Option<f64>> = line
        .split(',')
        .map(|cell| {
            let cell = cell.trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                Ok(None)
            } else {
                cell.parse::<f64>()
                    .map(Some)
                    .map_err(|_| usage(format!("cell {cell:?} is not a number")))
            }
        })
        .collect::<Result<_>>()?;
    let widths = net.input_widths();
    let total: usize = widths.iter().sum();
    if cells.len() != total {
        return Err(usage(format!(
            "model expects {total} features across {} inputs, row has {}",
            widths.len(),
            cells.len()
        )));
    }
    let mut sample = Vec::new();
    let mut start = 0;
    for (i, &w) in widths.iter().enumerate() {
        let mut block = MaskedMatrix::all_missing(1, w);
        for (j, cell) in cells[start..start + w].iter().enumerate() {
            if let Some(v) = cell {
                block.set(0, j, *v);
            }
        }
        sample.push((format!("m{}", i + 1), block));
        start += w;
    }
    Ok(sample)
}

fn cmd_export(args: ExportArgs, out_dir: &Path) -> Result<()> {
    let net = load_network(&args.model)?;
    let nodes = net.nan_dense_nodes();
    if nodes.is_empty() {
        return Err(usage(
            "this model has no pruning layers, so there are no neutralizers to export",
        ));
    }
    let node = *nodes.get(args.layer).ok_or_else(|| {
        usage(format!(
            "layer index {} out of range: the model has {} pruning layers",
            args.layer,
            nodes.len()
        ))
    })?;
    let matrix = net.export_neutralizers(node, args.epsilon)?;
    let path = out_path(args.out, out_dir, "neutralizers.csv");
    let mut buf = Vec::new();
    matrix.to_csv(&mut buf)?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}
