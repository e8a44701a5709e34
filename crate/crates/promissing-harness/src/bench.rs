//! Tabular benchmark: cross-validated comparison of imputers and pruning
//! first layers under simulated missingness, reported as the performance
//! drop against a full model trained on complete data.
//!
//! Per dataset the pipeline is: one-hot encode, rank encoded columns by
//! mutual information with the target (the top column is corrupted, the
//! second conditions MAR), then per repetition and fold: corrupt, impute
//! (pruning methods keep their masks), standardize the continuous columns
//! on the training fold, train, and score. Training seeds are shared across
//! methods within a (repetition, fold) cell, so at fraction 0 every method
//! reproduces the full model bit for bit. Datasets whose full-model median
//! AUC falls below 0.6 (or median SMSE above 1) are excluded with a logged
//! reason.

use anyhow::{Context, Result};
use promissing::corrupt::{corrupt, rank_features_mi, MissingSpec};
use promissing::data::{
    encode, load_csv_str, split_kfold, standardize, Dataset, Schema, TargetKind,
};
use promissing::impute::{apply_imputer, fit_imputer};
use promissing::metrics::{auc, smse};
use promissing::nn::{benchmark_network, train, FirstLayer, TrainConfig};
use promissing::MaskedMatrix;

use crate::config::ExperimentConfig;
use crate::results::{mean, median, std_dev, PlotRow, PlotTable, ResultRow, ResultTable};
use crate::seeds::{derive, label};

const MI_BINS: usize = 10;
const MIN_BASELINE_AUC: f64 = 0.6;
const MAX_BASELINE_SMSE: f64 = 1.0;

/// The four datasets compiled into the binary: three binary-classification
/// sets (`gauss6`, `bimix5`, `catmix`) and one regression set (`linreg6`).
pub fn bundled_datasets() -> Result<Vec<Dataset>> {
    const SETS: [(&str, &str, &str); 4] = [
        (
            "gauss6",
            include_str!("../data/gauss6.csv"),
            include_str!("../data/gauss6.schema"),
        ),
        (
            "bimix5",
            include_str!("../data/bimix5.csv"),
            include_str!("../data/bimix5.schema"),
        ),
        (
            "catmix",
            include_str!("../data/catmix.csv"),
            include_str!("../data/catmix.schema"),
        ),
        (
            "linreg6",
            include_str!("../data/linreg6.csv"),
            include_str!("../data/linreg6.schema"),
        ),
    ];
    SETS.iter()
        .map(|&(name, csv, schema)| {
            let schema = Schema::from_text(schema, name)?;
            Ok(load_csv_str(name, csv, &schema)?)
        })
        .collect()
}

/// Runs the benchmark grid over `datasets`. Emits per-cell `auc`/`smse`
/// rows, `auc_drop`/`smse_increase` rows relative to the matching full
/// model, per-repetition medians across datasets (`all-classification` /
/// `all-regression`), and their means across repetitions.
pub fn run_benchmark(datasets: &[Dataset], cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = ResultTable::new();
    let mut included: Vec<&str> = Vec::new();
    for ds in datasets {
        let kept = run_dataset(ds, cfg, &mut table)
            .with_context(|| format!("benchmark dataset {}", ds.name))?;
        if kept {
            included.push(&ds.name);
        }
    }
    summarize(cfg, &mut table, &included);
    Ok(table)
}

/// Runs one dataset; returns false if the full-model baseline failed the
/// sanity threshold and the corrupted grid was skipped.
fn run_dataset(ds: &Dataset, cfg: &ExperimentConfig, table: &mut ResultTable) -> Result<bool> {
    let master = cfg.master_seed;
    let regression = ds.target_kind == TargetKind::Continuous;
    let (encoded, emap) = encode(ds)?;
    let continuous = emap.continuous_cols();
    let p = emap.encoded_width();
    let n = encoded.n_rows();
    let labels: Vec<bool> = ds.target.iter().map(|&t| t > 0.5).collect();

    let ranked = rank_features_mi(&encoded, &ds.target, MI_BINS)?;
    let target_feature = ranked[0].0;
    let cond_feature = ranked.get(1).map(|&(j, _)| j);

    let metric_name = if regression { "smse" } else { "auc" };
    let drop_name = if regression { "smse_increase" } else { "auc_drop" };

    // Pass 1: full-model baselines on clean data, one per (repetition, fold).
    let mut baselines: Vec<Vec<f64>> = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let split_seed = derive(master, &[label("bench-split"), label(&ds.name), rep as u64]);
        let plan = split_kfold(n, cfg.folds, split_seed)?;
        let mut per_fold = Vec::with_capacity(cfg.folds);
        for (fold, split) in plan.folds.iter().enumerate() {
            let train_seed = derive(
                master,
                &[label("bench-train"), label(&ds.name), rep as u64, fold as u64],
            );
            let score = fit_and_score(
                &encoded.select_rows(&split.train),
                &encoded.select_rows(&split.test),
                ds,
                split,
                &labels,
                FirstLayer::Dense,
                &continuous,
                p,
                regression,
                cfg,
                train_seed,
            )
            .with_context(|| format!("full model, repetition {rep} fold {fold}"))?;
            per_fold.push(score);
            table.push(ResultRow {
                experiment: "benchmark".into(),
                dataset: ds.name.clone(),
                mechanism: "none".into(),
                fraction: 0.0,
                method: "full".into(),
                repetition: rep,
                fold,
                metric: metric_name.into(),
                value: score,
                seed: train_seed,
            });
        }
        baselines.push(per_fold);
    }

    let all_baselines: Vec<f64> = baselines.iter().flatten().copied().collect();
    let baseline_median = median(&all_baselines);
    let unusable = if regression {
        baseline_median > MAX_BASELINE_SMSE
    } else {
        baseline_median < MIN_BASELINE_AUC
    };
    if unusable {
        eprintln!(
            "excluding dataset {}: full-model median {metric_name} = {baseline_median:.3}",
            ds.name
        );
        table.push(ResultRow {
            experiment: "benchmark".into(),
            dataset: ds.name.clone(),
            mechanism: "none".into(),
            fraction: 0.0,
            method: "full".into(),
            repetition: 0,
            fold: 0,
            metric: "excluded".into(),
            value: 1.0,
            seed: master,
        });
        return Ok(false);
    }

    // Pass 2: the corrupted grid, reusing the baseline's splits and seeds.
    for rep in 0..cfg.repetitions {
        let split_seed = derive(master, &[label("bench-split"), label(&ds.name), rep as u64]);
        let plan = split_kfold(n, cfg.folds, split_seed)?;
        for &mechanism in &cfg.mechanisms {
            for &fraction in &cfg.fractions {
                let corrupt_seed = derive(
                    master,
                    &[
                        label("bench-corrupt"),
                        label(&ds.name),
                        rep as u64,
                        label(&mechanism.to_string()),
                        fraction.to_bits(),
                    ],
                );
                let spec = MissingSpec {
                    mechanism,
                    fraction,
                    target_feature,
                    cond_feature,
                    seed: corrupt_seed,
                };
                let (corrupted, _report) = corrupt(&encoded, &spec)?;
                for (fold, split) in plan.folds.iter().enumerate() {
                    let train_seed = derive(
                        master,
                        &[label("bench-train"), label(&ds.name), rep as u64, fold as u64],
                    );
                    let corr_train = corrupted.select_rows(&split.train);
                    let corr_test = corrupted.select_rows(&split.test);
                    for &method in &cfg.methods {
                        let (train_x, test_x) =
                            match method.imputer_kind(emap.has_categorical()) {
                                Some(kind) => {
                                    let imp = fit_imputer(kind, &corr_train)?;
                                    (
                                        apply_imputer(&imp, &corr_train)?,
                                        apply_imputer(&imp, &corr_test)?,
                                    )
                                }
                                None => (corr_train.clone(), corr_test.clone()),
                            };
                        let score = fit_and_score(
                            &train_x,
                            &test_x,
                            ds,
                            split,
                            &labels,
                            method.first_layer(),
                            &continuous,
                            p,
                            regression,
                            cfg,
                            train_seed,
                        )
                        .with_context(|| {
                            format!(
                                "{mechanism} f={fraction} method={method} \
                                 repetition {rep} fold {fold}"
                            )
                        })?;
                        let drop = if regression {
                            score - baselines[rep][fold]
                        } else {
                            baselines[rep][fold] - score
                        };
                        for (metric, value) in
                            [(metric_name, score), (drop_name, drop)]
                        {
                            table.push(ResultRow {
                                experiment: "benchmark".into(),
                                dataset: ds.name.clone(),
                                mechanism: mechanism.to_string(),
                                fraction,
                                method: method.name().into(),
                                repetition: rep,
                                fold,
                                metric: metric.into(),
                                value,
                                seed: train_seed,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Standardizes the continuous columns on the training rows, trains one
/// benchmark-preset network, and scores it on the test rows.
#[allow(clippy::too_many_arguments)]
fn fit_and_score(
    train_x: &MaskedMatrix,
    test_x: &MaskedMatrix,
    ds: &Dataset,
    split: &promissing::data::Fold,
    labels: &[bool],
    first: FirstLayer,
    continuous: &[usize],
    p: usize,
    regression: bool,
    cfg: &ExperimentConfig,
    train_seed: u64,
) -> Result<f64> {
    let (parts, _stats) = standardize(train_x, &[test_x], continuous)?;
    let [train_std, test_std]: [MaskedMatrix; 2] =
        parts.try_into().expect("train plus one other");
    let train_y: Vec<f64> = split.train.iter().map(|&i| ds.target[i]).collect();

    let mut net = benchmark_network(p, first, regression);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: train_seed,
        shuffle: true,
        optimizer: cfg.optimizer,
    };
    train(&mut net, &[&train_std], &train_y, &tc)?;

    let scores = net.predict_positive(&[&test_std])?;
    if regression {
        let test_y: Vec<f64> = split.test.iter().map(|&i| ds.target[i]).collect();
        Ok(smse(&scores, &test_y)?)
    } else {
        let test_labels: Vec<bool> = split.test.iter().map(|&i| labels[i]).collect();
        Ok(auc(&scores, &test_labels)?)
    }
}

/// Emits, per (mechanism, fraction, method): a per-repetition median across
/// the included datasets (fold means first), then the mean of those medians
/// across repetitions. Classification and regression datasets aggregate
/// separately under `all-classification` / `all-regression`.
fn summarize(cfg: &ExperimentConfig, table: &mut ResultTable, included: &[&str]) {
    for (group, drop_name) in [
        ("all-classification", "auc_drop"),
        ("all-regression", "smse_increase"),
    ] {
        for &mechanism in &cfg.mechanisms {
            let mech = mechanism.to_string();
            for &fraction in &cfg.fractions {
                for &method in &cfg.methods {
                    let mut rep_medians = Vec::with_capacity(cfg.repetitions);
                    for rep in 0..cfg.repetitions {
                        let per_dataset: Vec<f64> = included
                            .iter()
                            .filter_map(|&name| {
                                let folds = table.values_where(|r| {
                                    r.dataset == name
                                        && r.mechanism == mech
                                        && r.fraction == fraction
                                        && r.method == method.name()
                                        && r.repetition == rep
                                        && r.metric == drop_name
                                });
                                if folds.is_empty() {
                                    None
                                } else {
                                    Some(mean(&folds))
                                }
                            })
                            .collect();
                        if !per_dataset.is_empty() {
                            rep_medians.push(median(&per_dataset));
                        }
                    }
                    if rep_medians.is_empty() {
                        continue;
                    }
                    for (rep, &value) in rep_medians.iter().enumerate() {
                        table.push(ResultRow {
                            experiment: "benchmark".into(),
                            dataset: group.into(),
                            mechanism: mech.clone(),
                            fraction,
                            method: method.name().into(),
                            repetition: rep,
                            fold: 0,
                            metric: format!("{drop_name}_median"),
                            value,
                            seed: cfg.master_seed,
                        });
                    }
                    table.push(ResultRow {
                        experiment: "benchmark".into(),
                        dataset: group.into(),
                        mechanism: mech.clone(),
                        fraction,
                        method: method.name().into(),
                        repetition: 0,
                        fold: 0,
                        metric: format!("{drop_name}_summary"),
                        value: mean(&rep_medians),
                        seed: cfg.master_seed,
                    });
                }
            }
        }
    }
}

/// One curve per method: mean per-repetition median drop (y) against the
/// missing fraction (x), for one mechanism and task group.
pub fn bench_plot(table: &ResultTable, mechanism: &str, group: &str) -> PlotTable {
    use std::collections::BTreeMap;
    let mut series: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    for row in table.rows() {
        if row.dataset != group
            || row.mechanism != mechanism
            || !row.metric.ends_with("_median")
        {
            continue;
        }
        series
            .entry((row.method.clone(), row.fraction.to_bits()))
            .or_default()
            .push(row.value);
    }
    let mut plot = PlotTable::default();
    for ((method, fraction), values) in series {
        plot.rows.push(PlotRow {
            curve: method,
            x: f64::from_bits(fraction),
            y: mean(&values),
            y_std: std_dev(&values),
        });
    }
    plot
}
