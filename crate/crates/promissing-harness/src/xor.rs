//! XOR learning-curve study.
//!
//! Per repetition: simulate the noisy-XOR sample, corrupt one feature over
//! the full sample, split it in half, and train one network per method with
//! seeds shared across methods so comparisons are paired. Every epoch the
//! model is scored on the clean test half and on the corrupted test half.
//! Summary rows report training bias (clean-test gap to the full model
//! trained on uncorrupted data) and test bias (one model's clean minus
//! corrupted test score).

use anyhow::{Context, Result};
use promissing::corrupt::{corrupt, rank_features_mi, MissingSpec};
use promissing::data::{simulate_xor, split_kfold};
use promissing::impute::{apply_imputer, fit_imputer};
use promissing::metrics::auc;
use promissing::nn::{train_with, xor_network, FirstLayer, Network, TrainConfig};
use promissing::MaskedMatrix;

use crate::config::ExperimentConfig;
use crate::results::{mean, std_dev, PlotRow, PlotTable, ResultRow, ResultTable};
use crate::seeds::{derive, derive_for, label};

const MI_BINS: usize = 10;

/// Runs the study over every (mechanism, fraction, method) cell of `cfg`
/// plus one full-model control per repetition (method `full`, mechanism
/// `none`), which anchors the training-bias rows.
pub fn run_xor_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let mut table = ResultTable::new();
    for rep in 0..cfg.repetitions {
        run_repetition(cfg, rep, &mut table)
            .with_context(|| format!("xor repetition {rep}"))?;
    }
    Ok(table)
}

fn run_repetition(cfg: &ExperimentConfig, rep: usize, table: &mut ResultTable) -> Result<()> {
    let master = cfg.master_seed;
    let sim_seed = derive_for(master, "xor-sim", rep as u64);
    let split_seed = derive_for(master, "xor-split", rep as u64);
    let train_seed = derive_for(master, "xor-train", rep as u64);

    let ds = simulate_xor(cfg.n, cfg.noise_var, sim_seed)?;
    let plan = split_kfold(cfg.n, 2, split_seed)?;
    let fold = &plan.folds[0];

    let clean_train = ds.features.select_rows(&fold.train);
    let clean_test = ds.features.select_rows(&fold.test);
    let train_targets: Vec<f64> = fold.train.iter().map(|&i| ds.target[i]).collect();
    let test_labels: Vec<bool> = fold.test.iter().map(|&i| ds.target[i] > 0.5).collect();

    // Both XOR features have near-zero marginal information, so the ranking
    // settles the corruption target by its index tie-break.
    let ranked = rank_features_mi(&ds.features, &ds.target, MI_BINS)?;
    let target_feature = ranked[0].0;
    let cond_feature = ranked.get(1).map(|&(j, _)| j);

    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: train_seed,
        shuffle: true,
        optimizer: cfg.optimizer,
    };

    let (full_clean, _) = fit_curves(
        FirstLayer::Dense,
        &clean_train,
        &train_targets,
        &clean_test,
        None,
        &test_labels,
        &tc,
    )
    .context("full-model control")?;
    let full_final = *full_clean.last().expect("at least one epoch");
    emit_model_rows(
        table, "none", 0.0, "full", rep, train_seed, &full_clean, &[], None,
    );

    for &mechanism in &cfg.mechanisms {
        for &fraction in &cfg.fractions {
            let corrupt_seed = derive(
                master,
                &[
                    label("xor-corrupt"),
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
            let (corrupted, _report) = corrupt(&ds.features, &spec)?;
            let corr_train = corrupted.select_rows(&fold.train);
            let corr_test = corrupted.select_rows(&fold.test);

            for &method in &cfg.methods {
                let (train_x, test_x) = match method.imputer_kind(false) {
                    Some(kind) => {
                        let imp = fit_imputer(kind, &corr_train)?;
                        (
                            apply_imputer(&imp, &corr_train)?,
                            apply_imputer(&imp, &corr_test)?,
                        )
                    }
                    None => (corr_train.clone(), corr_test.clone()),
                };
                let (clean_curve, corr_curve) = fit_curves(
                    method.first_layer(),
                    &train_x,
                    &train_targets,
                    &clean_test,
                    Some(&test_x),
                    &test_labels,
                    &tc,
                )
                .with_context(|| {
                    format!("{mechanism} f={fraction} method={method} seed={train_seed}")
                })?;
                emit_model_rows(
                    table,
                    &mechanism.to_string(),
                    fraction,
                    method.name(),
                    rep,
                    train_seed,
                    &clean_curve,
                    &corr_curve,
                    Some(full_final),
                );
            }
        }
    }
    Ok(())
}

/// Trains one xor-preset network and returns its per-epoch AUC on the clean
/// test half and (when given) on the corrupted test half.
fn fit_curves(
    first: FirstLayer,
    train_x: &MaskedMatrix,
    train_y: &[f64],
    clean_test: &MaskedMatrix,
    corrupted_test: Option<&MaskedMatrix>,
    test_labels: &[bool],
    tc: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut net = xor_network(first);
    let mut clean_curve = Vec::with_capacity(tc.epochs);
    let mut corr_curve = Vec::with_capacity(tc.epochs);
    train_with(&mut net, &[train_x], train_y, tc, |_, net| {
        clean_curve.push(eval_auc(net, clean_test, test_labels));
        if let Some(ct) = corrupted_test {
            corr_curve.push(eval_auc(net, ct, test_labels));
        }
        None
    })?;
    Ok((clean_curve, corr_curve))
}

fn eval_auc(net: &Network, x: &MaskedMatrix, labels: &[bool]) -> f64 {
    let scores = net
        .predict_positive(&[x])
        .expect("prediction on evaluation split");
    auc(&scores, labels).expect("AUC on evaluation split")
}

#[allow(clippy::too_many_arguments)]
fn emit_model_rows(
    table: &mut ResultTable,
    mechanism: &str,
    fraction: f64,
    method: &str,
    rep: usize,
    seed: u64,
    clean: &[f64],
    corrupted: &[f64],
    full_final: Option<f64>,
) {
    let mut push = |metric: String, value: f64| {
        table.push(ResultRow {
            experiment: "xor".into(),
            dataset: "xor".into(),
            mechanism: mechanism.into(),
            fraction,
            method: method.into(),
            repetition: rep,
            fold: 0,
            metric,
            value,
            seed,
        });
    };
    for (e, &v) in clean.iter().enumerate() {
        push(format!("clean_auc@{}", e + 1), v);
    }
    for (e, &v) in corrupted.iter().enumerate() {
        push(format!("corrupted_auc@{}", e + 1), v);
    }
    let final_clean = *clean.last().expect("at least one epoch");
    push("final_clean_auc".into(), final_clean);
    if let Some(&final_corr) = corrupted.last() {
        push("final_corrupted_auc".into(), final_corr);
        push("test_bias".into(), final_clean - final_corr);
    }
    if let Some(full) = full_final {
        push("training_bias".into(), full - final_clean);
    }
}

/// Aggregates the learning curves of one (mechanism, fraction) cell across
/// repetitions: mean and standard deviation of each method's clean and
/// corrupted AUC per epoch, plus the full-model reference curve.
pub fn xor_plot(table: &ResultTable, mechanism: &str, fraction: f64) -> PlotTable {
    use std::collections::BTreeMap;
    let mut series: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for row in table.rows() {
        let reference = row.method == "full" && row.mechanism == "none";
        if !reference && (row.mechanism != mechanism || row.fraction != fraction) {
            continue;
        }
        let (kind, epoch) = match row.metric.split_once('@') {
            Some((kind, e)) => match e.parse::<usize>() {
                Ok(epoch) => (kind, epoch),
                Err(_) => continue,
            },
            None => continue,
        };
        let curve = match kind {
            "clean_auc" => format!("{}-clean", row.method),
            "corrupted_auc" => format!("{}-corrupted", row.method),
            _ => continue,
        };
        series.entry((curve, epoch)).or_default().push(row.value);
    }
    let mut plot = PlotTable::default();
    for ((curve, epoch), values) in series {
        plot.rows.push(PlotRow {
            curve,
            x: epoch as f64,
            y: mean(&values),
            y_std: std_dev(&values),
        });
    }
    plot
}

#[cfg(test)]
mod tests {
    use super::*;
    use promissing::corrupt::Mechanism;
    use crate::config::Method;

    fn tiny_cfg() -> ExperimentConfig {
        ExperimentConfig {
            repetitions: 1,
            epochs: 4,
            n: 60,
            mechanisms: vec![Mechanism::Mcar],
            fractions: vec![0.3],
            methods: vec![Method::Mean, Method::Promissing],
            ..ExperimentConfig::xor_defaults()
        }
    }

    #[test]
    fn uncorrupted_promissing_matches_full_model() {
        let cfg = ExperimentConfig {
            fractions: vec![0.0],
            methods: vec![Method::Promissing],
            ..tiny_cfg()
        };
        let table = run_xor_experiment(&cfg).unwrap();
        for e in 1..=cfg.epochs {
            let metric = format!("clean_auc@{e}");
            let full = table.values_where(|r| r.method == "full" && r.metric == metric);
            let prom =
                table.values_where(|r| r.method == "promissing" && r.metric == metric);
            assert_eq!(full.len(), 1);
            assert_eq!(prom.len(), 1);
            assert!((full[0] - prom[0]).abs() <= 1e-9);
        }
        let bias = table.values_where(|r| r.metric == "test_bias");
        assert!(bias.iter().all(|&b| b.abs() <= 1e-9));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let cfg = tiny_cfg();
        let a = run_xor_experiment(&cfg).unwrap();
        let b = run_xor_experiment(&cfg).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
    }

    #[test]
    fn emits_every_cell_and_summary_metric() {
        let cfg = tiny_cfg();
        let table = run_xor_experiment(&cfg).unwrap();
        // Full control: curve + final. Each method: two curves + four summaries.
        let expected = (cfg.epochs + 1) + 2 * (2 * cfg.epochs + 4);
        assert_eq!(table.rows().len(), expected);
        for method in ["mean", "promissing"] {
            for metric in [
                "final_clean_auc",
                "final_corrupted_auc",
                "test_bias",
                "training_bias",
            ] {
                let v = table.values_where(|r| r.method == method && r.metric == metric);
                assert_eq!(v.len(), 1, "{method}/{metric}");
                assert!(v[0].is_finite());
            }
        }
        assert!(table.rows().iter().all(|r| r.fold == 0));
    }

    #[test]
    fn plot_aggregates_each_epoch() {
        let cfg = ExperimentConfig { repetitions: 2, ..tiny_cfg() };
        let table = run_xor_experiment(&cfg).unwrap();
        let plot = xor_plot(&table, "mcar", 0.3);
        // full-clean + per method clean and corrupted.
        assert_eq!(plot.rows.len(), 5 * cfg.epochs);
        assert!(plot.rows.iter().all(|r| r.y.is_finite() && r.y_std >= 0.0));
        let full: Vec<_> = plot.rows.iter().filter(|r| r.curve == "full-clean").collect();
        assert_eq!(full.len(), cfg.epochs);
    }
}
