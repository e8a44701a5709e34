//! Multimodal fusion study: trains an imputer-based fusion network and the
//! two pruning variants on modality-removal augmented data, then follows
//! each test row's predicted probability as modalities are removed one by
//! one in a random order shared across methods.
//!
//! The interesting quantity is the trajectory endpoint: a network that
//! consumes masks directly still produces a prediction with every modality
//! removed, and after balanced augmented training that prediction should
//! sit near 0.5 rather than commit to a class.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use promissing::corrupt::augment_modalities;
use promissing::data::{simulate_multimodal, split_kfold, ModalDataset, MultimodalSpec};
use promissing::impute::{apply_imputer, fit_imputer, Imputer};
use promissing::masked::MaskedMatrix;
use promissing::metrics::auc;
use promissing::nn::{fusion_network, train, Network, TrainConfig};

use crate::config::{ExperimentConfig, Method};
use crate::results::{PlotRow, PlotTable, ResultRow, ResultTable};
use crate::seeds::derive_for;

/// One test row's prediction path under progressive modality removal.
/// `probs[k]` is the predicted class-1 probability after masking the first
/// `k` entries of `order`; index 0 is the intact row. A `None` marks a
/// point where the method cannot produce a prediction (an imputer has no
/// donors once every modality is gone).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub repetition: usize,
    pub method: String,
    /// Row id in the simulated dataset, before the train/test split.
    pub row: usize,
    /// Modality indices in removal order; length M.
    pub order: Vec<usize>,
    /// Length M+1.
    pub probs: Vec<Option<f64>>,
}

/// Runs the fusion experiment. Returns the nets trained in the final
/// repetition (one per method, keyed by method name), every trajectory,
/// and the per-repetition metric rows.
pub fn run_fusion_experiment(
    cfg: &ExperimentConfig,
) -> Result<(Vec<(String, Network)>, Vec<Trajectory>, ResultTable)> {
    let mut table = ResultTable::new();
    let mut trajectories = Vec::new();
    let mut nets = Vec::new();
    for rep in 0..cfg.repetitions {
        nets = run_repetition(cfg, rep, &mut table, &mut trajectories)
            .with_context(|| format!("fusion repetition {rep}"))?;
    }
    Ok((nets, trajectories, table))
}

fn run_repetition(
    cfg: &ExperimentConfig,
    rep: usize,
    table: &mut ResultTable,
    trajectories: &mut Vec<Trajectory>,
) -> Result<Vec<(String, Network)>> {
    let m = cfg.modality_sizes.len();
    let spec = MultimodalSpec {
        n: cfg.n,
        modality_sizes: cfg.modality_sizes.clone(),
        separation: cfg.separation,
    };
    let md = simulate_multimodal(&spec, derive_for(cfg.master_seed, "fusion-sim", rep as u64))?;

    let plan = split_kfold(
        md.n_rows(),
        cfg.folds,
        derive_for(cfg.master_seed, "fusion-split", rep as u64),
    )?;
    let fold = &plan.folds[0];
    let train_md = md.select_rows(&fold.train);
    let test_md = md.select_rows(&fold.test);

    let max_removed = cfg.max_removed.unwrap_or(m - 1);
    let aug = augment_modalities(
        &train_md,
        max_removed,
        derive_for(cfg.master_seed, "fusion-augment", rep as u64),
    )?;

    // One removal order per repetition, shared by all methods so their
    // trajectories are paired.
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_for(cfg.master_seed, "fusion-order", rep as u64));
    order.shuffle(&mut rng);

    let train_seed = derive_for(cfg.master_seed, "fusion-train", rep as u64);
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: train_seed,
        shuffle: true,
        optimizer: cfg.optimizer,
    };

    let mut nets = Vec::new();
    for &method in &cfg.methods {
        let (net, imputer) = fit_method(cfg, method, &train_md, &aug, &tc)
            .with_context(|| format!("method {method}"))?;

        let intact = modality_refs(&test_md);
        let test_probs = net.predict_positive(&intact)?;
        let labels: Vec<bool> = test_md.target.iter().map(|&t| t > 0.5).collect();
        let test_auc = auc(&test_probs, &labels)?;
        table.push(metric_row(method, rep, train_seed, "test_auc", test_auc));

        if imputer.is_none() {
            // Pruning first layers accept a fully masked row; the result is
            // the net's learned stance on a totally unknown sample.
            let blank: Vec<MaskedMatrix> = cfg
                .modality_sizes
                .iter()
                .map(|&p| MaskedMatrix::all_missing(1, p))
                .collect();
            let refs: Vec<&MaskedMatrix> = blank.iter().collect();
            let prob = net.predict_positive(&refs)?[0];
            table.push(metric_row(method, rep, train_seed, "all_missing_prob", prob));
        }

        trajectories.extend(walk_removals(
            &net,
            imputer.as_ref(),
            &test_md,
            fold,
            &order,
            method,
            rep,
        )?);
        nets.push((method.name().to_string(), net));
    }
    Ok(nets)
}

/// Builds and trains one method's fusion net on the augmented training
/// data. Imputer methods fit their imputer on the unaugmented (complete)
/// training rows, then fill the masked modalities of every augmented copy.
fn fit_method(
    cfg: &ExperimentConfig,
    method: Method,
    train_md: &ModalDataset,
    aug: &ModalDataset,
    tc: &TrainConfig,
) -> Result<(Network, Option<Imputer>)> {
    let mut net = fusion_network(
        &cfg.modality_sizes,
        &cfg.repr_sizes,
        method.first_layer(),
        cfg.head_weight,
    )?;
    let imputer = match method.imputer_kind(false) {
        Some(kind) => Some(fit_imputer(kind, &hstack_modalities(train_md))?),
        None => None,
    };
    let inputs: Vec<MaskedMatrix> = match &imputer {
        Some(imp) => {
            let filled = apply_imputer(imp, &hstack_modalities(aug))?;
            split_blocks(&filled, &cfg.modality_sizes)
        }
        None => aug.iter().map(|(_, m)| m.clone()).collect(),
    };
    let refs: Vec<&MaskedMatrix> = inputs.iter().collect();
    train(&mut net, &refs, &aug.target, tc)?;
    Ok((net, imputer))
}

/// Evaluates one net along the removal order, producing a trajectory per
/// test row. Step k masks the first k modalities of the order; imputer
/// methods refill the masked blocks before predicting and record `None` at
/// the final all-missing step.
fn walk_removals(
    net: &Network,
    imputer: Option<&Imputer>,
    test_md: &ModalDataset,
    fold: &promissing::data::Fold,
    order: &[usize],
    method: Method,
    rep: usize,
) -> Result<Vec<Trajectory>> {
    let m = order.len();
    let n_test = test_md.n_rows();
    let mut per_step: Vec<Vec<Option<f64>>> = Vec::with_capacity(m + 1);
    for k in 0..=m {
        if k == m && imputer.is_some() {
            per_step.push(vec![None; n_test]);
            continue;
        }
        let masked = test_md.with_modalities_masked(&order[..k]);
        let probs = match imputer {
            Some(imp) => {
                let filled = apply_imputer(imp, &hstack_modalities(&masked))?;
                let blocks = split_blocks(&filled, &masked.sizes());
                let refs: Vec<&MaskedMatrix> = blocks.iter().collect();
                net.predict_positive(&refs)?
            }
            None => net.predict_positive(&modality_refs(&masked))?,
        };
        per_step.push(probs.into_iter().map(Some).collect());
    }
    Ok((0..n_test)
        .map(|i| Trajectory {
            repetition: rep,
            method: method.name().to_string(),
            row: fold.test[i],
            order: order.to_vec(),
            probs: (0..=m).map(|k| per_step[k][i]).collect(),
        })
        .collect())
}

fn modality_refs(md: &ModalDataset) -> Vec<&MaskedMatrix> {
    md.iter().map(|(_, m)| m).collect()
}

fn hstack_modalities(md: &ModalDataset) -> MaskedMatrix {
    let blocks: Vec<&MaskedMatrix> = md.iter().map(|(_, m)| m).collect();
    MaskedMatrix::hstack(&blocks)
}

fn split_blocks(flat: &MaskedMatrix, sizes: &[usize]) -> Vec<MaskedMatrix> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&p| {
            let block = flat.select_cols(start..start + p);
            start += p;
            block
        })
        .collect()
}

fn metric_row(
    method: Method,
    rep: usize,
    seed: u64,
    metric: &str,
    value: f64,
) -> ResultRow {
    ResultRow {
        experiment: "fusion".into(),
        dataset: "multimodal".into(),
        mechanism: "none".into(),
        fraction: 0.0,
        method: method.name().into(),
        repetition: rep,
        fold: 0,
        metric: metric.into(),
        value,
        seed,
    }
}

/// Writes trajectories as tidy CSV, one row per removal step. The order
/// column repeats the full removal order as pipe-separated modality
/// indices; an empty prob cell is an undefined step.
pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut out = String::from("repetition,method,row,order,step,prob\n");
    for t in trajectories {
        let order = t
            .order
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("|");
        for (step, prob) in t.probs.iter().enumerate() {
            let cell = match prob {
                Some(p) => format!("{p:?}"),
                None => String::new(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.repetition, t.method, t.row, order, step, cell
            ));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Reads a trajectory CSV written by [`write_trajectories`].
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("repetition,method,row,order,step,prob") => {}
        other => bail!("unrecognized trajectory header {other:?}"),
    }
    let mut out: Vec<Trajectory> = Vec::new();
    for (ln, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            bail!("line {}: expected 6 fields, got {}", ln + 2, fields.len());
        }
        let repetition: usize = fields[0].parse()?;
        let method = fields[1].to_string();
        let row: usize = fields[2].parse()?;
        let order: Vec<usize> = fields[3]
            .split('|')
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?;
        let step: usize = fields[4].parse()?;
        let prob = if fields[5].is_empty() {
            None
        } else {
            Some(fields[5].parse()?)
        };
        let fresh = match out.last() {
            Some(t) => t.repetition != repetition || t.method != method || t.row != row,
            None => true,
        };
        if fresh {
            out.push(Trajectory {
                repetition,
                method,
                row,
                order: order.clone(),
                probs: Vec::new(),
            });
        }
        let t = out.last_mut().expect("just pushed");
        if t.probs.len() != step {
            bail!("line {}: step {} out of sequence", ln + 2, step);
        }
        t.probs.push(prob);
    }
    Ok(out)
}

/// Mean trajectory per method: x is the number of modalities removed, y
/// the mean predicted probability over all rows and repetitions with a
/// defined prediction at that step.
pub fn fusion_plot(trajectories: &[Trajectory]) -> PlotTable {
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for t in trajectories {
        for (step, prob) in t.probs.iter().enumerate() {
            if let Some(p) = prob {
                groups.entry((t.method.clone(), step)).or_default().push(*p);
            }
        }
    }
    let mut plot = PlotTable { rows: Vec::new() };
    for ((method, step), vals) in groups {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var =
            vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        plot.rows.push(PlotRow {
            curve: method,
            x: step as f64,
            y: mean,
            y_std: var.sqrt(),
        });
    }
    plot
}
