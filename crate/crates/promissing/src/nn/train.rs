//! Mini-batch gradient descent over a network, with deterministic seeding
//! of initialization, shuffling, and dropout.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{DropoutMode, Network};
use super::optim::{optimizer_step, OptimizerConfig, OptimizerState};
use super::NnError;
use crate::masked::MaskedMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Master seed; initialization, shuffling, and dropout all derive from it.
    pub seed: u64,
    pub shuffle: bool,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 10,
            seed: 0,
            shuffle: true,
            optimizer: OptimizerConfig::sgd(0.1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    /// Mean training loss per epoch, weighted by batch size.
    pub epoch_loss: Vec<f64>,
    /// Whatever the per-epoch callback returned (`None` without a callback).
    pub eval: Vec<Option<f64>>,
}

/// Initializes the network's parameters from `cfg.seed` and fits it to the
/// data. Identical configuration and data reproduce identical parameters.
pub fn train(
    net: &mut Network,
    inputs: &[&MaskedMatrix],
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainHistory, NnError> {
    train_with(net, inputs, targets, cfg, |_, _| None)
}

/// Like [`train`] but invokes `eval` after every epoch; its return values
/// are collected into the history (e.g. a held-out metric per epoch).
pub fn train_with<F>(
    net: &mut Network,
    inputs: &[&MaskedMatrix],
    targets: &[f64],
    cfg: &TrainConfig,
    mut eval: F,
) -> Result<TrainHistory, NnError>
where
    F: FnMut(usize, &Network) -> Option<f64>,
{
    cfg.optimizer.validate()?;
    if cfg.batch_size == 0 {
        return Err(NnError::Spec("batch size must be at least 1".into()));
    }
    let n = net.check_inputs(inputs)?;
    if targets.len() != n {
        return Err(NnError::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            n
        )));
    }
    if n == 0 {
        return Err(NnError::Shape("cannot train on 0 rows".into()));
    }

    // One master stream: the init seed comes first, then per-epoch shuffles
    // interleaved with per-batch dropout seeds.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init_seed = rng.gen::<u64>();
    net.init_params(init_seed);

    let mut opt_state = OptimizerState::new(net.n_params());
    let mut history = TrainHistory {
        epoch_loss: Vec::with_capacity(cfg.epochs),
        eval: Vec::with_capacity(cfg.epochs),
    };
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let dropout_seed = rng.gen::<u64>();
            let batch_inputs: Vec<MaskedMatrix> =
                inputs.iter().map(|m| m.select_rows(batch)).collect();
            let batch_refs: Vec<&MaskedMatrix> = batch_inputs.iter().collect();
            let batch_targets: Vec<f64> = batch.iter().map(|&r| targets[r]).collect();

            let pass = net.forward(&batch_refs, DropoutMode::Seeded(dropout_seed))?;
            let (loss, grads) = net.backward(&pass, &batch_targets)?;
            if !loss.is_finite() {
                return Err(NnError::Divergence { epoch });
            }
            optimizer_step(&cfg.optimizer, &mut opt_state, net.params_mut(), &grads)?;
            loss_sum += loss * batch.len() as f64;
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(NnError::Divergence { epoch });
        }
        history.epoch_loss.push(loss_sum / n as f64);
        history.eval.push(eval(epoch, net));
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::simulate_xor;
    use crate::nn::layer::LayerKind;
    use crate::nn::network::{xor_network, FirstLayer, LossKind, NetworkBuilder};
    use crate::nn::transfer::Transfer;

    fn xor_data(n: usize, seed: u64) -> (MaskedMatrix, Vec<f64>) {
        let ds = simulate_xor(n, 0.09, seed).unwrap();
        (ds.features.clone(), ds.target.clone())
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = TrainConfig { epochs: 5, ..TrainConfig::default() };
        let (x, t) = xor_data(40, 1);
        let mut a = xor_network(FirstLayer::Promissing);
        let mut b = xor_network(FirstLayer::Promissing);
        let ha = train(&mut a, &[&x], &t, &cfg).unwrap();
        let hb = train(&mut b, &[&x], &t, &cfg).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha.epoch_loss, hb.epoch_loss);
    }

    #[test]
    fn different_seeds_give_different_parameters() {
        let (x, t) = xor_data(40, 1);
        let mut a = xor_network(FirstLayer::Dense);
        let mut b = xor_network(FirstLayer::Dense);
        train(&mut a, &[&x], &t, &TrainConfig { epochs: 2, seed: 1, ..TrainConfig::default() })
            .unwrap();
        train(&mut b, &[&x], &t, &TrainConfig { epochs: 2, seed: 2, ..TrainConfig::default() })
            .unwrap();
        assert_ne!(a.params(), b.params());
    }

    #[test]
    fn loss_decreases_on_learnable_data() {
        let (x, t) = xor_data(100, 3);
        let mut net = xor_network(FirstLayer::Dense);
        let cfg = TrainConfig { epochs: 30, ..TrainConfig::default() };
        let history = train(&mut net, &[&x], &t, &cfg).unwrap();
        assert_eq!(history.epoch_loss.len(), 30);
        assert!(history.epoch_loss[29] < history.epoch_loss[0]);
    }

    #[test]
    fn runaway_learning_rate_reports_divergence() {
        // One linear unit with MSE: each step multiplies the weight error by
        // (1 - 2·lr·x²), which explodes for lr far above 1.
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let o = b.layer(x, LayerKind::Dense, 1, Transfer::Linear).unwrap();
        b.loss(o, LossKind::Mse, 1.0).unwrap();
        b.output(o);
        let mut net = b.build().unwrap();

        let data = MaskedMatrix::from_dense(ndarray::array![[1.0]]);
        let cfg = TrainConfig {
            epochs: 400,
            batch_size: 1,
            optimizer: OptimizerConfig::sgd(1e3),
            ..TrainConfig::default()
        };
        match train(&mut net, &[&data], &[0.0], &cfg) {
            Err(NnError::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn oversized_batch_equals_full_batch() {
        let (x, t) = xor_data(20, 5);
        let cfg_full = TrainConfig { epochs: 3, batch_size: 20, ..TrainConfig::default() };
        let cfg_over = TrainConfig { epochs: 3, batch_size: 500, ..TrainConfig::default() };
        let mut a = xor_network(FirstLayer::MPromissing);
        let mut b = xor_network(FirstLayer::MPromissing);
        train(&mut a, &[&x], &t, &cfg_full).unwrap();
        train(&mut b, &[&x], &t, &cfg_over).unwrap();
        assert_eq!(a.params(), b.params());
    }

    #[test]
    fn callback_results_land_in_history() {
        let (x, t) = xor_data(12, 7);
        let mut net = xor_network(FirstLayer::Dense);
        let cfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
        let history = train_with(&mut net, &[&x], &t, &cfg, |epoch, _| {
            (epoch % 2 == 0).then_some(epoch as f64)
        })
        .unwrap();
        assert_eq!(history.eval, vec![Some(0.0), None, Some(2.0), None]);
    }

    #[test]
    fn target_length_mismatch_is_rejected() {
        let (x, _) = xor_data(12, 7);
        let mut net = xor_network(FirstLayer::Dense);
        let err = train(&mut net, &[&x], &[1.0, 0.0], &TrainConfig::default());
        assert!(matches!(err, Err(NnError::Shape(_))));
    }
}
