//! Counterfactual interpretation by masking: the importance of a modality
//! or a single feature for one prediction is how far the prediction moves
//! when that unit is replaced with missing values and the network is asked
//! again. Only mask-consuming networks support this; an imputer-based net
//! has no notion of an absent input.
//!
//! Deltas are reported per unit and deliberately not constrained to sum to
//! anything: masking two units together is not the sum of masking each
//! alone, so the attribution list is a ranking, not a decomposition.

use anyhow::{bail, Result};

use promissing::masked::MaskedMatrix;
use promissing::nn::Network;

/// Granularity of the counterfactual: whole modalities or single features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Modality,
    Feature,
}

impl std::str::FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modality" => Ok(UnitKind::Modality),
            "feature" => Ok(UnitKind::Feature),
            other => Err(format!(
                "unknown unit {other:?}, expected modality or feature"
            )),
        }
    }
}

/// One unit's effect on the prediction. `delta` is base minus the masked
/// prediction; a positive delta means the unit pushed the prediction up.
/// A unit that was already fully missing is skipped with delta 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribution {
    pub unit: String,
    pub delta: f64,
    pub skipped: bool,
}

/// Base prediction plus attributions sorted by |delta| descending.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub base: f64,
    pub attributions: Vec<Attribution>,
}

/// Explains one sample's prediction by masking each unit in turn. The
/// sample is one named matrix per network input, each with exactly one
/// row; cells may already be missing.
pub fn counterfactual_interpret(
    net: &Network,
    sample: &[(String, MaskedMatrix)],
    unit: UnitKind,
) -> Result<Interpretation> {
    check_sample(net, sample)?;
    let blocks: Vec<MaskedMatrix> = sample.iter().map(|(_, m)| m.clone()).collect();
    let base = predict_one(net, &blocks)?;

    let mut attributions = Vec::new();
    match unit {
        UnitKind::Modality => {
            for (mi, (name, block)) in sample.iter().enumerate() {
                if block.observed_count(0) == 0 {
                    attributions.push(Attribution {
                        unit: name.clone(),
                        delta: 0.0,
                        skipped: true,
                    });
                    continue;
                }
                let mut masked = blocks.clone();
                masked[mi] = MaskedMatrix::all_missing(1, block.n_cols());
                attributions.push(Attribution {
                    unit: name.clone(),
                    delta: base - predict_one(net, &masked)?,
                    skipped: false,
                });
            }
        }
        UnitKind::Feature => {
            for (mi, (name, block)) in sample.iter().enumerate() {
                for j in 0..block.n_cols() {
                    let unit_name = format!("{name}[{j}]");
                    if block.is_missing(0, j) {
                        attributions.push(Attribution {
                            unit: unit_name,
                            delta: 0.0,
                            skipped: true,
                        });
                        continue;
                    }
                    let mut masked = blocks.clone();
                    masked[mi].set_missing(0, j);
                    attributions.push(Attribution {
                        unit: unit_name,
                        delta: base - predict_one(net, &masked)?,
                        skipped: false,
                    });
                }
            }
        }
    }
    attributions.sort_by(|a, b| {
        b.delta
            .abs()
            .total_cmp(&a.delta.abs())
            .then_with(|| a.unit.cmp(&b.unit))
    });
    Ok(Interpretation { base, attributions })
}

/// CSV rendering: a base-prediction comment line, then one row per unit in
/// ranked order.
pub fn interpretation_to_csv(interp: &Interpretation) -> String {
    let mut out = format!("# base prediction: {:?}\n", interp.base);
    out.push_str("unit,delta,skipped\n");
    for a in &interp.attributions {
        out.push_str(&format!("{},{:?},{}\n", a.unit, a.delta, a.skipped));
    }
    out
}

fn check_sample(net: &Network, sample: &[(String, MaskedMatrix)]) -> Result<()> {
    let widths = net.input_widths();
    if sample.len() != widths.len() {
        bail!(
            "network has {} inputs but the sample has {} blocks",
            widths.len(),
            sample.len()
        );
    }
    for ((name, block), &w) in sample.iter().zip(&widths) {
        if block.n_rows() != 1 {
            bail!("block {name:?} has {} rows, expected 1", block.n_rows());
        }
        if block.n_cols() != w {
            bail!(
                "block {name:?} is {} wide but the network input expects {w}",
                block.n_cols()
            );
        }
    }
    Ok(())
}

fn predict_one(net: &Network, blocks: &[MaskedMatrix]) -> Result<f64> {
    let refs: Vec<&MaskedMatrix> = blocks.iter().collect();
    Ok(net.predict_positive(&refs)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use promissing::nn::{
        fusion_network, FirstLayer, LayerKind, LossKind, Mode, NetworkBuilder, Transfer,
    };

    fn sample_for(sizes: &[usize]) -> Vec<(String, MaskedMatrix)> {
        sizes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let row: Vec<f64> = (0..p).map(|j| 0.3 + 0.2 * (i + j) as f64).collect();
                (
                    format!("m{}", i + 1),
                    MaskedMatrix::from_dense(
                        ndarray::Array2::from_shape_vec((1, p), row).unwrap(),
                    ),
                )
            })
            .collect()
    }

    #[test]
    fn ranks_units_and_covers_every_feature() {
        let sizes = [2, 3];
        let mut net = fusion_network(&sizes, &[2, 2], FirstLayer::MPromissing, 1.0).unwrap();
        net.init_params(9);
        let sample = sample_for(&sizes);

        let by_modality = counterfactual_interpret(&net, &sample, UnitKind::Modality).unwrap();
        assert_eq!(by_modality.attributions.len(), 2);
        let by_feature = counterfactual_interpret(&net, &sample, UnitKind::Feature).unwrap();
        assert_eq!(by_feature.attributions.len(), 5);
        for interp in [&by_modality, &by_feature] {
            assert!((0.0..=1.0).contains(&interp.base));
            for pair in interp.attributions.windows(2) {
                assert!(pair[0].delta.abs() >= pair[1].delta.abs());
            }
        }
        let names: Vec<&str> = by_feature
            .attributions
            .iter()
            .map(|a| a.unit.as_str())
            .collect();
        for expect in ["m1[0]", "m1[1]", "m2[0]", "m2[1]", "m2[2]"] {
            assert!(names.contains(&expect), "missing unit {expect}");
        }
    }

    #[test]
    fn already_missing_units_are_skipped_with_zero_delta() {
        let sizes = [2, 2];
        let mut net = fusion_network(&sizes, &[2, 2], FirstLayer::Promissing, 1.0).unwrap();
        net.init_params(4);
        let mut sample = sample_for(&sizes);
        sample[1].1 = MaskedMatrix::all_missing(1, 2);

        let interp = counterfactual_interpret(&net, &sample, UnitKind::Modality).unwrap();
        let m2 = interp.attributions.iter().find(|a| a.unit == "m2").unwrap();
        assert!(m2.skipped);
        assert_eq!(m2.delta, 0.0);
        let m1 = interp.attributions.iter().find(|a| a.unit == "m1").unwrap();
        assert!(!m1.skipped);

        // Feature granularity flags the two missing cells individually.
        let interp = counterfactual_interpret(&net, &sample, UnitKind::Feature).unwrap();
        for unit in ["m2[0]", "m2[1]"] {
            let a = interp.attributions.iter().find(|a| a.unit == unit).unwrap();
            assert!(a.skipped && a.delta == 0.0);
        }
    }

    /// Constructed oracle: modality B feeds the output only through weights
    /// set to zero, and a pruned all-missing block also contributes zero,
    /// so masking B cannot move the prediction at all.
    #[test]
    fn zero_weight_modality_attributes_exactly_zero() {
        let mut b = NetworkBuilder::new();
        let xa = b.input(2);
        let xb = b.input(2);
        let ra = b
            .layer(xa, LayerKind::NanDense(Mode::Promissing), 2, Transfer::Tanh)
            .unwrap();
        let rb = b
            .layer(xb, LayerKind::NanDense(Mode::Promissing), 2, Transfer::Tanh)
            .unwrap();
        let c = b.concat(&[ra, rb]).unwrap();
        let o = b.layer(c, LayerKind::Dense, 1, Transfer::Sigmoid).unwrap();
        b.loss(o, LossKind::Bce, 1.0).unwrap();
        b.output(o);
        let mut net = b.build().unwrap();

        // Freshly built params are all zero; fill in modality A's path and
        // the output weights over A's span only, leaving B's path at zero.
        {
            let params = net.params_mut();
            params[0..4].copy_from_slice(&[0.9, -0.4, 0.3, 0.7]); // ra weights
            params[4..6].copy_from_slice(&[0.1, -0.2]); // ra biases
            // rb weights and biases (indices 6..12) stay zero.
            params[12..16].copy_from_slice(&[0.8, -0.6, 0.0, 0.0]); // out weights
            params[16] = 0.05; // out bias
        }
        // Cross-check the layout assumption through the public accessor.
        let (w, bias, _) = net.layer_params(ra).unwrap();
        assert_eq!(w, &[0.9, -0.4, 0.3, 0.7]);
        assert_eq!(bias, &[0.1, -0.2]);
        let (w, _, _) = net.layer_params(rb).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));

        let sample = sample_for(&[2, 2]);
        let interp = counterfactual_interpret(&net, &sample, UnitKind::Modality).unwrap();
        let a = interp.attributions.iter().find(|x| x.unit == "m1").unwrap();
        let bb = interp.attributions.iter().find(|x| x.unit == "m2").unwrap();
        assert!(a.delta.abs() > 0.0, "informative modality moved nothing");
        assert_eq!(bb.delta, 0.0);
        assert_eq!(interp.attributions[0].unit, "m1");
    }

    #[test]
    fn csv_lists_base_then_ranked_units() {
        let interp = Interpretation {
            base: 0.625,
            attributions: vec![
                Attribution {
                    unit: "m2".into(),
                    delta: -0.25,
                    skipped: false,
                },
                Attribution {
                    unit: "m1".into(),
                    delta: 0.125,
                    skipped: false,
                },
            ],
        };
        let csv = interpretation_to_csv(&interp);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(
            lines,
            vec![
                "# base prediction: 0.625",
                "unit,delta,skipped",
                "m2,-0.25,false",
                "m1,0.125,false",
            ]
        );
    }
}
