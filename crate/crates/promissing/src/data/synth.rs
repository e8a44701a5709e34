//! Synthetic dataset generators: the XOR problem and a multimodal
//! class-conditional Gaussian stand-in.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{DataError, Dataset, FeatureKind, ModalDataset, TargetKind};
use crate::masked::MaskedMatrix;

/// XOR cluster centers, visited round-robin. Label 1 iff the center's signs
/// differ, so any n gives class counts balanced to within 1.
const XOR_CENTERS: [(f64, f64, f64); 4] = [
    (1.0, 1.0, 0.0),
    (1.0, -1.0, 1.0),
    (-1.0, 1.0, 1.0),
    (-1.0, -1.0, 0.0),
];

/// Two features on the four XOR cluster centers (±1, ±1) plus Gaussian noise
/// of the given variance; label = XOR of the center signs.
pub fn simulate_xor(n: usize, noise_var: f64, seed: u64) -> Result<Dataset, DataError> {
    if n < 4 {
        return Err(DataError::Invalid(format!(
            "XOR simulation needs n >= 4, got {n}"
        )));
    }
    if noise_var < 0.0 || !noise_var.is_finite() {
        return Err(DataError::Invalid(format!(
            "noise variance must be finite and non-negative, got {noise_var}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_var.sqrt())
        .map_err(|e| DataError::Invalid(format!("bad noise distribution: {e}")))?;

    let mut values = Array2::zeros((n, 2));
    let mut target = Vec::with_capacity(n);
    for i in 0..n {
        let (cx, cy, label) = XOR_CENTERS[i % 4];
        values[(i, 0)] = cx + noise.sample(&mut rng);
        values[(i, 1)] = cy + noise.sample(&mut rng);
        target.push(label);
    }

    Dataset::new(
        "xor".into(),
        MaskedMatrix::from_dense(values),
        target,
        vec!["x1".into(), "x2".into()],
        vec![FeatureKind::Continuous, FeatureKind::Continuous],
        TargetKind::Binary,
    )
}

/// Shape of a synthetic multimodal dataset. Every feature of every modality
/// draws from a class-conditional unit Gaussian whose mean is shifted by
/// ±separation/2 with the class.
#[derive(Debug, Clone)]
pub struct MultimodalSpec {
    pub n: usize,
    pub modality_sizes: Vec<usize>,
    pub separation: f64,
}

/// Class-conditional Gaussian modalities with alternating 0/1 labels
/// (balanced to within 1). Deterministic given the seed.
pub fn simulate_multimodal(spec: &MultimodalSpec, seed: u64) -> Result<ModalDataset, DataError> {
    if spec.modality_sizes.len() < 2 {
        return Err(DataError::Invalid(format!(
            "need at least 2 modalities, got {}",
            spec.modality_sizes.len()
        )));
    }
    if spec.modality_sizes.contains(&0) {
        return Err(DataError::Invalid("modality sizes must be >= 1".into()));
    }
    if spec.n == 0 {
        return Err(DataError::Invalid("need at least 1 row".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let target: Vec<f64> = (0..spec.n).map(|i| (i % 2) as f64).collect();

    let mut modalities = Vec::with_capacity(spec.modality_sizes.len());
    for (mi, &size) in spec.modality_sizes.iter().enumerate() {
        let mut values = Array2::zeros((spec.n, size));
        for i in 0..spec.n {
            let shift = if target[i] == 1.0 {
                spec.separation / 2.0
            } else {
                -spec.separation / 2.0
            };
            for j in 0..size {
                values[(i, j)] = shift + noise.sample(&mut rng);
            }
        }
        modalities.push((format!("m{}", mi + 1), MaskedMatrix::from_dense(values)));
    }
    ModalDataset::new(modalities, target)
}
