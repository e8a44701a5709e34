//! Cross-validation folds and minority-class oversampling.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DataError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// A k-fold partition of row indices. Test sets are disjoint and cover all
/// rows exactly once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Shuffles `0..n` and cuts it into k near-equal folds: the first `n mod k`
/// folds take the extra row. Deterministic given the seed.
pub fn split_kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan, DataError> {
    if k < 2 || k > n {
        return Err(DataError::Split { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_idx in 0..k {
        let size = base + usize::from(fold_idx < extra);
        let test: Vec<usize> = order[start..start + size].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + size..])
            .copied()
            .collect();
        folds.push(Fold { train, test });
        start += size;
    }
    Ok(FoldPlan { folds, seed })
}

/// Oversamples the minority class among `indices` until the class counts are
/// equal. Every input index is kept once; the extras are drawn with
/// replacement from the minority indices. Labels must be 0/1.
pub fn rebalance(labels: &[f64], indices: &[usize], seed: u64) -> Result<Vec<usize>, DataError> {
    let positives: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] == 1.0).collect();
    let negatives: Vec<usize> = indices.iter().copied().filter(|&i| labels[i] != 1.0).collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(DataError::Rebalance);
    }
    let (minority, deficit) = if positives.len() < negatives.len() {
        (&positives, negatives.len() - positives.len())
    } else {
        (&negatives, positives.len() - negatives.len())
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = indices.to_vec();
    for _ in 0..deficit {
        out.push(minority[rng.gen_range(0..minority.len())]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_partition_rows() {
        let plan = split_kfold(4, 2, 9).unwrap();
        assert_eq!(plan.k(), 2);
        for fold in &plan.folds {
            assert_eq!(fold.test.len(), 2);
            assert!(fold.train.iter().all(|i| !fold.test.contains(i)));
        }
        let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3]);
    }

    #[test]
    fn uneven_split_gives_floor_and_ceil_sizes() {
        let plan = split_kfold(5, 2, 1).unwrap();
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test.len()).collect();
        assert_eq!(sizes, vec![3, 2]);
    }

    #[test]
    fn same_seed_same_plan() {
        assert_eq!(split_kfold(20, 4, 7).unwrap(), split_kfold(20, 4, 7).unwrap());
    }

    #[test]
    fn different_seed_different_plan() {
        assert_ne!(split_kfold(20, 4, 7).unwrap(), split_kfold(20, 4, 8).unwrap());
    }

    #[test]
    fn oversized_k_is_an_error() {
        assert!(matches!(
            split_kfold(3, 4, 0),
            Err(DataError::Split { n: 3, k: 4 })
        ));
    }

    #[test]
    fn coverage_holds_for_many_shapes() {
        for (n, k) in [(10, 3), (11, 5), (100, 10), (7, 7)] {
            let plan = split_kfold(n, k, 42).unwrap();
            let mut all: Vec<usize> = plan.folds.iter().flat_map(|f| f.test.clone()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..n).collect::<Vec<_>>(), "n={n} k={k}");
            for fold in &plan.folds {
                assert_eq!(fold.train.len() + fold.test.len(), n);
            }
        }
    }

    #[test]
    fn rebalance_equalizes_counts() {
        // Labels: six 1s, three 0s.
        let labels = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0];
        let indices: Vec<usize> = (0..9).collect();
        let out = rebalance(&labels, &indices, 3).unwrap();
        let pos = out.iter().filter(|&&i| labels[i] == 1.0).count();
        let neg = out.len() - pos;
        assert_eq!(pos, 6);
        assert_eq!(neg, 6);
    }

    #[test]
    fn rebalance_keeps_balanced_input_as_is() {
        let labels = vec![1.0, 0.0, 1.0, 0.0];
        let indices: Vec<usize> = (0..4).collect();
        assert_eq!(rebalance(&labels, &indices, 0).unwrap(), indices);
    }

    #[test]
    fn rebalance_output_is_subset_of_input() {
        let labels = vec![0.0, 0.0, 0.0, 1.0];
        let indices: Vec<usize> = (0..4).collect();
        let out = rebalance(&labels, &indices, 11).unwrap();
        assert!(out.iter().all(|i| indices.contains(i)));
    }

    #[test]
    fn rebalance_rejects_single_class() {
        let labels = vec![1.0, 1.0];
        assert!(matches!(
            rebalance(&labels, &[0, 1], 0),
            Err(DataError::Rebalance)
        ));
    }
}
