//! Dense and nan_dense layer arithmetic on flat parameter slices.
//!
//! Weights are stored row-major per unit: `w[k*p + i]` is the weight from
//! input `i` into unit `k`. All accumulations run feature-major in ascending
//! index order, so results are bit-reproducible. The nan_dense bias term is
//! computed as `(q/p)·b` rather than `b - (r/p)·b`: when `q = p` the factor
//! is exactly 1.0 and the result matches the plain dense sum bit for bit,
//! and when `q = 0` the whole pre-activation is exactly zero.

use ndarray::Array2;

use crate::masked::MaskedMatrix;

/// Weighted-layer flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    /// Plain dense layer; rejects rows with missing cells.
    Dense,
    /// Missing-value-native first layer.
    NanDense(Mode),
}

/// How a nan_dense layer treats heavy missingness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Prune missing inputs, rescale the bias by q/p.
    Promissing,
    /// Additionally feed r/p into a per-unit compensatory weight.
    MPromissing,
}

/// Pre-activations of a plain dense layer: `a[k] = Σ_i x_i·w[k][i] + b[k]`.
pub(crate) fn forward_dense(w: &[f64], b: &[f64], x: &Array2<f64>) -> Array2<f64> {
    let (n, p) = x.dim();
    let s = b.len();
    let mut out = Array2::zeros((n, s));
    for r in 0..n {
        for k in 0..s {
            let mut acc = 0.0;
            let wk = &w[k * p..(k + 1) * p];
            for i in 0..p {
                acc += x[(r, i)] * wk[i];
            }
            out[(r, k)] = acc + b[k];
        }
    }
    out
}

/// Pre-activations of a nan_dense layer over a masked batch:
/// `a[k] = Σ_{i observed} x_i·w[k][i] + (q/p)·b[k] [+ (r/p)·w_c[k]]`.
pub(crate) fn forward_nan_dense(
    w: &[f64],
    b: &[f64],
    wc: Option<&[f64]>,
    x: &MaskedMatrix,
) -> Array2<f64> {
    let (n, p) = (x.n_rows(), x.n_cols());
    let s = b.len();
    let values = x.values();
    let mask = x.mask();
    let mut out = Array2::zeros((n, s));
    for r in 0..n {
        let q = x.observed_count(r);
        let q_frac = q as f64 / p as f64;
        let r_frac = (p - q) as f64 / p as f64;
        for k in 0..s {
            let mut acc = 0.0;
            let wk = &w[k * p..(k + 1) * p];
            for i in 0..p {
                if !mask[(r, i)] {
                    acc += values[(r, i)] * wk[i];
                }
            }
            let mut a = acc + q_frac * b[k];
            if let Some(wc) = wc {
                a += r_frac * wc[k];
            }
            out[(r, k)] = a;
        }
    }
    out
}

/// Accumulates dense-layer gradients given `da = dL/d pre-activation`.
/// `dx`, when present, receives `dL/dx` (it is overwritten, not accumulated).
pub(crate) fn backward_dense(
    w: &[f64],
    x: &Array2<f64>,
    da: &Array2<f64>,
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut Array2<f64>>,
) {
    let (n, p) = x.dim();
    let s = db.len();
    for r in 0..n {
        for k in 0..s {
            let d = da[(r, k)];
            let dwk = &mut dw[k * p..(k + 1) * p];
            for i in 0..p {
                dwk[i] += d * x[(r, i)];
            }
            db[k] += d;
        }
    }
    if let Some(dx) = dx {
        for r in 0..n {
            for i in 0..p {
                let mut acc = 0.0;
                for k in 0..s {
                    acc += da[(r, k)] * w[k * p + i];
                }
                dx[(r, i)] = acc;
            }
        }
    }
}

/// Accumulates nan_dense gradients. Missing cells contribute nothing to
/// `dw` and receive no input gradient; the bias picks up `q/p` per row and
/// the compensatory weight `r/p`.
pub(crate) fn backward_nan_dense(
    w: &[f64],
    x: &MaskedMatrix,
    da: &Array2<f64>,
    dw: &mut [f64],
    db: &mut [f64],
    dwc: Option<&mut [f64]>,
    dx: Option<&mut Array2<f64>>,
) {
    let (n, p) = (x.n_rows(), x.n_cols());
    let s = db.len();
    let values = x.values();
    let mask = x.mask();
    for r in 0..n {
        let q = x.observed_count(r);
        let q_frac = q as f64 / p as f64;
        for k in 0..s {
            let d = da[(r, k)];
            let dwk = &mut dw[k * p..(k + 1) * p];
            for i in 0..p {
                if !mask[(r, i)] {
                    dwk[i] += d * values[(r, i)];
                }
            }
            db[k] += d * q_frac;
        }
    }
    if let Some(dwc) = dwc {
        for r in 0..n {
            let r_frac = (p - x.observed_count(r)) as f64 / p as f64;
            for k in 0..s {
                dwc[k] += da[(r, k)] * r_frac;
            }
        }
    }
    if let Some(dx) = dx {
        for r in 0..n {
            for i in 0..p {
                let mut acc = 0.0;
                if !mask[(r, i)] {
                    for k in 0..s {
                        acc += da[(r, k)] * w[k * p + i];
                    }
                }
                dx[(r, i)] = acc;
            }
        }
    }
}

/// The learned "representation for unknowns": `U[k][j]` is the input value
/// that would cancel unit `k`'s response to feature `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeutralizerMatrix {
    /// s×p matrix of neutralizers.
    pub u: Array2<f64>,
    /// Stabilizer substituted for weights smaller than itself in magnitude.
    pub epsilon: f64,
}

impl NeutralizerMatrix {
    /// `U[k][j] = -b[k] / (p · stab(w[k][j]))` where `stab` replaces any
    /// weight with `|w| < epsilon` by `±epsilon`, keeping the sign and
    /// treating 0 as positive.
    pub(crate) fn compute(w: &[f64], b: &[f64], p: usize, epsilon: f64) -> NeutralizerMatrix {
        let s = b.len();
        let mut u = Array2::zeros((s, p));
        for k in 0..s {
            for j in 0..p {
                let wkj = w[k * p + j];
                let stab = if wkj.abs() >= epsilon {
                    wkj
                } else if wkj.is_sign_negative() && wkj != 0.0 {
                    -epsilon
                } else {
                    epsilon
                };
                u[(k, j)] = -b[k] / (p as f64 * stab);
            }
        }
        NeutralizerMatrix { u, epsilon }
    }

    /// Writes `neuron,feature,value` rows.
    pub fn to_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "neuron,feature,value")?;
        for k in 0..self.u.nrows() {
            for j in 0..self.u.ncols() {
                writeln!(out, "{k},{j},{:?}", self.u[(k, j)])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn masked_row(values: Vec<f64>, missing: Vec<bool>) -> MaskedMatrix {
        let p = values.len();
        let vals = Array2::from_shape_vec((1, p), values).unwrap();
        let mask = Array2::from_shape_vec((1, p), missing).unwrap();
        MaskedMatrix::new(vals, mask)
    }

    #[test]
    fn pruned_sum_matches_hand_computation() {
        // x = [1.0, missing], w = [0.5, -0.3], b = 0.2, p = 2:
        // a = 0.5 + 0.2·(1/2) = 0.6.
        let x = masked_row(vec![1.0, f64::NAN], vec![false, true]);
        let out = forward_nan_dense(&[0.5, -0.3], &[0.2], None, &x);
        assert_eq!(out[(0, 0)], 0.6);
    }

    #[test]
    fn compensatory_term_scales_with_missing_fraction() {
        // All missing, w_c = 0.4, b = 0.2, p = 2: a = (0 + 2·0.4)/2 = 0.4.
        let x = masked_row(vec![f64::NAN, f64::NAN], vec![true, true]);
        let out = forward_nan_dense(&[0.5, -0.3], &[0.2], Some(&[0.4]), &x);
        assert_eq!(out[(0, 0)], 0.4);
    }

    #[test]
    fn all_missing_pruned_activation_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let p = rng.gen_range(1..8);
            let s = rng.gen_range(1..5);
            let w: Vec<f64> = (0..s * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = MaskedMatrix::all_missing(1, p);
            let out = forward_nan_dense(&w, &b, None, &x);
            for k in 0..s {
                assert_eq!(out[(0, k)], 0.0);
            }
        }
    }

    #[test]
    fn mask_free_rows_match_dense_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = rng.gen_range(1..10);
            let s = rng.gen_range(1..6);
            let n = rng.gen_range(1..5);
            let w: Vec<f64> = (0..s * p).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let b: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let wc: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-3.0..3.0));
            let dense = forward_dense(&w, &b, &x);
            let masked = MaskedMatrix::from_dense(x);
            let pruned = forward_nan_dense(&w, &b, None, &masked);
            let compensated = forward_nan_dense(&w, &b, Some(&wc), &masked);
            assert_eq!(dense, pruned);
            assert_eq!(dense, compensated);
        }
    }

    #[test]
    fn pre_activation_depends_on_mask_only_through_q() {
        // Masking different subsets of zero-valued features leaves both the
        // observed sum and q unchanged.
        let w = [0.7, -0.2, 0.9, 0.4];
        let b = [0.3];
        let x1 = masked_row(vec![1.5, f64::NAN, 0.0, 0.0], vec![false, true, false, false]);
        let x2 = masked_row(vec![1.5, 0.0, f64::NAN, 0.0], vec![false, false, true, false]);
        let x3 = masked_row(vec![1.5, 0.0, 0.0, f64::NAN], vec![false, false, false, true]);
        let a1 = forward_nan_dense(&w, &b, None, &x1)[(0, 0)];
        let a2 = forward_nan_dense(&w, &b, None, &x2)[(0, 0)];
        let a3 = forward_nan_dense(&w, &b, None, &x3)[(0, 0)];
        assert_eq!(a1, a2);
        assert_eq!(a2, a3);
    }

    #[test]
    fn neutralizer_substitution_equals_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = rng.gen_range(1..8);
            let s = rng.gen_range(1..5);
            // Keep |w| above the stabilizer so substitution is exact.
            let w: Vec<f64> = (0..s * p)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.01..2.0);
                    if rng.gen::<bool>() {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let b: Vec<f64> = (0..s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut values: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let missing: Vec<bool> = (0..p).map(|_| rng.gen::<bool>()).collect();
            for (v, &m) in values.iter_mut().zip(&missing) {
                if m {
                    *v = f64::NAN;
                }
            }
            let x = masked_row(values.clone(), missing.clone());
            let closed = forward_nan_dense(&w, &b, None, &x);
            let nm = NeutralizerMatrix::compute(&w, &b, p, 1e-8);
            for k in 0..s {
                // Plain dense sum with this unit's neutralizers substituted.
                let mut acc = 0.0;
                for i in 0..p {
                    let xi = if missing[i] { nm.u[(k, i)] } else { values[i] };
                    acc += xi * w[k * p + i];
                }
                acc += b[k];
                assert!(
                    (acc - closed[(0, k)]).abs() <= 1e-9,
                    "unit {k}: {acc} vs {}",
                    closed[(0, k)]
                );
            }
        }
    }

    #[test]
    fn neutralizer_hand_values() {
        // w = 0.25, b = 0.5, p = 4 → u = -0.5/(4·0.25) = -0.5.
        let nm = NeutralizerMatrix::compute(&[0.25], &[0.5], 1, 1e-8);
        assert_eq!(nm.u[(0, 0)], -0.5 / 0.25);
        let nm = NeutralizerMatrix::compute(&[0.25, 0.1, 0.1, 0.1], &[0.5], 4, 1e-8);
        assert_eq!(nm.u[(0, 0)], -0.5);
        // Zero bias → zero neutralizers.
        let nm = NeutralizerMatrix::compute(&[0.3, -0.4], &[0.0], 2, 1e-8);
        assert_eq!(nm.u[(0, 0)], 0.0);
        assert_eq!(nm.u[(0, 1)], 0.0);
        // Zero weight → stabilizer: u = -1/(2·1e-8) = -5e7.
        let nm = NeutralizerMatrix::compute(&[0.0, 1.0], &[1.0], 2, 1e-8);
        assert_eq!(nm.u[(0, 0)], -5e7);
        // Tiny negative weight keeps its sign.
        let nm = NeutralizerMatrix::compute(&[-1e-12, 1.0], &[1.0], 2, 1e-8);
        assert_eq!(nm.u[(0, 0)], 5e7);
    }

    #[test]
    fn dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (n, p, s) = (3, 4, 2);
        let w: Vec<f64> = (0..s * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Array2::from_shape_fn((n, p), |_| rng.gen_range(-2.0..2.0));
        let g = Array2::from_shape_fn((n, s), |_| rng.gen_range(-1.0..1.0));
        // Scalar objective: L = Σ g ⊙ a.
        let loss = |w: &[f64], b: &[f64], x: &Array2<f64>| {
            let a = forward_dense(w, b, x);
            (0..n).map(|r| (0..s).map(|k| g[(r, k)] * a[(r, k)]).sum::<f64>()).sum::<f64>()
        };
        let mut dw = vec![0.0; s * p];
        let mut db = vec![0.0; s];
        let mut dx = Array2::zeros((n, p));
        backward_dense(&w, &x, &g, &mut dw, &mut db, Some(&mut dx));

        let h = 1e-6;
        for idx in 0..s * p {
            let mut wp = w.clone();
            wp[idx] += h;
            let mut wm = w.clone();
            wm[idx] -= h;
            let fd = (loss(&wp, &b, &x) - loss(&wm, &b, &x)) / (2.0 * h);
            assert!((dw[idx] - fd).abs() < 1e-6, "dw[{idx}]: {} vs {fd}", dw[idx]);
        }
        for k in 0..s {
            let mut bp = b.clone();
            bp[k] += h;
            let mut bm = b.clone();
            bm[k] -= h;
            let fd = (loss(&w, &bp, &x) - loss(&w, &bm, &x)) / (2.0 * h);
            assert!((db[k] - fd).abs() < 1e-6);
        }
        for r in 0..n {
            for i in 0..p {
                let mut xp = x.clone();
                xp[(r, i)] += h;
                let mut xm = x.clone();
                xm[(r, i)] -= h;
                let fd = (loss(&w, &b, &xp) - loss(&w, &b, &xm)) / (2.0 * h);
                assert!((dx[(r, i)] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn nan_dense_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, p, s) = (4, 5, 3);
        let w: Vec<f64> = (0..s * p).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let wc: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut values = Array2::from_shape_fn((n, p), |_| rng.gen_range(-2.0..2.0));
        let mut mask = Array2::from_elem((n, p), false);
        for i in 0..n {
            for j in 0..p {
                if rng.gen::<f64>() < 0.4 {
                    mask[(i, j)] = true;
                    values[(i, j)] = f64::NAN;
                }
            }
        }
        let x = MaskedMatrix::new(values, mask);
        let g = Array2::from_shape_fn((n, s), |_| rng.gen_range(-1.0..1.0));
        let loss = |w: &[f64], b: &[f64], wc: &[f64]| {
            let a = forward_nan_dense(w, b, Some(wc), &x);
            (0..n).map(|r| (0..s).map(|k| g[(r, k)] * a[(r, k)]).sum::<f64>()).sum::<f64>()
        };
        let mut dw = vec![0.0; s * p];
        let mut db = vec![0.0; s];
        let mut dwc = vec![0.0; s];
        backward_nan_dense(&w, &x, &g, &mut dw, &mut db, Some(&mut dwc), None);

        let h = 1e-6;
        for idx in 0..s * p {
            let mut wp = w.clone();
            wp[idx] += h;
            let mut wm = w.clone();
            wm[idx] -= h;
            let fd = (loss(&wp, &b, &wc) - loss(&wm, &b, &wc)) / (2.0 * h);
            assert!((dw[idx] - fd).abs() < 1e-6);
        }
        for k in 0..s {
            let mut bp = b.clone();
            bp[k] += h;
            let mut bm = b.clone();
            bm[k] -= h;
            let fd = (loss(&w, &bp, &wc) - loss(&w, &bm, &wc)) / (2.0 * h);
            assert!((db[k] - fd).abs() < 1e-6);

            let mut cp = wc.clone();
            cp[k] += h;
            let mut cm = wc.clone();
            cm[k] -= h;
            let fd = (loss(&w, &b, &cp) - loss(&w, &b, &cm)) / (2.0 * h);
            assert!((dwc[k] - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_cells_get_no_weight_gradient() {
        let x = masked_row(vec![2.0, f64::NAN], vec![false, true]);
        let g = array![[1.0]];
        let mut dw = vec![0.0; 2];
        let mut db = vec![0.0; 1];
        backward_nan_dense(&[0.5, 0.5], &x, &g, &mut dw, &mut db, None, None);
        assert_eq!(dw, vec![2.0, 0.0]);
        assert_eq!(db, vec![0.5]);
    }
}
