//! Missing-value-native neural networks and the machinery around them.
//!
//! The core idea: instead of imputing missing inputs, the first layer of the
//! network prunes them. A `nan_dense` layer computes, per sample, the
//! pre-activation over observed features only and rescales the bias by the
//! observed fraction `q/p` (PROMISSING); the modified variant adds a trainable
//! compensatory weight fed with the missing fraction `r/p` (mPROMISSING). The
//! effect is identical to substituting each missing input with a per-neuron
//! neutralizer `-b / (p * w)`, but the closed form never divides by a weight.
//!
//! The crate is organized around a [`MaskedMatrix`] data model (values plus an
//! explicit missingness mask) and provides:
//!
//! - [`data`]: CSV ingestion, one-hot encoding, standardization, k-fold
//!   splitting, minority-class rebalancing, and synthetic generators.
//! - [`corrupt`]: MCAR / MAR / MNAR missingness simulators, mutual-information
//!   feature ranking, and modality-removal augmentation.
//! - [`impute`]: constant, mean, KNN, and iterative chained-regression
//!   baselines fit on training data only.
//! - [`nn`]: a small feed-forward engine with `nan_dense` first layers,
//!   hand-derived gradients, SGD/Adam, dropout, weighted loss heads, and a
//!   DAG builder for multi-modal fusion architectures.
//! - [`metrics`]: AUC, standardized MSE, and the rank-sum test.
//!
//! All randomized operations take explicit seeds and are bit-deterministic.

pub mod corrupt;
pub mod data;
pub mod impute;
pub mod masked;
pub mod metrics;
pub mod nn;

pub use masked::MaskedMatrix;
