//! Experiment harness for the `promissing` crate: missing-data studies on
//! the XOR simulation, a tabular benchmark with cross-validated baselines,
//! a multi-modal fusion study with modality-removal trajectories, and
//! counterfactual interpretation of trained networks.
//!
//! Every run is driven by an [`config::ExperimentConfig`] and a master seed;
//! per-repetition seeds derive from it through [`seeds::derive`], so any
//! subset of the design can be reproduced bit-for-bit. Results accumulate
//! in a versioned CSV row format ([`results::ResultTable`]).

pub mod bench;
pub mod cli;
pub mod config;
pub mod explain;
pub mod fusion;
pub mod results;
pub mod seeds;
pub mod xor;
