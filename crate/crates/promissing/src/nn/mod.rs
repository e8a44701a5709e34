//! Missing-value-native neural networks.
//!
//! The layers here accept a [`MaskedMatrix`](crate::MaskedMatrix) directly:
//! a first layer can prune missing inputs from its weighted sums instead of
//! requiring imputation. Networks are small DAGs assembled by a builder,
//! trained with mini-batch SGD or Adam, and fully deterministic for a fixed
//! seed.

mod gradcheck;
mod layer;
mod network;
mod optim;
mod serialize;
mod train;
mod transfer;

pub use gradcheck::{gradcheck, GradCheckReport};
pub use layer::{LayerKind, Mode, NeutralizerMatrix};
pub use network::{
    benchmark_network, fusion_network, xor_network, DropoutMode, FirstLayer, LossKind, Network,
    NetworkBuilder, Node, NodeId, NodeKind,
};
pub use optim::{optimizer_step, OptimizerConfig, OptimizerState};
pub use serialize::{load_network, network_from_str, network_to_string, save_network};
pub use train::{train, train_with, TrainConfig, TrainHistory};
pub use transfer::Transfer;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    /// Tensor shapes or target values do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// The network description itself is invalid.
    #[error("network spec error: {0}")]
    Spec(String),

    /// A plain dense layer received missing cells; only nan_dense layers
    /// accept them.
    #[error("node {node} cannot accept missing values; impute first or use a nan_dense layer")]
    MissingNotAllowed { node: NodeId },

    /// Loss or parameters became non-finite during training.
    #[error("training diverged at epoch {epoch}; lower the learning rate")]
    Divergence { epoch: usize },

    #[error("optimizer error: {0}")]
    Optimizer(String),

    #[error("serialization error: {0}")]
    Serialize(String),
}
