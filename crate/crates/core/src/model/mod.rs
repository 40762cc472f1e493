//! End-to-end model: layer attention over post vectors, stacked flow GAT
//! layers, mean pooling over posts, and one two-way softmax head per trait.

mod config;
mod dataset;
mod metrics;
mod network;
mod train;

pub use config::{ModelConfig, TRAITS};
pub use dataset::{load_dataset, parse_dataset, post_id, write_dataset, UserExample, UserPost};
pub use metrics::{Confusion, EvalReport};
pub use network::{
    fgat_prefix, init_post_nodes, layer_matrices, post_nodes_on_tape, report_layer_weights, trait_bias, trait_weight,
    Forward, LayerAttention, LayerWeights, PreparedUser, TrigNet, LAYER_ATTENTION,
};
pub use train::{evaluate, train, train_from, EpochRecord, TrainOutcome};
