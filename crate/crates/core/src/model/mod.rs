//! The modularized attention-dilated network and its ablation variants.

mod config;
mod network;
mod params;
mod weights;

pub use config::{variant_config, ModelConfig, Variant, KERNEL_SIZE};
pub use network::{
    backward, forward, forward_values, predict, ActivationCache, BranchCache, ModelGradients,
    ModelObjective, Prediction,
};
pub use params::{build_model, count_parameters, BranchParams, ModelParameters, TensorView};
pub use weights::{load_weights, save_weights, weights_to_bytes, WeightFile, WEIGHT_FORMAT, WEIGHT_FORMAT_VERSION};
