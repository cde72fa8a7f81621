//! Network graphs: the shared multi-scale feature extractor, the two
//! U-Net-style map generators it feeds over skip connections, and the two
//! multi-scale feature discriminators (flatten and cascade).
//!
//! Everything here comes in two flavors: tape-level builders that compose
//! differentiable graphs for training, and value-level entry points
//! ([`encode`], [`decode_depth`], [`decode_seg`], [`discriminate_flatten`],
//! [`discriminate_cascade`]) that run a forward pass and hand back plain
//! arrays.

mod checkpoint;
mod config;
mod graph;
mod params;

pub use checkpoint::{load_model, save_model, CheckpointReader, CheckpointWriter, CHECKPOINT_MAGIC};
pub(crate) use checkpoint::validate_model_sections;
pub use config::{DiscriminatorKind, NetConfig};
pub use graph::{
    decode_depth, decode_seg, discriminate, discriminate_cascade, discriminate_flatten, encode,
    seg_probabilities, FeaturePyramid, NetGraph, Trainable,
};
pub use params::{init_params, ModelParams, ParamSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("layer {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint mismatch: {0}")]
    VersionMismatch(String),
}
