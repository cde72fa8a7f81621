//! Retrieval: mid-layer descriptor extraction, the on-disk multi-scale
//! feature database, nearest-database-image queries under L1 or cosine
//! aggregation, and PCA feature visualization.

mod database;
mod descriptor;
mod pca;
mod query;

pub use database::{
    build_database, database_from_descriptors, digest_file, load_database, save_database,
    FeatureDatabase, DATABASE_MAGIC,
};
pub use descriptor::{descriptor_from_pyramid, extract_descriptor, Descriptor};
pub use pca::pca_visualize;
pub use query::{query, Metric, QueryOptions, QueryResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("layer {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("layer mismatch: {0}")]
    LayerMismatch(String),
    #[error("empty database")]
    EmptyDatabase,
    #[error("feature map has {got} channels, need at least 3")]
    TooFewChannels { got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("database mismatch: {0}")]
    VersionMismatch(String),
    #[error(transparent)]
    Net(#[from] crate::net::NetError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
