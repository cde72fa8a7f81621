//! Datasets: manifest records and JSONL IO, image file formats, the
//! procedurally generated two-domain toy world, triplet sampling, and
//! augmentation. Everything between raw files and training batches.

mod augment;
mod images;
mod records;
mod toygen;
mod triplet;

pub use augment::{
    augment_pair, augment_stack_pair, crop_to_shape, random_crop_window, CropWindow, ImageStack,
};
pub use images::{
    class_palette, read_depth16, read_rgb8, read_seg8, write_depth16, write_rgb8, write_seg8,
    DepthMap, RgbImage, SegMap,
};
pub use records::{
    load_manifest, save_manifest, DatasetManifest, Domain, Pose, SampleRecord,
};
pub use toygen::{
    generate_toy_dataset, AppearanceParams, EnvironmentSpec, ToyWorldConfig,
};
pub use triplet::{
    anchor_candidates as triplet_anchor_candidates, is_negative_candidate, is_positive_pair,
    sample_triplet, sample_triplet_for_anchor, TripletSpec,
};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("virtual record {0} lacks depth or segmentation ground truth")]
    VirtualMissingGroundTruth(String),
    #[error("no valid positive sample available")]
    NoValidPositive,
    #[error("no valid negative sample available")]
    NoValidNegative,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("crop target {target_h}x{target_w} exceeds source {src_h}x{src_w}")]
    TargetTooLarge {
        src_h: usize,
        src_w: usize,
        target_h: usize,
        target_w: usize,
    },
    #[error("class id {class} out of range for {count} classes in {path}")]
    ClassOutOfRange {
        class: usize,
        count: usize,
        path: PathBuf,
    },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("png error: {0}")]
    Png(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Derive an independent, reproducible random stream from a base seed and a
/// usage tag. Streams for different tags never overlap.
pub fn derived_rng(seed: u64, tag: &str, index: u64) -> rand_chacha::ChaCha8Rng {
    use rand_chacha::rand_core::SeedableRng;
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    let tag_bytes = tag.as_bytes();
    let n = tag_bytes.len().min(16);
    key[16..16 + n].copy_from_slice(&tag_bytes[..n]);
    rand_chacha::ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests;
