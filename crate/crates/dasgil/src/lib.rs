//! Multi-task, domain-adaptive representation learning for image-retrieval
//! localization: a shared multi-scale feature extractor shaped by depth and
//! segmentation decoders, aligned across a synthetic and a real domain by
//! multi-scale feature discriminators, with triplet metric learning on the
//! same features and a retrieval plus localization-evaluation stack on top.
//!
//! Start with the runnable programs under `examples/` for end-to-end
//! usage; the `dasgil` binary exposes the same workflows as subcommands.

pub(crate) mod byteio;
pub mod cli;
pub mod data;
pub mod evaluation;
pub mod losses;
pub mod net;
pub mod numcheck;
pub mod pipeline;
pub mod probe;
pub mod retrieval;
pub mod tensor;
pub mod trainer;
