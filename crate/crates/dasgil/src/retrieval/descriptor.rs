use ndarray::ArrayD;

use crate::net::{encode, FeaturePyramid, ModelParams};

use super::RetrievalError;

/// Flattened, layer-tagged retrieval representation of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub id: String,
    pub layers: Vec<usize>,
    /// One flattened vector per layer, in layer order.
    pub segments: Vec<Vec<f32>>,
    pub total_dim: usize,
}

impl Descriptor {
    pub fn concatenated(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(self.total_dim);
        for seg in &self.segments {
            out.extend_from_slice(seg);
        }
        out
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.len()).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.segments
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Flatten the requested pyramid levels of an already-encoded image.
pub fn descriptor_from_pyramid(
    id: &str,
    pyramid: &FeaturePyramid<f32>,
    retrieval_layers: &[usize],
) -> Result<Descriptor, RetrievalError> {
    if pyramid.batch_size() != 1 {
        return Err(RetrievalError::ShapeMismatch(format!(
            "descriptor extraction expects a single image, got batch {}",
            pyramid.batch_size()
        )));
    }
    let mut segments = Vec::with_capacity(retrieval_layers.len());
    for &layer in retrieval_layers {
        if layer == 0 || layer > pyramid.len() {
            return Err(RetrievalError::LayerOutOfRange {
                layer,
                max: pyramid.len(),
            });
        }
        let level = pyramid.level(layer);
        segments.push(level.iter().copied().collect::<Vec<f32>>());
    }
    let total_dim = segments.iter().map(|s| s.len()).sum();
    Ok(Descriptor {
        id: id.to_string(),
        layers: retrieval_layers.to_vec(),
        segments,
        total_dim,
    })
}

/// Encode one image and flatten the requested levels, preserving layer
/// order.
pub fn extract_descriptor(
    params: &ModelParams<f32>,
    id: &str,
    image: &ArrayD<f32>,
    retrieval_layers: &[usize],
) -> Result<Descriptor, RetrievalError> {
    for &layer in retrieval_layers {
        if layer == 0 || layer > params.config.encoder_layers {
            return Err(RetrievalError::LayerOutOfRange {
                layer,
                max: params.config.encoder_layers,
            });
        }
    }
    let pyramid = encode(params, image)?;
    descriptor_from_pyramid(id, &pyramid, retrieval_layers)
}
