//! Training objectives as pure, differentiable scalar functions on a tape:
//! the multi-scale depth reconstruction loss, the pixelwise cross-entropy
//! segmentation loss, the least-squares adversarial pair, the ratio-hinge
//! triplet loss (single- and multi-scale), and the weighted total
//! generator objective.

use std::collections::BTreeMap;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{Scalar, Tape, Var};

#[derive(Debug, Error)]
pub enum LossError {
    #[error("no valid pixels in depth ground truth")]
    NoValidPixels,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class id {class} out of range for {count} classes")]
    ClassOutOfRange { class: usize, count: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("layer {layer} out of range 1..={max}")]
    LayerOutOfRange { layer: usize, max: usize },
    #[error("no margin configured for layer {0}")]
    MissingMargin(usize),
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
}

/// Weights of the total generator objective and per-layer triplet margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_t: f64,
    pub lambda_d: f64,
    pub lambda_s: f64,
    /// Margin per triplet layer; every configured triplet layer needs one.
    pub margins: BTreeMap<usize, f64>,
}

impl LossWeights {
    /// Unit weights and margin 1 on the given layers.
    pub fn unit(triplet_layers: &[usize]) -> Self {
        LossWeights {
            lambda_t: 1.0,
            lambda_d: 1.0,
            lambda_s: 1.0,
            margins: triplet_layers.iter().map(|&l| (l, 1.0)).collect(),
        }
    }

    pub fn validate(&self, triplet_layers: &[usize]) -> Result<(), LossError> {
        if self.lambda_t < 0.0 || self.lambda_d < 0.0 || self.lambda_s < 0.0 {
            return Err(LossError::InvalidWeights("negative lambda".into()));
        }
        for &l in triplet_layers {
            match self.margins.get(&l) {
                Some(m) if *m > 0.0 => {}
                Some(_) => {
                    return Err(LossError::InvalidWeights(format!(
                        "margin for layer {l} must be positive"
                    )))
                }
                None => return Err(LossError::MissingMargin(l)),
            }
        }
        Ok(())
    }
}

/// Full-resolution depth ground truth with a 0/1 validity mask; invalid
/// pixels (stored depth 0) never contribute to the loss.
#[derive(Debug, Clone)]
pub struct DepthTarget<F: Scalar> {
    pub depth: ArrayD<F>,
    pub valid: ArrayD<F>,
}

impl<F: Scalar> DepthTarget<F> {
    pub fn new(depth: ArrayD<F>, valid: ArrayD<F>) -> Result<Self, LossError> {
        if depth.shape() != valid.shape() {
            return Err(LossError::ShapeMismatch(format!(
                "depth {:?} vs mask {:?}",
                depth.shape(),
                valid.shape()
            )));
        }
        if depth.ndim() != 4 || depth.shape()[1] != 1 {
            return Err(LossError::ShapeMismatch(format!(
                "depth target must be (n, 1, h, w), got {:?}",
                depth.shape()
            )));
        }
        Ok(DepthTarget { depth, valid })
    }

    /// All pixels valid.
    pub fn dense(depth: ArrayD<F>) -> Result<Self, LossError> {
        let valid = ArrayD::ones(depth.raw_dim());
        Self::new(depth, valid)
    }
}

/// Downscale ground truth by an integer factor, averaging only valid
/// source pixels per block. A block with no valid source pixel stays
/// invalid. With `nearest`, the block's top-left pixel is taken instead.
pub fn resize_depth_valid<F: Scalar>(
    target: &DepthTarget<F>,
    factor: usize,
    nearest: bool,
) -> DepthTarget<F> {
    if factor == 1 {
        return target.clone();
    }
    let shape = target.depth.shape();
    let (n, h, w) = (shape[0], shape[2], shape[3]);
    let (oh, ow) = (h / factor, w / factor);
    let mut depth = ArrayD::<F>::zeros(IxDyn(&[n, 1, oh, ow]));
    let mut valid = ArrayD::<F>::zeros(IxDyn(&[n, 1, oh, ow]));
    for b in 0..n {
        for i in 0..oh {
            for j in 0..ow {
                if nearest {
                    let (si, sj) = (i * factor, j * factor);
                    depth[[b, 0, i, j]] = target.depth[[b, 0, si, sj]];
                    valid[[b, 0, i, j]] = target.valid[[b, 0, si, sj]];
                    continue;
                }
                let mut sum = F::zero();
                let mut count = F::zero();
                for di in 0..factor {
                    for dj in 0..factor {
                        let (si, sj) = (i * factor + di, j * factor + dj);
                        if target.valid[[b, 0, si, sj]] > F::zero() {
                            sum += target.depth[[b, 0, si, sj]];
                            count += F::one();
                        }
                    }
                }
                if count > F::zero() {
                    depth[[b, 0, i, j]] = sum / count;
                    valid[[b, 0, i, j]] = F::one();
                }
            }
        }
    }
    DepthTarget { depth, valid }
}

/// Multi-scale depth reconstruction loss: sum over prediction layers of the
/// mean absolute error per valid pixel, against ground truth resized to
/// each layer's resolution.
pub fn depth_loss<F: Scalar>(
    tape: &mut Tape<F>,
    predictions: &BTreeMap<usize, Var>,
    target: &DepthTarget<F>,
    nearest_resize: bool,
) -> Result<Var, LossError> {
    if predictions.is_empty() {
        return Err(LossError::ShapeMismatch("no depth predictions".into()));
    }
    let gt_shape = target.depth.shape().to_vec();
    let mut total: Option<Var> = None;
    for (&layer, &pred) in predictions {
        let pshape = tape.value(pred).shape().to_vec();
        if pshape.len() != 4 || pshape[1] != 1 || pshape[0] != gt_shape[0] {
            return Err(LossError::ShapeMismatch(format!(
                "layer {layer} prediction {pshape:?} vs target {gt_shape:?}"
            )));
        }
        if gt_shape[2] % pshape[2] != 0 || gt_shape[3] % pshape[3] != 0 {
            return Err(LossError::ShapeMismatch(format!(
                "layer {layer}: target {gt_shape:?} not an integer multiple of {pshape:?}"
            )));
        }
        let (fh, fw) = (gt_shape[2] / pshape[2], gt_shape[3] / pshape[3]);
        if fh != fw {
            return Err(LossError::ShapeMismatch(format!(
                "layer {layer}: anisotropic resize {fh}x{fw}"
            )));
        }
        let resized = resize_depth_valid(target, fh, nearest_resize);
        let valid_count = resized.valid.iter().filter(|v| **v > F::zero()).count();
        if valid_count == 0 {
            return Err(LossError::NoValidPixels);
        }
        let gt = tape.constant(resized.depth);
        let mask = tape.constant(resized.valid);
        let diff = tape.sub(pred, gt);
        let absdiff = tape.abs(diff);
        let masked = tape.mul(absdiff, mask);
        let sum = tape.sum_all(masked);
        let term = tape.scale(sum, 1.0 / valid_count as f64);
        total = Some(match total {
            Some(acc) => tape.add(acc, term),
            None => term,
        });
    }
    Ok(total.expect("at least one layer"))
}

/// Pixelwise cross-entropy over class scores (n, m, h, w) against a class-id
/// map laid out row-major as (n, h, w).
pub fn seg_loss<F: Scalar>(
    tape: &mut Tape<F>,
    scores: Var,
    class_ids: &[usize],
) -> Result<Var, LossError> {
    let shape = tape.value(scores).shape().to_vec();
    if shape.len() != 4 {
        return Err(LossError::ShapeMismatch(format!(
            "scores must be (n, m, h, w), got {shape:?}"
        )));
    }
    let (n, m, h, w) = (shape[0], shape[1], shape[2], shape[3]);
    if class_ids.len() != n * h * w {
        return Err(LossError::ShapeMismatch(format!(
            "{} class ids for {}x{}x{} pixels",
            class_ids.len(),
            n,
            h,
            w
        )));
    }
    if let Some(&bad) = class_ids.iter().find(|&&c| c >= m) {
        return Err(LossError::ClassOutOfRange { class: bad, count: m });
    }
    Ok(tape.cross_entropy_mean(scores, class_ids.to_vec()))
}

/// Least-squares discriminator loss: virtual scores pushed to 0, real
/// scores pushed to 1.
pub fn dis_loss<F: Scalar>(
    tape: &mut Tape<F>,
    d_virtual: Var,
    d_real: Var,
) -> Result<Var, LossError> {
    if tape.value(d_virtual).is_empty() || tape.value(d_real).is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let v2 = tape.square(d_virtual);
    let v_term = tape.mean_all(v2);
    let shifted = tape.add_scalar(d_real, -1.0);
    let r2 = tape.square(shifted);
    let r_term = tape.mean_all(r2);
    let sum = tape.add(v_term, r_term);
    Ok(tape.scale(sum, 0.5))
}

/// Least-squares generator loss: virtual scores pushed to 1.
pub fn gen_loss<F: Scalar>(tape: &mut Tape<F>, d_virtual: Var) -> Result<Var, LossError> {
    if tape.value(d_virtual).is_empty() {
        return Err(LossError::EmptyBatch);
    }
    let shifted = tape.add_scalar(d_virtual, -1.0);
    let sq = tape.square(shifted);
    let mean = tape.mean_all(sq);
    Ok(tape.scale(mean, 0.5))
}

fn l2_row_norms<F: Scalar>(tape: &mut Tape<F>, a: Var, b: Var) -> Var {
    let diff = tape.sub(a, b);
    let sq = tape.square(diff);
    let sums = tape.sum_rows(sq);
    tape.sqrt(sums)
}

/// Ratio-hinge triplet rows: max(0, 1 - |a-n| / (margin + |a-p|)) per row
/// of (n, d) feature matrices.
fn triplet_hinge_rows<F: Scalar>(
    tape: &mut Tape<F>,
    anchor: Var,
    positive: Var,
    negative: Var,
    margin: f64,
) -> Var {
    let dn = l2_row_norms(tape, anchor, negative);
    let dp = l2_row_norms(tape, anchor, positive);
    let denom = tape.add_scalar(dp, margin);
    let ratio = tape.div(dn, denom);
    let arg = tape.neg(ratio);
    let arg = tape.add_scalar(arg, 1.0);
    tape.relu(arg)
}

/// Single-scale triplet loss on three equally-shaped feature vectors,
/// bounded in [0, 1].
pub fn triplet_loss_single<F: Scalar>(
    tape: &mut Tape<F>,
    anchor: Var,
    positive: Var,
    negative: Var,
    margin: f64,
) -> Result<Var, LossError> {
    let ashape = tape.value(anchor).shape().to_vec();
    for (name, v) in [("positive", positive), ("negative", negative)] {
        if tape.value(v).shape() != ashape.as_slice() {
            return Err(LossError::DimensionMismatch(format!(
                "{name} shape {:?} vs anchor {:?}",
                tape.value(v).shape(),
                ashape
            )));
        }
    }
    if margin <= 0.0 {
        return Err(LossError::InvalidWeights("margin must be positive".into()));
    }
    let len = tape.value(anchor).len();
    let a = tape.reshape(anchor, IxDyn(&[1, len]));
    let p = tape.reshape(positive, IxDyn(&[1, len]));
    let n = tape.reshape(negative, IxDyn(&[1, len]));
    let rows = triplet_hinge_rows(tape, a, p, n, margin);
    Ok(tape.mean_all(rows))
}

/// Multi-scale triplet loss: per configured layer, flatten that pyramid
/// level for anchor/positive/negative and sum the batch-mean hinge values.
pub fn triplet_loss_multi<F: Scalar>(
    tape: &mut Tape<F>,
    anchor_pyramid: &[Var],
    positive_pyramid: &[Var],
    negative_pyramid: &[Var],
    triplet_layers: &[usize],
    weights: &LossWeights,
) -> Result<Var, LossError> {
    if triplet_layers.is_empty() {
        return Err(LossError::InvalidWeights("no triplet layers".into()));
    }
    let depth = anchor_pyramid.len();
    if positive_pyramid.len() != depth || negative_pyramid.len() != depth {
        return Err(LossError::DimensionMismatch(
            "pyramids have different level counts".into(),
        ));
    }
    let mut total: Option<Var> = None;
    for &layer in triplet_layers {
        if layer == 0 || layer > depth {
            return Err(LossError::LayerOutOfRange { layer, max: depth });
        }
        let margin = *weights
            .margins
            .get(&layer)
            .ok_or(LossError::MissingMargin(layer))?;
        let a = tape.flatten(anchor_pyramid[layer - 1]);
        let p = tape.flatten(positive_pyramid[layer - 1]);
        let n = tape.flatten(negative_pyramid[layer - 1]);
        let rows = triplet_hinge_rows(tape, a, p, n, margin);
        let term = tape.mean_all(rows);
        total = Some(match total {
            Some(acc) => tape.add(acc, term),
            None => term,
        });
    }
    Ok(total.expect("nonempty layers"))
}

/// Weighted total generator objective:
/// gen + lambda_t * triplet + lambda_d * depth + lambda_s * seg.
pub fn total_gen_objective<F: Scalar>(
    tape: &mut Tape<F>,
    gen: Var,
    triplet: Var,
    depth: Var,
    seg: Var,
    weights: &LossWeights,
) -> Result<Var, LossError> {
    for (name, v) in [
        ("gen", gen),
        ("triplet", triplet),
        ("depth", depth),
        ("seg", seg),
    ] {
        let val = tape.scalar(v);
        if !val.is_finite() {
            return Err(LossError::NonFiniteInput(format!("{name} = {val}")));
        }
    }
    let t = tape.scale(triplet, weights.lambda_t);
    let d = tape.scale(depth, weights.lambda_d);
    let s = tape.scale(seg, weights.lambda_s);
    let td = tape.add(t, d);
    let tds = tape.add(td, s);
    Ok(tape.add(gen, tds))
}

#[cfg(test)]
mod tests;
