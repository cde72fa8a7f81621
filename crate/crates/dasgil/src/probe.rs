//! Post-hoc domain probe: a logistic-regression classifier trained on
//! frozen encoder features to tell the two domains apart. High held-out
//! accuracy means the feature distributions remain separable; accuracy
//! near chance means they have been aligned.

use ndarray::Axis;

use crate::data::{derived_rng, read_rgb8, DatasetManifest, Domain, SampleRecord};
use crate::net::{encode, ModelParams};
use crate::pipeline::PipelineError;

use rand::seq::SliceRandom;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Split labeled features 50/50 per class, standardize with training
/// statistics, fit an L2-regularized logistic regression by full-batch
/// gradient descent, and report held-out accuracy in [0, 1].
///
/// Labels are +1 / -1. Deterministic given the seed.
pub fn logistic_holdout_accuracy(
    features: &[Vec<f64>],
    labels: &[f64],
    seed: u64,
) -> Result<f64, PipelineError> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(PipelineError::Invalid(
            "empty or mismatched probe data".into(),
        ));
    }
    let mut rng = derived_rng(seed, "probe", 0);
    let mut train_idx = Vec::new();
    let mut held_idx = Vec::new();
    for class in [-1.0, 1.0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < 4 {
            return Err(PipelineError::Invalid(format!(
                "need at least 4 samples per class, class {class} has {}",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let half = idx.len() / 2;
        train_idx.extend_from_slice(&idx[..half]);
        held_idx.extend_from_slice(&idx[half..]);
    }
    let dim = features[0].len();
    let n_train = train_idx.len() as f64;
    let mut mean = vec![0.0f64; dim];
    for &i in &train_idx {
        for (m, v) in mean.iter_mut().zip(&features[i]) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n_train;
    }
    let mut std = vec![0.0f64; dim];
    for &i in &train_idx {
        for ((s, m), v) in std.iter_mut().zip(&mean).zip(&features[i]) {
            let d = v - m;
            *s += d * d;
        }
    }
    for s in &mut std {
        *s = (*s / n_train).sqrt().max(1e-9);
    }
    let normalize = |f: &[f64]| -> Vec<f64> {
        f.iter()
            .zip(&mean)
            .zip(&std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };

    let l2 = 1e-2;
    let lr = 0.25;
    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let train_x: Vec<Vec<f64>> = train_idx.iter().map(|&i| normalize(&features[i])).collect();
    for _ in 0..400 {
        let mut gw = vec![0.0f64; dim];
        let mut gb = 0.0f64;
        for (x, &i) in train_x.iter().zip(&train_idx) {
            let y = labels[i];
            let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let coeff = -y * sigmoid(-y * z);
            for (g, v) in gw.iter_mut().zip(x) {
                *g += coeff * v;
            }
            gb += coeff;
        }
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= lr * (gi / n_train + 2.0 * l2 * *wi);
        }
        b -= lr * gb / n_train;
    }
    let mut correct = 0usize;
    for &i in &held_idx {
        let x = normalize(&features[i]);
        let z: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
        if (z >= 0.0) == (labels[i] > 0.0) {
            correct += 1;
        }
    }
    Ok(correct as f64 / held_idx.len() as f64)
}

/// Per-channel mean and standard deviation of the pyramid levels from
/// `min_layer` up, for one image.
fn pooled_statistics(
    params: &ModelParams<f32>,
    image: &ndarray::ArrayD<f32>,
    min_layer: usize,
) -> Result<Vec<f64>, PipelineError> {
    let pyramid = encode(params, image).map_err(crate::retrieval::RetrievalError::from)?;
    let mut features = Vec::new();
    for (idx, level) in pyramid.levels().iter().enumerate() {
        if idx + 1 < min_layer {
            continue;
        }
        let channels = level.shape()[1];
        for c in 0..channels {
            let slice = level.index_axis(Axis(1), c);
            let n = slice.len() as f64;
            let mean = slice.iter().map(|&v| v as f64).sum::<f64>() / n;
            let var = slice
                .iter()
                .map(|&v| {
                    let d = v as f64 - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            features.push(mean);
            features.push(var.sqrt());
        }
    }
    Ok(features)
}

fn domain_features<FX>(
    manifest: &DatasetManifest,
    mut featurize: FX,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), PipelineError>
where
    FX: FnMut(&SampleRecord) -> Result<Vec<f64>, PipelineError>,
{
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in &manifest.records {
        features.push(featurize(record)?);
        labels.push(if record.domain == Domain::Real { 1.0 } else { -1.0 });
    }
    Ok((features, labels))
}

/// Pooled per-channel statistics of the levels from `min_layer` up for
/// every record, with +1 (real) / -1 (virtual) labels.
pub fn pooled_domain_features(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    min_layer: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), PipelineError> {
    domain_features(manifest, |record| {
        let image = read_rgb8(&manifest.resolve(&record.image_path))?;
        pooled_statistics(params, &image.to_net_input::<f32>(), min_layer)
    })
}

/// Probe on pooled per-channel statistics of the levels from `min_layer`
/// up.
pub fn domain_probe_accuracy_from_layer(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    min_layer: usize,
    seed: u64,
) -> Result<f64, PipelineError> {
    let (features, labels) = pooled_domain_features(params, manifest, min_layer)?;
    logistic_holdout_accuracy(&features, &labels, seed)
}

/// Probe on the model's own retrieval representation: the flattened
/// configured retrieval layers, exactly what the localization pipeline
/// consumes.
pub fn domain_probe_accuracy(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    seed: u64,
) -> Result<f64, PipelineError> {
    let layers = params.config.retrieval_layers.clone();
    let (features, labels) = domain_features(manifest, |record| {
        let image = read_rgb8(&manifest.resolve(&record.image_path))?;
        let descriptor = crate::retrieval::extract_descriptor(
            params,
            &record.id,
            &image.to_net_input::<f32>(),
            &layers,
        )?;
        Ok(descriptor
            .concatenated()
            .iter()
            .map(|&v| v as f64)
            .collect())
    })?;
    logistic_holdout_accuracy(&features, &labels, seed)
}
