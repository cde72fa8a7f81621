//! Alternating adversarial optimization: a discriminator phase minimizing
//! the least-squares domain-classification loss over its own parameters,
//! then a generator phase minimizing the weighted total objective over the
//! extractor and both map generators. The two phases own disjoint
//! parameter groups with separate optimizer instances, so neither can
//! perturb the other's weights.
//!
//! Every random decision of a run is a pure function of (seed, step), which
//! makes interrupted and resumed runs reproduce uninterrupted ones exactly.

mod adam;
mod batch;
mod checkpoint;

pub use adam::{AdamHyper, AdamState};
pub use batch::{
    anchor_ids, assemble_batch, assemble_batch_for_anchors, epoch_permutation, BatchBundle,
    BatchOptions, VirtualBatch,
};
pub use checkpoint::{load_train_checkpoint, load_train_checkpoint_expecting, save_train_checkpoint};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{derived_rng, DataError, DatasetManifest, Domain};
use crate::losses::{
    depth_loss, dis_loss, gen_loss, seg_loss, total_gen_objective, triplet_loss_multi,
    DepthTarget, LossError, LossWeights,
};
use crate::net::{
    init_params, DiscriminatorKind, ModelParams, NetConfig, NetError, NetGraph, Trainable,
};
use crate::tensor::{Gradients, Tape, Var};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0} domain")]
    EmptyDomain(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint mismatch: {0}")]
    VersionMismatch(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters and run plumbing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs: usize,
    pub weights: LossWeights,
    pub seed: u64,
    /// Steps between checkpoints; 0 writes only the final one.
    pub checkpoint_every: usize,
    #[serde(default)]
    pub log_path: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint_path: Option<PathBuf>,
    /// Adversarial training on or off (off drops both GAN terms).
    pub adversarial: bool,
    /// Random instead of centered crops for training batches.
    pub random_crop: bool,
}

impl TrainConfig {
    /// Defaults from the training protocol: batch 8, learning rate 0.005,
    /// 5 epochs with the flatten discriminator, 40 with the cascade.
    pub fn default_for(kind: DiscriminatorKind, triplet_layers: &[usize], seed: u64) -> Self {
        TrainConfig {
            batch_size: 8,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            epochs: match kind {
                DiscriminatorKind::Flatten => 5,
                DiscriminatorKind::Cascade => 40,
            },
            weights: LossWeights::unit(triplet_layers),
            seed,
            checkpoint_every: 0,
            log_path: None,
            checkpoint_path: None,
            adversarial: true,
            random_crop: false,
        }
    }

    pub fn validate(&self, triplet_layers: &[usize]) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        self.weights.validate(triplet_layers)?;
        Ok(())
    }

    fn hyper(&self) -> AdamHyper {
        AdamHyper {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    fn batch_options(&self) -> BatchOptions {
        BatchOptions {
            batch_size: self.batch_size,
            random_crop: self.random_crop,
        }
    }
}

/// Mutable training state. All randomness derives from `(seed, step)`, so
/// the pair fully captures the random stream position.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: ModelParams<f32>,
    pub opt_gen: AdamState,
    pub opt_disc: AdamState,
    pub step: u64,
    pub seed: u64,
}

impl TrainState {
    pub fn init(config: &NetConfig, seed: u64) -> Result<Self, TrainError> {
        let params: ModelParams<f32> = init_params(config, seed)?;
        let opt_gen = AdamState::zeros_for(&[&params.extractor, &params.depth_gen, &params.seg_gen]);
        let opt_disc = AdamState::zeros_for(&[&params.discriminator]);
        Ok(TrainState {
            params,
            opt_gen,
            opt_disc,
            step: 0,
            seed,
        })
    }
}

/// Per-step component losses, serialized one JSON object per line.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StepLog {
    pub step: u64,
    #[serde(rename = "L_dis")]
    pub l_dis: f64,
    #[serde(rename = "L_gen")]
    pub l_gen: f64,
    #[serde(rename = "L_T")]
    pub l_t: f64,
    #[serde(rename = "L_D")]
    pub l_d: f64,
    #[serde(rename = "L_S")]
    pub l_s: f64,
    pub total: f64,
    pub wallclock_ms: f64,
}

fn grads_for(
    grads: &Gradients<f32>,
    vars: &BTreeMap<String, Var>,
    set: &crate::net::ParamSet<f32>,
) -> Vec<Option<ArrayD<f32>>> {
    set.iter()
        .map(|(name, _)| grads.get(vars[name]).cloned())
        .collect()
}

fn finite_or(value: f32, what: &str) -> Result<f64, TrainError> {
    if !value.is_finite() {
        return Err(TrainError::NonFiniteLoss(format!("{what} = {value}")));
    }
    Ok(value as f64)
}

/// Phase 1: one optimizer step on the discriminator loss, touching only
/// discriminator parameters.
pub fn discriminator_phase(
    state: &mut TrainState,
    bundle: &BatchBundle,
    config: &TrainConfig,
) -> Result<f64, TrainError> {
    let mut tape = Tape::<f32>::new();
    let graph = NetGraph::insert(&mut tape, &state.params, Trainable::discriminator_only());
    let virtual_images = tape.constant(bundle.anchors.images.clone());
    let real_images = tape.constant(bundle.real_images.clone());
    let pyr_v = graph.encode(&mut tape, virtual_images);
    let pyr_r = graph.encode(&mut tape, real_images);
    let d_v = graph.discriminate(&mut tape, &pyr_v);
    let d_r = graph.discriminate(&mut tape, &pyr_r);
    let loss = dis_loss(&mut tape, d_v, d_r)?;
    let value = finite_or(tape.scalar(loss), "L_dis")?;
    let grads = tape.backward(loss);
    let grad_list = grads_for(&grads, &graph.discriminator, &state.params.discriminator);
    let entries: Vec<&mut ArrayD<f32>> = state
        .params
        .discriminator
        .iter_mut()
        .map(|(_, v)| v)
        .collect();
    let refs: Vec<Option<&ArrayD<f32>>> = grad_list.iter().map(|g| g.as_ref()).collect();
    state.opt_disc.step(entries, &refs, &config.hyper());
    Ok(value)
}

/// Phase 2 outcome: the component losses that entered the total objective.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorLosses {
    pub l_gen: f64,
    pub l_t: f64,
    pub l_d: f64,
    pub l_s: f64,
    pub total: f64,
}

/// Phase 2: one optimizer step on the total generator objective, touching
/// only extractor and generator parameters.
pub fn generator_phase(
    state: &mut TrainState,
    bundle: &BatchBundle,
    config: &TrainConfig,
) -> Result<GeneratorLosses, TrainError> {
    let weights = &config.weights;
    let mut tape = Tape::<f32>::new();
    let graph = NetGraph::insert(&mut tape, &state.params, Trainable::generators());
    let anchors = tape.constant(bundle.anchors.images.clone());
    let pyr_a = graph.encode(&mut tape, anchors);

    let zero = tape.constant(ArrayD::zeros(ndarray::IxDyn(&[1])));
    let gen_term = if config.adversarial {
        let d_v = graph.discriminate(&mut tape, &pyr_a);
        gen_loss(&mut tape, d_v)?
    } else {
        zero
    };
    let triplet_term = if weights.lambda_t > 0.0 {
        let positives = tape.constant(bundle.positives.images.clone());
        let negatives = tape.constant(bundle.negatives.images.clone());
        let pyr_p = graph.encode(&mut tape, positives);
        let pyr_n = graph.encode(&mut tape, negatives);
        triplet_loss_multi(
            &mut tape,
            &pyr_a,
            &pyr_p,
            &pyr_n,
            &graph.config().triplet_layers,
            weights,
        )?
    } else {
        zero
    };
    let depth_term = if weights.lambda_d > 0.0 {
        let preds = graph.decode_depth(&mut tape, &pyr_a);
        let target = DepthTarget::new(
            bundle.anchors.depth.clone(),
            bundle.anchors.depth_valid.clone(),
        )?;
        depth_loss(&mut tape, &preds, &target, false)?
    } else {
        zero
    };
    let seg_term = if weights.lambda_s > 0.0 {
        let scores = graph.decode_seg(&mut tape, &pyr_a);
        seg_loss(&mut tape, scores, &bundle.anchors.seg)?
    } else {
        zero
    };
    let total = total_gen_objective(&mut tape, gen_term, triplet_term, depth_term, seg_term, weights)?;
    let losses = GeneratorLosses {
        l_gen: finite_or(tape.scalar(gen_term), "L_gen")?,
        l_t: finite_or(tape.scalar(triplet_term), "L_T")?,
        l_d: finite_or(tape.scalar(depth_term), "L_D")?,
        l_s: finite_or(tape.scalar(seg_term), "L_S")?,
        total: finite_or(tape.scalar(total), "total")?,
    };
    let grads = tape.backward(total);
    let mut grad_list = grads_for(&grads, &graph.extractor, &state.params.extractor);
    grad_list.extend(grads_for(&grads, &graph.depth_gen, &state.params.depth_gen));
    grad_list.extend(grads_for(&grads, &graph.seg_gen, &state.params.seg_gen));
    let mut entries: Vec<&mut ArrayD<f32>> = Vec::new();
    let (ext, dg, sg) = (
        &mut state.params.extractor,
        &mut state.params.depth_gen,
        &mut state.params.seg_gen,
    );
    entries.extend(ext.iter_mut().map(|(_, v)| v));
    entries.extend(dg.iter_mut().map(|(_, v)| v));
    entries.extend(sg.iter_mut().map(|(_, v)| v));
    let refs: Vec<Option<&ArrayD<f32>>> = grad_list.iter().map(|g| g.as_ref()).collect();
    state.opt_gen.step(entries, &refs, &config.hyper());
    Ok(losses)
}

/// One full training step: discriminator phase (when adversarial), then
/// generator phase. Aborts with a diagnostic on any non-finite loss.
pub fn train_step(
    state: &mut TrainState,
    bundle: &BatchBundle,
    config: &TrainConfig,
) -> Result<StepLog, TrainError> {
    let start = Instant::now();
    let l_dis = if config.adversarial {
        discriminator_phase(state, bundle, config)?
    } else {
        0.0
    };
    let gen = generator_phase(state, bundle, config)?;
    let log = StepLog {
        step: state.step,
        l_dis,
        l_gen: gen.l_gen,
        l_t: gen.l_t,
        l_d: gen.l_d,
        l_s: gen.l_s,
        total: gen.total,
        wallclock_ms: start.elapsed().as_secs_f64() * 1000.0,
    };
    state.step += 1;
    Ok(log)
}

/// Steps per epoch: one pass over the anchor candidates, whole batches only.
pub fn steps_per_epoch(manifest: &DatasetManifest, batch_size: usize) -> usize {
    anchor_ids(manifest).len() / batch_size
}

fn check_domains(manifest: &DatasetManifest) -> Result<(), TrainError> {
    if manifest.domain_records(Domain::Virtual).is_empty() {
        return Err(TrainError::EmptyDomain("virtual".into()));
    }
    if manifest.domain_records(Domain::Real).is_empty() {
        return Err(TrainError::EmptyDomain("real".into()));
    }
    Ok(())
}

/// Run training to completion from an existing state (fresh or resumed).
/// Returns the final state and every step log produced by this call.
pub fn train_from(
    mut state: TrainState,
    manifest: &DatasetManifest,
    config: &TrainConfig,
) -> Result<(TrainState, Vec<StepLog>), TrainError> {
    config.validate(&state.params.config.triplet_layers)?;
    check_domains(manifest)?;
    let candidates = anchor_ids(manifest);
    if candidates.is_empty() {
        return Err(TrainError::Data(DataError::NoValidPositive));
    }
    let spe = candidates.len() / config.batch_size;
    if spe == 0 {
        return Err(TrainError::InvalidConfig(format!(
            "batch size {} exceeds the {} anchor candidates",
            config.batch_size,
            candidates.len()
        )));
    }
    let total_steps = (config.epochs * spe) as u64;
    let mut logs = Vec::new();
    let mut log_file = match &config.log_path {
        Some(path) => {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            Some(std::io::BufWriter::new(std::fs::File::create(path)?))
        }
        None => None,
    };
    let seed = state.seed;
    while state.step < total_steps {
        let step = state.step;
        let epoch = step as usize / spe;
        let offset = (step as usize % spe) * config.batch_size;
        let perm = epoch_permutation(&candidates, derived_rng(seed, "perm", epoch as u64));
        let anchors = &perm[offset..offset + config.batch_size];
        let mut rng = derived_rng(seed, "step", step);
        let bundle = assemble_batch_for_anchors(
            manifest,
            &state.params.config,
            &config.batch_options(),
            anchors,
            &mut rng,
        )?;
        let log = train_step(&mut state, &bundle, config)?;
        if let Some(f) = log_file.as_mut() {
            serde_json::to_writer(&mut *f, &log)
                .map_err(|e| TrainError::Io(std::io::Error::new(std::io::ErrorKind::Other, e)))?;
            f.write_all(b"\n")?;
        }
        logs.push(log);
        if let Some(path) = &config.checkpoint_path {
            let due = config.checkpoint_every > 0
                && (state.step % config.checkpoint_every as u64) == 0;
            if due && state.step < total_steps {
                save_train_checkpoint(&state, path)?;
            }
        }
    }
    if let Some(f) = log_file.as_mut() {
        f.flush()?;
    }
    if let Some(path) = &config.checkpoint_path {
        save_train_checkpoint(&state, path)?;
    }
    Ok((state, logs))
}

/// Train a fresh model on the manifest.
pub fn train(
    manifest: &DatasetManifest,
    net_config: &NetConfig,
    config: &TrainConfig,
) -> Result<(TrainState, Vec<StepLog>), TrainError> {
    net_config.validate()?;
    let state = TrainState::init(net_config, config.seed)?;
    train_from(state, manifest, config)
}

#[cfg(test)]
mod tests;
