//! Full training-state checkpoints: model parameters plus optimizer
//! moments, step counter, and the seed that anchors every random stream.
//! Save followed by load is bit-exact on every field.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::ArrayD;

use crate::net::{CheckpointReader, CheckpointWriter, NetConfig, ParamSet};

use super::{AdamState, ModelParams, TrainError, TrainState};

fn moments_to_set(names: &[String], moments: &[ArrayD<f32>]) -> ParamSet<f32> {
    let mut set = ParamSet::new();
    for (name, value) in names.iter().zip(moments) {
        set.push(name.clone(), value.clone());
    }
    set
}

fn set_to_moments(names: &[String], set: &ParamSet<f32>) -> Result<Vec<ArrayD<f32>>, TrainError> {
    if set.len() != names.len() {
        return Err(TrainError::VersionMismatch(format!(
            "moment section holds {} blobs, group has {}",
            set.len(),
            names.len()
        )));
    }
    let mut out = Vec::with_capacity(names.len());
    for ((sname, value), name) in set.iter().zip(names) {
        if sname != name {
            return Err(TrainError::VersionMismatch(format!(
                "moment blob {sname} where {name} expected"
            )));
        }
        out.push(value.clone());
    }
    Ok(out)
}

fn gen_group_names(params: &ModelParams<f32>) -> Vec<String> {
    let mut names = Vec::new();
    for (collection, set) in [
        ("extractor", &params.extractor),
        ("depth_gen", &params.depth_gen),
        ("seg_gen", &params.seg_gen),
    ] {
        for (name, _) in set.iter() {
            names.push(format!("{collection}.{name}"));
        }
    }
    names
}

fn disc_group_names(params: &ModelParams<f32>) -> Vec<String> {
    params
        .discriminator
        .iter()
        .map(|(name, _)| format!("discriminator.{name}"))
        .collect()
}

/// Write the complete training state.
pub fn save_train_checkpoint(state: &TrainState, path: &Path) -> Result<(), TrainError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let meta: BTreeMap<String, serde_json::Value> =
        BTreeMap::from([("trainer_state".to_string(), serde_json::Value::Bool(true))]);
    let mut w = CheckpointWriter::create(path, &state.params.config, state.params.version, meta, 9)?;
    for (name, set) in state.params.collections() {
        w.write_section(name, set)?;
    }
    let gen_names = gen_group_names(&state.params);
    let disc_names = disc_group_names(&state.params);
    w.write_section("opt_gen.m", &moments_to_set(&gen_names, &state.opt_gen.m))?;
    w.write_section("opt_gen.v", &moments_to_set(&gen_names, &state.opt_gen.v))?;
    w.write_section("opt_disc.m", &moments_to_set(&disc_names, &state.opt_disc.m))?;
    w.write_section("opt_disc.v", &moments_to_set(&disc_names, &state.opt_disc.v))?;
    w.write_scalars(
        "scalars:state",
        &[
            ("step".into(), state.step),
            ("seed".into(), state.seed),
            ("opt_gen.t".into(), state.opt_gen.t),
            ("opt_disc.t".into(), state.opt_disc.t),
        ],
    )?;
    w.finish()?;
    Ok(())
}

/// Read a training state back, validating every shape against the stored
/// config.
pub fn load_train_checkpoint(path: &Path) -> Result<TrainState, TrainError> {
    let mut reader = CheckpointReader::open(path)?;
    let config = reader.config.clone();
    config.validate()?;
    let params = ModelParams {
        extractor: reader.take_section("extractor")?,
        depth_gen: reader.take_section("depth_gen")?,
        seg_gen: reader.take_section("seg_gen")?,
        discriminator: reader.take_section("discriminator")?,
        config: config.clone(),
        version: reader.params_version,
    };
    crate::net::validate_model_sections(&config, &params)
        .map_err(TrainError::Net)?;
    let gen_names = gen_group_names(&params);
    let disc_names = disc_group_names(&params);
    let opt_gen = AdamState {
        m: set_to_moments(&gen_names, &reader.take_section("opt_gen.m")?)?,
        v: set_to_moments(&gen_names, &reader.take_section("opt_gen.v")?)?,
        t: 0,
    };
    let opt_disc = AdamState {
        m: set_to_moments(&disc_names, &reader.take_section("opt_disc.m")?)?,
        v: set_to_moments(&disc_names, &reader.take_section("opt_disc.v")?)?,
        t: 0,
    };
    let scalars = reader
        .scalar_sections
        .get("state")
        .ok_or_else(|| TrainError::VersionMismatch("missing state scalars".into()))?;
    let lookup = |key: &str| -> Result<u64, TrainError> {
        scalars
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| TrainError::VersionMismatch(format!("missing scalar {key}")))
    };
    let mut state = TrainState {
        step: lookup("step")?,
        seed: lookup("seed")?,
        params,
        opt_gen,
        opt_disc,
    };
    state.opt_gen.t = lookup("opt_gen.t")?;
    state.opt_disc.t = lookup("opt_disc.t")?;
    Ok(state)
}

/// Load a training state and insist it was produced under `expected`.
pub fn load_train_checkpoint_expecting(
    path: &Path,
    expected: &NetConfig,
) -> Result<TrainState, TrainError> {
    let state = load_train_checkpoint(path)?;
    if &state.params.config != expected {
        return Err(TrainError::VersionMismatch(
            "checkpoint was trained under a different network config".into(),
        ));
    }
    Ok(state)
}
