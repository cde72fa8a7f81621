//! Versioned checkpoint container.
//!
//! Layout: magic `DGCK`, format version (u16 LE), a JSON header carrying
//! the [`NetConfig`] and arbitrary metadata, then named sections of named
//! parameter blobs stored as little-endian f32. Save followed by load is
//! bit-exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::byteio::*;

use super::params::{
    depth_gen_specs, discriminator_specs, extractor_specs, seg_gen_specs, ParamSpec,
};
use super::{ModelParams, NetConfig, NetError, ParamSet};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGCK";
pub const CHECKPOINT_VERSION: u16 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetConfig,
    params_version: u32,
    #[serde(default)]
    meta: BTreeMap<String, serde_json::Value>,
}

/// Streaming writer for checkpoint files. Sections are written in the order
/// they are added; readers address them by name.
pub struct CheckpointWriter<W: Write> {
    out: W,
}

impl CheckpointWriter<BufWriter<File>> {
    pub fn create(
        path: &Path,
        config: &NetConfig,
        params_version: u32,
        meta: BTreeMap<String, serde_json::Value>,
        section_count: u32,
    ) -> Result<Self, NetError> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        out.write_all(CHECKPOINT_MAGIC)?;
        write_u16(&mut out, CHECKPOINT_VERSION)?;
        let header = Header {
            config: config.clone(),
            params_version,
            meta,
        };
        let json = serde_json::to_vec(&header).expect("header serializes");
        write_u32(&mut out, json.len() as u32)?;
        out.write_all(&json)?;
        write_u32(&mut out, section_count)?;
        Ok(CheckpointWriter { out })
    }
}

impl<W: Write> CheckpointWriter<W> {
    pub fn write_section(&mut self, name: &str, set: &ParamSet<f32>) -> Result<(), NetError> {
        write_string(&mut self.out, name)?;
        write_u32(&mut self.out, set.len() as u32)?;
        for (pname, value) in set.iter() {
            write_string(&mut self.out, pname)?;
            write_u32(&mut self.out, value.ndim() as u32)?;
            for d in value.shape() {
                write_u32(&mut self.out, *d as u32)?;
            }
            for v in value.iter() {
                write_f32(&mut self.out, *v)?;
            }
        }
        Ok(())
    }

    pub fn write_scalars(&mut self, name: &str, values: &[(String, u64)]) -> Result<(), NetError> {
        write_string(&mut self.out, name)?;
        write_u32(&mut self.out, values.len() as u32)?;
        for (k, v) in values {
            write_string(&mut self.out, k)?;
            write_u64(&mut self.out, *v)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), NetError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Fully parsed checkpoint file.
pub struct CheckpointReader {
    pub config: NetConfig,
    pub params_version: u32,
    pub meta: BTreeMap<String, serde_json::Value>,
    pub sections: BTreeMap<String, ParamSet<f32>>,
    pub scalar_sections: BTreeMap<String, Vec<(String, u64)>>,
}

impl CheckpointReader {
    pub fn open(path: &Path) -> Result<Self, NetError> {
        let file = File::open(path)?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(NetError::VersionMismatch(format!(
                "bad magic {magic:?}, not a checkpoint file"
            )));
        }
        let version = read_u16(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(NetError::VersionMismatch(format!(
                "checkpoint format version {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let header_len = read_u32(&mut r)? as usize;
        let header_bytes = read_exact_buf(&mut r, header_len)?;
        let header: Header = serde_json::from_slice(&header_bytes)
            .map_err(|e| NetError::VersionMismatch(format!("unreadable header: {e}")))?;
        let section_count = read_u32(&mut r)?;
        let mut sections = BTreeMap::new();
        let mut scalar_sections = BTreeMap::new();
        for _ in 0..section_count {
            let name = read_string(&mut r)?;
            if let Some(scalar_name) = name.strip_prefix("scalars:") {
                let count = read_u32(&mut r)?;
                let mut values = Vec::new();
                for _ in 0..count {
                    let k = read_string(&mut r)?;
                    let v = read_u64(&mut r)?;
                    values.push((k, v));
                }
                scalar_sections.insert(scalar_name.to_string(), values);
            } else {
                let count = read_u32(&mut r)?;
                let mut set = ParamSet::new();
                for _ in 0..count {
                    let pname = read_string(&mut r)?;
                    let ndim = read_u32(&mut r)? as usize;
                    if ndim > 8 {
                        return Err(NetError::VersionMismatch(format!(
                            "blob {pname} claims {ndim} dimensions"
                        )));
                    }
                    let mut shape = Vec::with_capacity(ndim);
                    for _ in 0..ndim {
                        shape.push(read_u32(&mut r)? as usize);
                    }
                    let len: usize = shape.iter().product();
                    let mut data = Vec::with_capacity(len);
                    for _ in 0..len {
                        data.push(read_f32(&mut r)?);
                    }
                    let arr = ArrayD::from_shape_vec(IxDyn(&shape), data)
                        .map_err(|e| NetError::VersionMismatch(e.to_string()))?;
                    set.push(pname, arr);
                }
                sections.insert(name, set);
            }
        }
        Ok(CheckpointReader {
            config: header.config,
            params_version: header.params_version,
            meta: header.meta,
            sections,
            scalar_sections,
        })
    }

    pub fn take_section(&mut self, name: &str) -> Result<ParamSet<f32>, NetError> {
        self.sections
            .remove(name)
            .ok_or_else(|| NetError::VersionMismatch(format!("missing section {name}")))
    }
}

/// Check a loaded collection against the shapes the config dictates.
fn check_section(
    name: &str,
    set: &ParamSet<f32>,
    specs: &[ParamSpec],
) -> Result<(), NetError> {
    if set.len() != specs.len() {
        return Err(NetError::VersionMismatch(format!(
            "section {name} holds {} blobs, config dictates {}",
            set.len(),
            specs.len()
        )));
    }
    for ((pname, value), spec) in set.iter().zip(specs) {
        if pname != spec.name {
            return Err(NetError::VersionMismatch(format!(
                "section {name}: blob {pname} where {} expected",
                spec.name
            )));
        }
        if value.shape() != spec.shape.as_slice() {
            return Err(NetError::VersionMismatch(format!(
                "section {name}: blob {pname} is {:?}, config dictates {:?}",
                value.shape(),
                spec.shape
            )));
        }
    }
    if !set.all_finite() {
        return Err(NetError::NonFinite(format!("section {name}")));
    }
    Ok(())
}

pub(crate) fn validate_model_sections(
    config: &NetConfig,
    model: &ModelParams<f32>,
) -> Result<(), NetError> {
    check_section("extractor", &model.extractor, &extractor_specs(config))?;
    check_section("depth_gen", &model.depth_gen, &depth_gen_specs(config))?;
    check_section("seg_gen", &model.seg_gen, &seg_gen_specs(config))?;
    check_section(
        "discriminator",
        &model.discriminator,
        &discriminator_specs(config),
    )?;
    Ok(())
}

/// Save model parameters alone (no optimizer state).
pub fn save_model(params: &ModelParams<f32>, path: &Path) -> Result<(), NetError> {
    let mut w = CheckpointWriter::create(
        path,
        &params.config,
        params.version,
        BTreeMap::new(),
        4,
    )?;
    for (name, set) in params.collections() {
        w.write_section(name, set)?;
    }
    w.finish()
}

/// Load model parameters, validating shapes against the stored config.
pub fn load_model(path: &Path) -> Result<ModelParams<f32>, NetError> {
    let mut reader = CheckpointReader::open(path)?;
    let config = reader.config.clone();
    config.validate()?;
    let model = ModelParams {
        extractor: reader.take_section("extractor")?,
        depth_gen: reader.take_section("depth_gen")?,
        seg_gen: reader.take_section("seg_gen")?,
        discriminator: reader.take_section("discriminator")?,
        config: config.clone(),
        version: reader.params_version,
    };
    validate_model_sections(&config, &model)?;
    Ok(model)
}
