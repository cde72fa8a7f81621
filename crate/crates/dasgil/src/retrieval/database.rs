use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::data::{read_rgb8, DatasetManifest, SampleRecord};
use crate::net::ModelParams;

use super::descriptor::{extract_descriptor, Descriptor};
use super::RetrievalError;
use crate::byteio::*;

pub const DATABASE_MAGIC: &[u8; 4] = b"DGFD";
pub const DATABASE_VERSION: u16 = 1;

/// Pre-extracted multi-scale descriptors for a record subset, with the
/// digest of the checkpoint that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDatabase {
    pub layers: Vec<usize>,
    pub layer_dims: Vec<usize>,
    pub ids: Vec<String>,
    /// Row-major (entries, total_dim).
    pub data: Array2<f32>,
    pub checkpoint_digest: [u8; 32],
}

impl FeatureDatabase {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.layer_dims.iter().sum()
    }

    /// Does a query-side digest match the one this database was built from?
    pub fn digest_matches(&self, digest: &[u8; 32]) -> bool {
        &self.checkpoint_digest == digest
    }
}

/// SHA-256 of a file's bytes; ties databases to the checkpoint that
/// produced them.
pub fn digest_file(path: &Path) -> Result<[u8; 32], RetrievalError> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().into())
}

/// Extract one descriptor per record, order preserved.
pub fn build_database(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    records: &[&SampleRecord],
    retrieval_layers: &[usize],
    checkpoint_digest: [u8; 32],
) -> Result<FeatureDatabase, RetrievalError> {
    let mut descriptors: Vec<Descriptor> = Vec::with_capacity(records.len());
    for record in records {
        let image = read_rgb8(&manifest.resolve(&record.image_path))?;
        let input = image.to_net_input::<f32>();
        descriptors.push(extract_descriptor(params, &record.id, &input, retrieval_layers)?);
    }
    database_from_descriptors(retrieval_layers, descriptors, checkpoint_digest)
}

/// Assemble a database from already-extracted descriptors.
pub fn database_from_descriptors(
    retrieval_layers: &[usize],
    descriptors: Vec<Descriptor>,
    checkpoint_digest: [u8; 32],
) -> Result<FeatureDatabase, RetrievalError> {
    if descriptors.is_empty() {
        return Err(RetrievalError::EmptyDatabase);
    }
    let layer_dims = descriptors[0].layer_dims();
    let total_dim: usize = layer_dims.iter().sum();
    let mut ids = Vec::with_capacity(descriptors.len());
    let mut data = Array2::<f32>::zeros((descriptors.len(), total_dim));
    for (row, desc) in descriptors.iter().enumerate() {
        if desc.layers != retrieval_layers || desc.layer_dims() != layer_dims {
            return Err(RetrievalError::LayerMismatch(format!(
                "descriptor {} disagrees with database layout",
                desc.id
            )));
        }
        ids.push(desc.id.clone());
        for (col, v) in desc.concatenated().into_iter().enumerate() {
            data[[row, col]] = v;
        }
    }
    Ok(FeatureDatabase {
        layers: retrieval_layers.to_vec(),
        layer_dims,
        ids,
        data,
        checkpoint_digest,
    })
}

pub fn save_database(db: &FeatureDatabase, path: &Path) -> Result<(), RetrievalError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DATABASE_MAGIC)?;
    write_u16(&mut w, DATABASE_VERSION)?;
    w.write_all(&db.checkpoint_digest)?;
    write_u32(&mut w, db.layers.len() as u32)?;
    for (layer, dim) in db.layers.iter().zip(&db.layer_dims) {
        write_u32(&mut w, *layer as u32)?;
        write_u32(&mut w, *dim as u32)?;
    }
    write_u32(&mut w, db.ids.len() as u32)?;
    for id in &db.ids {
        write_string(&mut w, id)?;
    }
    for v in db.data.iter() {
        write_f32(&mut w, *v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_database(path: &Path) -> Result<FeatureDatabase, RetrievalError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != DATABASE_MAGIC {
        return Err(RetrievalError::VersionMismatch(format!(
            "bad magic {magic:?}, not a feature database"
        )));
    }
    let version = read_u16(&mut r)?;
    if version != DATABASE_VERSION {
        return Err(RetrievalError::VersionMismatch(format!(
            "database version {version}, expected {DATABASE_VERSION}"
        )));
    }
    let mut digest = [0u8; 32];
    r.read_exact(&mut digest)?;
    let layer_count = read_u32(&mut r)? as usize;
    if layer_count > 64 {
        return Err(RetrievalError::VersionMismatch(format!(
            "implausible layer count {layer_count}"
        )));
    }
    let mut layers = Vec::with_capacity(layer_count);
    let mut layer_dims = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        layers.push(read_u32(&mut r)? as usize);
        layer_dims.push(read_u32(&mut r)? as usize);
    }
    let entry_count = read_u32(&mut r)? as usize;
    let mut ids = Vec::with_capacity(entry_count);
    for _ in 0..entry_count {
        ids.push(read_string(&mut r)?);
    }
    let total_dim: usize = layer_dims.iter().sum();
    let mut data = Array2::<f32>::zeros((entry_count, total_dim));
    for row in 0..entry_count {
        for col in 0..total_dim {
            data[[row, col]] = read_f32(&mut r)?;
        }
    }
    Ok(FeatureDatabase {
        layers,
        layer_dims,
        ids,
        data,
        checkpoint_digest: digest,
    })
}
