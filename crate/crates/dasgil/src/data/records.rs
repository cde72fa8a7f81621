use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Virtual,
    Real,
}

/// Camera pose: position in meters plus a unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qw: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
}

impl Pose {
    pub fn at(x: f64, y: f64, z: f64) -> Self {
        Pose {
            x,
            y,
            z,
            qw: 1.0,
            qx: 0.0,
            qy: 0.0,
            qz: 0.0,
        }
    }

    pub fn quaternion_norm(&self) -> f64 {
        (self.qw * self.qw + self.qx * self.qx + self.qy * self.qy + self.qz * self.qz).sqrt()
    }

    pub fn position_distance(&self, other: &Pose) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// One image with optional ground truth, pose, and sampling metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub domain: Domain,
    pub sequence: String,
    pub frame: u64,
    pub environment: String,
    pub camera_angle_deg: f64,
    pub image_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seg_path: Option<PathBuf>,
    pub depth_scale: f64,
    pub pose: Pose,
}

impl SampleRecord {
    fn check(&self) -> Result<(), String> {
        if self.domain == Domain::Virtual && (self.depth_path.is_none() || self.seg_path.is_none())
        {
            return Err(format!("virtual record {} lacks ground truth", self.id));
        }
        if (self.pose.quaternion_norm() - 1.0).abs() > 1e-6 {
            return Err(format!(
                "record {}: quaternion norm {} not unit",
                self.id,
                self.pose.quaternion_norm()
            ));
        }
        if self.depth_scale <= 0.0 {
            return Err(format!("record {}: depth_scale must be positive", self.id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ManifestHeader {
    class_count: usize,
    class_names: Vec<String>,
}

/// An ordered dataset with its class-id space. `root` is where the manifest
/// file lives; relative paths in records resolve against it.
#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub class_count: usize,
    pub class_names: Vec<String>,
    pub root: Option<PathBuf>,
}

impl DatasetManifest {
    pub fn new(
        records: Vec<SampleRecord>,
        class_count: usize,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let mut seen = BTreeSet::new();
        for rec in &records {
            if !seen.insert(rec.id.clone()) {
                return Err(DataError::DuplicateId(rec.id.clone()));
            }
            if rec.domain == Domain::Virtual
                && (rec.depth_path.is_none() || rec.seg_path.is_none())
            {
                return Err(DataError::VirtualMissingGroundTruth(rec.id.clone()));
            }
        }
        Ok(DatasetManifest {
            records,
            class_count,
            class_names,
            root: None,
        })
    }

    /// Resolve a record path against the manifest location.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            match &self.root {
                Some(root) => root.join(path),
                None => path.to_path_buf(),
            }
        }
    }

    pub fn get(&self, id: &str) -> Option<&SampleRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn domain_records(&self, domain: Domain) -> Vec<&SampleRecord> {
        self.records.iter().filter(|r| r.domain == domain).collect()
    }
}

/// Load a JSONL manifest: a header line carrying the class-id space, then
/// one record per line. Record order is preserved.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let header: ManifestHeader = match lines.next() {
        Some((_, Ok(line))) => serde_json::from_str(&line).map_err(|e| {
            DataError::MalformedRecord {
                line: 1,
                message: format!("header: {e}"),
            }
        })?,
        Some((_, Err(e))) => return Err(DataError::Io(e)),
        None => {
            return Err(DataError::MalformedRecord {
                line: 1,
                message: "empty manifest".into(),
            })
        }
    };
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| DataError::MalformedRecord {
                line: lineno,
                message: e.to_string(),
            })?;
        if !seen.insert(record.id.clone()) {
            return Err(DataError::DuplicateId(record.id.clone()));
        }
        if record.domain == Domain::Virtual
            && (record.depth_path.is_none() || record.seg_path.is_none())
        {
            return Err(DataError::VirtualMissingGroundTruth(record.id.clone()));
        }
        record.check().map_err(|message| DataError::MalformedRecord {
            line: lineno,
            message,
        })?;
        records.push(record);
    }
    Ok(DatasetManifest {
        records,
        class_count: header.class_count,
        class_names: header.class_names,
        root: path.parent().map(|p| p.to_path_buf()),
    })
}

/// Write a manifest in the JSONL layout `load_manifest` reads.
pub fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    let header = ManifestHeader {
        class_count: manifest.class_count,
        class_names: manifest.class_names.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(io_err)?;
    w.write_all(b"\n")?;
    for rec in &manifest.records {
        serde_json::to_writer(&mut w, rec).map_err(io_err)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: serde_json::Error) -> DataError {
    DataError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, e))
}
