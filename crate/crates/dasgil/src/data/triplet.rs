use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::records::{DatasetManifest, Domain, SampleRecord};
use super::DataError;

/// One anchor/positive/negative triple, by record id. All three are
/// virtual-domain records.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletSpec {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
}

const MAX_FRAME_GAP: u64 = 5;
const MAX_ANGLE_GAP_DEG: f64 = 30.0;

fn frame_gap(a: &SampleRecord, b: &SampleRecord) -> u64 {
    a.frame.abs_diff(b.frame)
}

/// Positive pairing: same sequence within the frame interval, a different
/// environment or camera angle, and an angle change small enough to keep
/// the views similar.
pub fn is_positive_pair(anchor: &SampleRecord, candidate: &SampleRecord) -> bool {
    anchor.id != candidate.id
        && anchor.domain == Domain::Virtual
        && candidate.domain == Domain::Virtual
        && anchor.sequence == candidate.sequence
        && frame_gap(anchor, candidate) <= MAX_FRAME_GAP
        && (anchor.environment != candidate.environment
            || anchor.camera_angle_deg != candidate.camera_angle_deg)
        && (anchor.camera_angle_deg - candidate.camera_angle_deg).abs() <= MAX_ANGLE_GAP_DEG
}

/// Negative eligibility: a different scene, read as a different sequence or
/// a frame gap beyond the positive interval.
pub fn is_negative_candidate(anchor: &SampleRecord, candidate: &SampleRecord) -> bool {
    candidate.domain == Domain::Virtual
        && candidate.id != anchor.id
        && (anchor.sequence != candidate.sequence || frame_gap(anchor, candidate) > MAX_FRAME_GAP)
}

impl TripletSpec {
    /// Re-check every invariant against the manifest.
    pub fn validate(&self, manifest: &DatasetManifest) -> Result<(), String> {
        let get = |id: &str| {
            manifest
                .get(id)
                .ok_or_else(|| format!("id {id} not in manifest"))
        };
        let a = get(&self.anchor)?;
        let p = get(&self.positive)?;
        let n = get(&self.negative)?;
        if self.anchor == self.positive
            || self.anchor == self.negative
            || self.positive == self.negative
        {
            return Err("ids not distinct".into());
        }
        for r in [a, p, n] {
            if r.domain != Domain::Virtual {
                return Err(format!("{} is not virtual", r.id));
            }
        }
        if !is_positive_pair(a, p) {
            return Err(format!("{} is not a positive for {}", p.id, a.id));
        }
        if !is_negative_candidate(a, n) {
            return Err(format!("{} is not a negative for {}", n.id, a.id));
        }
        Ok(())
    }
}

fn positives_of<'m>(
    manifest: &'m DatasetManifest,
    anchor: &SampleRecord,
) -> Vec<&'m SampleRecord> {
    manifest
        .records
        .iter()
        .filter(|r| is_positive_pair(anchor, r))
        .collect()
}

fn negatives_of<'m>(
    manifest: &'m DatasetManifest,
    anchor: &SampleRecord,
) -> Vec<&'m SampleRecord> {
    manifest
        .records
        .iter()
        .filter(|r| is_negative_candidate(anchor, r))
        .collect()
}

/// Anchors that admit a full triplet.
pub fn anchor_candidates(manifest: &DatasetManifest) -> Vec<&SampleRecord> {
    manifest
        .records
        .iter()
        .filter(|r| r.domain == Domain::Virtual)
        .filter(|a| {
            manifest.records.iter().any(|r| is_positive_pair(a, r))
                && manifest.records.iter().any(|r| is_negative_candidate(a, r))
        })
        .collect()
}

/// Sample positive and negative for a fixed anchor, uniformly over the
/// eligible records.
pub fn sample_triplet_for_anchor(
    manifest: &DatasetManifest,
    anchor_id: &str,
    rng: &mut ChaCha8Rng,
) -> Result<TripletSpec, DataError> {
    let anchor = manifest
        .get(anchor_id)
        .ok_or_else(|| DataError::NoValidPositive)?;
    let positives = positives_of(manifest, anchor);
    if positives.is_empty() {
        return Err(DataError::NoValidPositive);
    }
    let negatives = negatives_of(manifest, anchor);
    if negatives.is_empty() {
        return Err(DataError::NoValidNegative);
    }
    let p = positives[rng.gen_range(0..positives.len())];
    let n = negatives[rng.gen_range(0..negatives.len())];
    Ok(TripletSpec {
        anchor: anchor.id.clone(),
        positive: p.id.clone(),
        negative: n.id.clone(),
    })
}

/// Sample a full triplet: anchor uniform over the candidates that admit
/// one, then positive and negative uniform for that anchor.
pub fn sample_triplet(
    manifest: &DatasetManifest,
    rng: &mut ChaCha8Rng,
) -> Result<TripletSpec, DataError> {
    let anchors = anchor_candidates(manifest);
    if anchors.is_empty() {
        return Err(DataError::NoValidPositive);
    }
    let anchor = anchors[rng.gen_range(0..anchors.len())];
    let anchor_id = anchor.id.clone();
    sample_triplet_for_anchor(manifest, &anchor_id, rng)
}
