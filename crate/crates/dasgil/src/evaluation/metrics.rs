use super::pose::PoseError;
use super::EvalError;

/// Cumulative (translation m, rotation deg) precision thresholds:
/// high, medium, coarse.
pub const BUCKET_THRESHOLDS: [(f64, f64); 3] = [(0.25, 2.0), (0.5, 5.0), (5.0, 10.0)];

/// Percentage of queries within each cumulative precision bucket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionBuckets {
    pub high: f64,
    pub medium: f64,
    pub coarse: f64,
}

pub fn precision_buckets(errors: &[PoseError]) -> Result<PrecisionBuckets, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let total = errors.len() as f64;
    let pct = |t: f64, r: f64| {
        let hits = errors
            .iter()
            .filter(|e| e.translation_m <= t && e.rotation_deg <= r)
            .count();
        hits as f64 / total * 100.0
    };
    Ok(PrecisionBuckets {
        high: pct(BUCKET_THRESHOLDS[0].0, BUCKET_THRESHOLDS[0].1),
        medium: pct(BUCKET_THRESHOLDS[1].0, BUCKET_THRESHOLDS[1].1),
        coarse: pct(BUCKET_THRESHOLDS[2].0, BUCKET_THRESHOLDS[2].1),
    })
}

/// One query's ground-truth position and its ranked candidate positions.
#[derive(Debug, Clone)]
pub struct RankedQuery {
    pub gt_position: [f64; 3],
    pub candidate_positions: Vec<[f64; 3]>,
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (dx, dy, dz) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Fraction of queries whose top-N candidates include one within `radius_m`
/// of the ground truth, for each N.
pub fn recall_at_n(
    queries: &[RankedQuery],
    ns: &[usize],
    radius_m: f64,
) -> Result<Vec<(usize, f64)>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let total = queries.len() as f64;
    Ok(ns
        .iter()
        .map(|&n| {
            let hits = queries
                .iter()
                .filter(|q| {
                    q.candidate_positions
                        .iter()
                        .take(n)
                        .any(|c| dist(c, &q.gt_position) <= radius_m)
                })
                .count();
            (n, hits as f64 / total)
        })
        .collect())
}

/// Fraction of queries whose single best candidate lies within D of the
/// ground truth, for each threshold D.
pub fn top1_recall_at_d(
    queries: &[RankedQuery],
    thresholds_m: &[f64],
) -> Result<Vec<(f64, f64)>, EvalError> {
    if queries.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }
    let total = queries.len() as f64;
    Ok(thresholds_m
        .iter()
        .map(|&d| {
            let hits = queries
                .iter()
                .filter(|q| {
                    q.candidate_positions
                        .first()
                        .is_some_and(|c| dist(c, &q.gt_position) <= d)
                })
                .count();
            (d, hits as f64 / total)
        })
        .collect())
}
