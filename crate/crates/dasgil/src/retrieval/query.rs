use serde::{Deserialize, Serialize};

use super::database::FeatureDatabase;
use super::descriptor::Descriptor;
use super::RetrievalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L1,
    Cosine,
}

#[derive(Debug, Clone, Copy)]
pub struct QueryOptions {
    pub metric: Metric,
    pub k: usize,
    /// Scale every dimension by the inverse of its standard deviation over
    /// the database before the L1 sum.
    pub l1_dimension_normalized: bool,
    /// Cosine over the concatenated vector instead of the per-layer sum.
    pub cosine_concatenated: bool,
}

impl QueryOptions {
    pub fn new(metric: Metric, k: usize) -> Self {
        QueryOptions {
            metric,
            k,
            l1_dimension_normalized: false,
            cosine_concatenated: false,
        }
    }
}

/// Ranked retrieval outcome: (database id, aggregate distance or
/// similarity), best first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryResult {
    pub metric: Metric,
    pub entries: Vec<(String, f64)>,
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        dot += *x as f64 * *y as f64;
        na += *x as f64 * *x as f64;
        nb += *y as f64 * *y as f64;
    }
    if na == 0.0 || nb == 0.0 {
        // a zero-vector layer contributes nothing
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Rank database entries against a query descriptor. L1 sums raw absolute
/// differences across all layers; cosine sums per-layer similarities.
/// Ties keep database insertion order; the ranking is truncated to `k`.
pub fn query(
    db: &FeatureDatabase,
    descriptor: &Descriptor,
    options: &QueryOptions,
) -> Result<QueryResult, RetrievalError> {
    if db.is_empty() {
        return Err(RetrievalError::EmptyDatabase);
    }
    if descriptor.layers != db.layers {
        return Err(RetrievalError::LayerMismatch(format!(
            "query layers {:?} vs database layers {:?}",
            descriptor.layers, db.layers
        )));
    }
    if descriptor.layer_dims() != db.layer_dims {
        return Err(RetrievalError::LayerMismatch(format!(
            "query dims {:?} vs database dims {:?}",
            descriptor.layer_dims(),
            db.layer_dims
        )));
    }
    let q = descriptor.concatenated();
    let n = db.len();
    let dim_scale = if options.metric == Metric::L1 && options.l1_dimension_normalized {
        Some(dimension_scales(db))
    } else {
        None
    };
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(n);
    for row in 0..n {
        let entry = db.data.row(row);
        let entry = entry.as_slice().expect("row-major database");
        let score = match options.metric {
            Metric::L1 => {
                let mut acc = 0.0f64;
                match &dim_scale {
                    Some(scales) => {
                        for ((a, b), s) in q.iter().zip(entry).zip(scales) {
                            acc += ((*a as f64) - (*b as f64)).abs() * s;
                        }
                    }
                    None => {
                        for (a, b) in q.iter().zip(entry) {
                            acc += ((*a as f64) - (*b as f64)).abs();
                        }
                    }
                }
                acc
            }
            Metric::Cosine => {
                if options.cosine_concatenated {
                    cosine(&q, entry)
                } else {
                    let mut acc = 0.0f64;
                    let mut offset = 0;
                    for dim in &db.layer_dims {
                        acc += cosine(&q[offset..offset + dim], &entry[offset..offset + dim]);
                        offset += dim;
                    }
                    acc
                }
            }
        };
        scored.push((row, score));
    }
    // stable sort keeps insertion order on ties
    match options.metric {
        Metric::L1 => scored.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances")),
        Metric::Cosine => scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite similarities")),
    }
    scored.truncate(options.k.min(n));
    Ok(QueryResult {
        metric: options.metric,
        entries: scored
            .into_iter()
            .map(|(row, s)| (db.ids[row].clone(), s))
            .collect(),
    })
}

/// Inverse per-dimension standard deviation over the database entries.
fn dimension_scales(db: &FeatureDatabase) -> Vec<f64> {
    let n = db.len() as f64;
    let dim = db.total_dim();
    let mut scales = vec![0.0f64; dim];
    for col in 0..dim {
        let mut mean = 0.0f64;
        for row in 0..db.len() {
            mean += db.data[[row, col]] as f64;
        }
        mean /= n;
        let mut var = 0.0f64;
        for row in 0..db.len() {
            let d = db.data[[row, col]] as f64 - mean;
            var += d * d;
        }
        var /= n;
        scales[col] = 1.0 / (var.sqrt() + 1e-12);
    }
    scales
}
