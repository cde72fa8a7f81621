//! End-to-end workflows gluing data, retrieval, and evaluation together:
//! build a feature database over one record subset, run every query of
//! another against it, and score the outcome as a localization report.

use crate::data::{read_rgb8, DatasetManifest, Domain, SampleRecord};
use crate::evaluation::{
    pose_error, precision_buckets, recall_at_n, top1_recall_at_d, EvalError, EvalReport,
    RankedQuery, ReportMeta,
};
use crate::net::ModelParams;
use crate::retrieval::{
    build_database, extract_descriptor, query, FeatureDatabase, Metric, QueryOptions,
    RetrievalError,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Data(#[from] crate::data::DataError),
    #[error("{0}")]
    Invalid(String),
}

/// Evaluation-side knobs, all expressed in world units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    pub recall_ns: Vec<usize>,
    pub radius_m: f64,
    pub top1_thresholds_m: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    10
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            recall_ns: vec![1, 2, 5, 10],
            radius_m: 25.0,
            top1_thresholds_m: crate::evaluation::default_top1_thresholds(),
            k: 10,
        }
    }
}

/// Build the database over the manifest's virtual records.
pub fn build_virtual_database(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    checkpoint_digest: [u8; 32],
) -> Result<FeatureDatabase, PipelineError> {
    let records = manifest.domain_records(Domain::Virtual);
    if records.is_empty() {
        return Err(PipelineError::Invalid("no virtual records".into()));
    }
    Ok(build_database(
        params,
        manifest,
        &records,
        &params.config.retrieval_layers,
        checkpoint_digest,
    )?)
}

/// Outcome of one evaluated query: its record id plus the ranked database
/// ids it retrieved.
#[derive(Debug, Clone)]
pub struct QueryTrace {
    pub query_id: String,
    pub ranked_ids: Vec<String>,
}

/// Run every query record against the database and score localization:
/// the top-1 retrieved pose stands in as the estimated pose.
pub fn evaluate_queries(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    db: &FeatureDatabase,
    queries: &[&SampleRecord],
    metric: Metric,
    eval: &EvalConfig,
    meta: ReportMeta,
) -> Result<(EvalReport, Vec<QueryTrace>), PipelineError> {
    if queries.is_empty() {
        return Err(PipelineError::Eval(EvalError::EmptyQuerySet));
    }
    let k = eval.k.max(eval.recall_ns.iter().copied().max().unwrap_or(1));
    let options = QueryOptions::new(metric, k);
    let mut ranked_queries = Vec::with_capacity(queries.len());
    let mut errors = Vec::with_capacity(queries.len());
    let mut traces = Vec::with_capacity(queries.len());
    for record in queries {
        let image = read_rgb8(&manifest.resolve(&record.image_path))?;
        let input = image.to_net_input::<f32>();
        let descriptor =
            extract_descriptor(params, &record.id, &input, &params.config.retrieval_layers)?;
        let result = query(db, &descriptor, &options)?;
        let ranked_ids: Vec<String> = result.entries.iter().map(|(id, _)| id.clone()).collect();
        let candidate_positions: Vec<[f64; 3]> = ranked_ids
            .iter()
            .map(|id| {
                let rec = manifest
                    .get(id)
                    .ok_or_else(|| PipelineError::Invalid(format!("db id {id} not in manifest")))?;
                Ok([rec.pose.x, rec.pose.y, rec.pose.z])
            })
            .collect::<Result<_, PipelineError>>()?;
        let top1 = manifest
            .get(&ranked_ids[0])
            .expect("checked above");
        errors.push(pose_error(&top1.pose, &record.pose)?);
        ranked_queries.push(RankedQuery {
            gt_position: [record.pose.x, record.pose.y, record.pose.z],
            candidate_positions,
        });
        traces.push(QueryTrace {
            query_id: record.id.clone(),
            ranked_ids,
        });
    }
    let buckets = precision_buckets(&errors)?;
    let recall = recall_at_n(&ranked_queries, &eval.recall_ns, eval.radius_m)?;
    let top1 = top1_recall_at_d(&ranked_queries, &eval.top1_thresholds_m)?;
    Ok((EvalReport::new(buckets, recall, top1, meta), traces))
}

/// Cross-domain localization: real queries against the virtual database.
pub fn evaluate_cross_domain(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    db: &FeatureDatabase,
    metric: Metric,
    eval: &EvalConfig,
    meta: ReportMeta,
) -> Result<(EvalReport, Vec<QueryTrace>), PipelineError> {
    let queries = manifest.domain_records(Domain::Real);
    evaluate_queries(params, manifest, db, &queries, metric, eval, meta)
}

/// Recall@1 of real queries against the virtual database: the fraction
/// whose best match lies within `radius_m` of the query's true position.
pub fn cross_domain_recall_at_1(
    params: &ModelParams<f32>,
    manifest: &DatasetManifest,
    metric: Metric,
    radius_m: f64,
) -> Result<f64, PipelineError> {
    let db = build_virtual_database(params, manifest, [0u8; 32])?;
    let eval = EvalConfig {
        recall_ns: vec![1],
        radius_m,
        top1_thresholds_m: vec![radius_m],
        k: 1,
    };
    let (report, _) = evaluate_cross_domain(
        params,
        manifest,
        &db,
        metric,
        &eval,
        ReportMeta::default(),
    )?;
    Ok(report.recall_at_n[0].recall)
}
