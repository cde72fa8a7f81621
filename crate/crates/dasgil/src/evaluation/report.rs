use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::write_rgb8;

use super::metrics::PrecisionBuckets;
use super::plot::render_line_plot;
use super::EvalError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Buckets {
    pub high: f64,
    pub medium: f64,
    pub coarse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecallAtN {
    pub n: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RecallAtD {
    pub d_m: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct ReportMeta {
    pub checkpoint_digest: String,
    pub metric: String,
    pub layers: Vec<usize>,
    pub dataset_digest: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// Localization evaluation outcome: precision buckets (percent), the two
/// recall curves (fractions), and run metadata.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub buckets: Buckets,
    pub recall_at_n: Vec<RecallAtN>,
    pub top1_recall_at_d: Vec<RecallAtD>,
    pub meta: ReportMeta,
}

/// 15 m through 50 m in 5 m steps.
pub fn default_top1_thresholds() -> Vec<f64> {
    (3..=10).map(|k| k as f64 * 5.0).collect()
}

impl EvalReport {
    pub fn new(
        buckets: PrecisionBuckets,
        recall_at_n: Vec<(usize, f64)>,
        top1_recall_at_d: Vec<(f64, f64)>,
        meta: ReportMeta,
    ) -> Self {
        EvalReport {
            buckets: Buckets {
                high: buckets.high,
                medium: buckets.medium,
                coarse: buckets.coarse,
            },
            recall_at_n: recall_at_n
                .into_iter()
                .map(|(n, recall)| RecallAtN { n, recall })
                .collect(),
            top1_recall_at_d: top1_recall_at_d
                .into_iter()
                .map(|(d_m, recall)| RecallAtD { d_m, recall })
                .collect(),
            meta,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let fail = |m: String| Err(EvalError::InvalidReport(m));
        let in_range = |v: f64| (0.0..=100.0).contains(&v);
        for (name, v) in [
            ("buckets.high", self.buckets.high),
            ("buckets.medium", self.buckets.medium),
            ("buckets.coarse", self.buckets.coarse),
        ] {
            if !in_range(v) {
                return fail(format!("{name} = {v} outside [0, 100]"));
            }
        }
        if !(self.buckets.high <= self.buckets.medium
            && self.buckets.medium <= self.buckets.coarse)
        {
            return fail("buckets are not cumulative".into());
        }
        for w in self.recall_at_n.windows(2) {
            if w[1].n <= w[0].n {
                return fail("recall_at_n Ns must increase".into());
            }
            if w[1].recall < w[0].recall {
                return fail(format!(
                    "recall@{} = {} decreases below recall@{} = {}",
                    w[1].n, w[1].recall, w[0].n, w[0].recall
                ));
            }
        }
        for w in self.top1_recall_at_d.windows(2) {
            if w[1].d_m <= w[0].d_m {
                return fail("top1_recall_at_d thresholds must increase".into());
            }
            if w[1].recall < w[0].recall {
                return fail("top1 recall must be nondecreasing in D".into());
            }
        }
        for point in self.recall_at_n.iter().map(|r| r.recall).chain(
            self.top1_recall_at_d.iter().map(|r| r.recall),
        ) {
            if !in_range(point) {
                return fail(format!("recall {point} outside [0, 100]"));
            }
        }
        Ok(())
    }
}

/// Write a validated report as JSON; with `plots`, also render the two
/// recall curves as PNG files next to it.
pub fn emit_report(report: &EvalReport, path: &Path, plots: bool) -> Result<(), EvalError> {
    report.validate()?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_vec_pretty(report)
        .map_err(|e| EvalError::InvalidReport(e.to_string()))?;
    std::fs::write(path, json)?;
    if plots {
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let recall_points: Vec<(f64, f64)> = report
            .recall_at_n
            .iter()
            .map(|r| (r.n as f64, r.recall))
            .collect();
        write_rgb8(
            &dir.join(format!("{stem}_recall_at_n.png")),
            &render_line_plot(&recall_points),
        )?;
        let top1_points: Vec<(f64, f64)> = report
            .top1_recall_at_d
            .iter()
            .map(|r| (r.d_m, r.recall))
            .collect();
        write_rgb8(
            &dir.join(format!("{stem}_top1_recall_at_d.png")),
            &render_line_plot(&top1_points),
        )?;
    }
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EvalReport, EvalError> {
    let bytes = std::fs::read(path)?;
    serde_json::from_slice(&bytes).map_err(|e| EvalError::InvalidReport(e.to_string()))
}
