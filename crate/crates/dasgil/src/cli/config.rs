use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::net::NetConfig;
use crate::pipeline::EvalConfig;
use crate::retrieval::Metric;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSection {
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalSection {
    pub metric: Metric,
    #[serde(default)]
    pub l1_dimension_normalized: bool,
    #[serde(default)]
    pub cosine_concatenated: bool,
}

/// One document holding everything a run needs: architecture, training
/// hyperparameters and loss weights, dataset location, retrieval metric,
/// and evaluation options.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub net: NetConfig,
    pub train: TrainConfig,
    pub data: DataSection,
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.net.validate().context("net section")?;
        self.train
            .validate(&self.net.triplet_layers)
            .context("train section")?;
        if self.eval.recall_ns.is_empty() {
            bail!("eval.recall_ns must not be empty");
        }
        if !self.eval.recall_ns.windows(2).all(|w| w[0] < w[1]) {
            bail!("eval.recall_ns must strictly increase");
        }
        if self.eval.top1_thresholds_m.is_empty() {
            bail!("eval.top1_thresholds_m must not be empty");
        }
        if !self
            .eval
            .top1_thresholds_m
            .windows(2)
            .all(|w| w[0] < w[1])
        {
            bail!("eval.top1_thresholds_m must strictly increase");
        }
        if self.eval.radius_m <= 0.0 {
            bail!("eval.radius_m must be positive");
        }
        Ok(())
    }
}

/// Parse the value side of a `--set key=value` override: JSON when it
/// parses, bare string otherwise.
fn parse_override_value(raw: &str) -> serde_json::Value {
    serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()))
}

/// Apply one dotted-path override to a JSON document, creating objects on
/// the way as needed.
fn apply_override(doc: &mut serde_json::Value, assignment: &str) -> Result<()> {
    let (path, raw_value) = assignment
        .split_once('=')
        .with_context(|| format!("--set expects key=value, got {assignment:?}"))?;
    let mut cursor = doc;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        bail!("--set path {path:?} has an empty segment");
    }
    for (idx, segment) in segments.iter().enumerate() {
        let last = idx == segments.len() - 1;
        let obj = cursor
            .as_object_mut()
            .with_context(|| format!("--set path {path:?}: {segment:?} is not an object"))?;
        if last {
            obj.insert(segment.to_string(), parse_override_value(raw_value));
            return Ok(());
        }
        cursor = obj
            .entry(segment.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}

/// Load a run config, apply `--set` overrides, and validate. Nothing is
/// written anywhere on failure.
pub fn load_run_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut doc: serde_json::Value =
        serde_json::from_slice(&bytes).context("config is not valid JSON")?;
    for assignment in overrides {
        apply_override(&mut doc, assignment)?;
    }
    let config: RunConfig = serde_json::from_value(doc).context("config schema")?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::DiscriminatorKind;

    fn demo() -> RunConfig {
        let net = NetConfig::toy_default(5, DiscriminatorKind::Flatten);
        let train = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 7);
        RunConfig {
            net,
            train,
            data: DataSection {
                manifest: PathBuf::from("data/manifest.jsonl"),
            },
            retrieval: RetrievalSection {
                metric: Metric::L1,
                l1_dimension_normalized: false,
                cosine_concatenated: false,
            },
            eval: EvalConfig::default(),
        }
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, serde_json::to_vec(&demo()).unwrap()).unwrap();
        let cfg = load_run_config(
            &path,
            &[
                "train.learning_rate=0.001".into(),
                "net.class_count=7".into(),
                "retrieval.metric=\"cosine\"".into(),
                "retrieval.metric=cosine".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.learning_rate, 0.001);
        assert_eq!(cfg.net.class_count, 7);
        assert_eq!(cfg.retrieval.metric, Metric::Cosine);
    }

    #[test]
    fn invalid_override_value_is_rejected_by_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, serde_json::to_vec(&demo()).unwrap()).unwrap();
        assert!(load_run_config(&path, &["train.batch_size=0".into()]).is_err());
        assert!(load_run_config(&path, &["net.encoder_layers=9".into()]).is_err());
        assert!(load_run_config(&path, &["nonsense".into()]).is_err());
    }
}
