//! Ablation harness: named variants that each toggle exactly one module
//! or loss of the full pipeline, trained under a shared seed on a shared
//! dataset and scored with the same evaluation protocol.

use std::path::Path;

use anyhow::{bail, Context, Result};

use crate::data::load_manifest;
use crate::evaluation::{emit_report, EvalReport, ReportMeta};
use crate::losses::LossWeights;
use crate::net::DiscriminatorKind;
use crate::pipeline::{build_virtual_database, evaluate_cross_domain};
use crate::retrieval::digest_file;
use crate::trainer::{save_train_checkpoint, train, StepLog};

use super::config::RunConfig;
use super::dataset_digest_hex;

/// Every named configuration of the comparison matrix: training-module
/// rows plus the retrieval-representation rows.
pub const ALL_VARIANTS: &[&str] = &[
    "depth-only",
    "seg-only",
    "no-gan",
    "single-fd",
    "multi-fd",
    "multi-cd",
    "single-triplet",
    "multi-triplet",
    "retrieval-single-layer",
    "retrieval-multi-layer",
];

fn clip(layer: usize, max: usize) -> usize {
    layer.min(max)
}

fn rebuild_margins(config: &mut RunConfig) {
    config.train.weights.margins = LossWeights::unit(&config.net.triplet_layers).margins;
}

/// Derive one variant from a base configuration. Each variant changes only
/// what its name says.
pub fn apply_variant(base: &RunConfig, name: &str) -> Result<RunConfig> {
    let mut cfg = base.clone();
    let layers = cfg.net.encoder_layers;
    let mid = clip(5, layers);
    match name {
        "depth-only" => {
            cfg.train.weights.lambda_s = 0.0;
        }
        "seg-only" => {
            cfg.train.weights.lambda_d = 0.0;
        }
        "no-gan" => {
            cfg.train.adversarial = false;
        }
        "single-fd" => {
            cfg.net.discriminator_kind = DiscriminatorKind::Flatten;
            cfg.net.discriminator_layers = vec![mid];
            cfg.net.retrieval_layers = vec![mid];
        }
        "multi-fd" => {
            cfg.net.discriminator_kind = DiscriminatorKind::Flatten;
            cfg.net.discriminator_layers = (1..=layers).collect();
        }
        "multi-cd" => {
            cfg.net.discriminator_kind = DiscriminatorKind::Cascade;
            cfg.net.discriminator_layers = (1..=layers).collect();
            cfg.net.retrieval_layers = vec![mid];
        }
        "single-triplet" => {
            cfg.net.triplet_layers = vec![mid];
            rebuild_margins(&mut cfg);
        }
        "multi-triplet" => {
            cfg.net.triplet_layers = (3..=6)
                .map(|l| clip(l, layers))
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .collect();
            rebuild_margins(&mut cfg);
        }
        "retrieval-single-layer" => {
            cfg.net.retrieval_layers = vec![mid];
        }
        "retrieval-multi-layer" => {
            // two mid layers; scaled down when the net is too shallow for 5 and 6
            cfg.net.retrieval_layers = if layers >= 6 {
                vec![5, 6]
            } else {
                vec![layers - 1, layers]
            };
        }
        other => bail!("unknown variant {other:?} (known: {ALL_VARIANTS:?})"),
    }
    cfg.validate()
        .with_context(|| format!("variant {name} produced an invalid config"))?;
    Ok(cfg)
}

pub struct VariantOutcome {
    pub name: String,
    pub report: EvalReport,
    pub logs: Vec<StepLog>,
}

/// Train, index, and evaluate one variant end-to-end.
pub fn run_variant(cfg: &RunConfig, name: &str, out_dir: &Path) -> Result<VariantOutcome> {
    let variant_dir = out_dir.join(name);
    std::fs::create_dir_all(&variant_dir)?;
    let manifest = load_manifest(&cfg.data.manifest)?;
    let mut train_cfg = cfg.train.clone();
    train_cfg.log_path = Some(variant_dir.join("trainlog.jsonl"));
    train_cfg.checkpoint_path = None;
    let (state, logs) = train(&manifest, &cfg.net, &train_cfg)?;
    let ckpt_path = variant_dir.join("checkpoint.dgck");
    save_train_checkpoint(&state, &ckpt_path)?;
    let digest = digest_file(&ckpt_path)?;
    let db = build_virtual_database(&state.params, &manifest, digest)?;
    let meta = ReportMeta {
        checkpoint_digest: hex(&digest),
        metric: format!("{:?}", cfg.retrieval.metric).to_lowercase(),
        layers: cfg.net.retrieval_layers.clone(),
        dataset_digest: dataset_digest_hex(&cfg.data.manifest)?,
        extra: [(
            "variant".to_string(),
            serde_json::Value::String(name.to_string()),
        )]
        .into_iter()
        .collect(),
    };
    let (report, _) = evaluate_cross_domain(
        &state.params,
        &manifest,
        &db,
        cfg.retrieval.metric,
        &cfg.eval,
        meta,
    )?;
    emit_report(&report, &variant_dir.join("report.json"), false)?;
    Ok(VariantOutcome {
        name: name.to_string(),
        report,
        logs,
    })
}

fn hex(digest: &[u8; 32]) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run a variant list under a shared seed and emit a side-by-side table.
pub fn run_ablation(
    base: &RunConfig,
    variants: &[String],
    out_dir: &Path,
) -> Result<Vec<VariantOutcome>> {
    // validate the whole matrix before writing anything
    let mut configs = Vec::new();
    for name in variants {
        configs.push((name.clone(), apply_variant(base, name)?));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut outcomes = Vec::new();
    for (name, cfg) in &configs {
        outcomes.push(run_variant(cfg, name, out_dir)?);
    }
    let mut table = String::from(
        "| variant | high % | medium % | coarse % | recall@1 | top-1 recall@max |\n|---|---|---|---|---|---|\n",
    );
    for o in &outcomes {
        let r1 = o
            .report
            .recall_at_n
            .first()
            .map(|r| r.recall)
            .unwrap_or(f64::NAN);
        let tmax = o
            .report
            .top1_recall_at_d
            .last()
            .map(|r| r.recall)
            .unwrap_or(f64::NAN);
        table.push_str(&format!(
            "| {} | {:.1} | {:.1} | {:.1} | {:.3} | {:.3} |\n",
            o.name,
            o.report.buckets.high,
            o.report.buckets.medium,
            o.report.buckets.coarse,
            r1,
            tmax
        ));
    }
    std::fs::write(out_dir.join("summary.md"), table)?;
    let json: Vec<serde_json::Value> = outcomes
        .iter()
        .map(|o| {
            serde_json::json!({
                "variant": o.name,
                "report": o.report,
            })
        })
        .collect();
    std::fs::write(
        out_dir.join("summary.json"),
        serde_json::to_vec_pretty(&json)?,
    )?;
    Ok(outcomes)
}
