//! Full cross-domain localization evaluation: real queries against the
//! virtual feature database, scored as precision buckets and recall
//! curves, emitted as a JSON report plus curve plots.
//!
//!     cargo run --release --example evaluate_localization

use dasgil::data::{generate_toy_dataset, ToyWorldConfig};
use dasgil::evaluation::{emit_report, ReportMeta};
use dasgil::net::{DiscriminatorKind, NetConfig};
use dasgil::pipeline::{build_virtual_database, evaluate_cross_domain, EvalConfig};
use dasgil::retrieval::Metric;
use dasgil::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/example-out/evaluate");
    let mut world = ToyWorldConfig::default_with_seed(3);
    world.image_height = 32;
    world.image_width = 32;
    let manifest = generate_toy_dataset(&world, &out.join("data"))?;

    let net = NetConfig::with_dims(32, 32, 3, world.class_count, DiscriminatorKind::Flatten, 0.5);
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 3);
    cfg.batch_size = 4;
    cfg.epochs = 4;
    cfg.learning_rate = 0.001;
    cfg.weights.lambda_d = 0.05;
    let (state, _) = train(&manifest, &net, &cfg)?;

    let db = build_virtual_database(&state.params, &manifest, [0u8; 32])?;
    // distances scaled to the toy world: one frame step is 1 m here
    let eval = EvalConfig {
        recall_ns: vec![1, 2, 5, 10],
        radius_m: world.frame_step_m() * 2.05,
        top1_thresholds_m: (1..=8).map(|k| k as f64 * world.frame_step_m() / 2.0).collect(),
        k: 10,
    };
    let (report, traces) = evaluate_cross_domain(
        &state.params,
        &manifest,
        &db,
        Metric::L1,
        &eval,
        ReportMeta {
            metric: "l1".into(),
            layers: state.params.config.retrieval_layers.clone(),
            ..ReportMeta::default()
        },
    )?;
    println!(
        "buckets: high {:.1}% / medium {:.1}% / coarse {:.1}%",
        report.buckets.high, report.buckets.medium, report.buckets.coarse
    );
    for r in &report.recall_at_n {
        println!("recall@{:<2} = {:.3}", r.n, r.recall);
    }
    println!("\nsample query rankings:");
    for trace in traces.iter().take(3) {
        println!("  {} -> {:?}", trace.query_id, &trace.ranked_ids[..3.min(trace.ranked_ids.len())]);
    }
    let path = out.join("report.json");
    emit_report(&report, &path, true)?;
    println!("\nreport + two curve plots written next to {}", path.display());
    Ok(())
}
