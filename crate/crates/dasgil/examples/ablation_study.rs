//! Run a few named pipeline variants side by side on a shared dataset and
//! seed: disabling the adversarial game, dropping the segmentation task,
//! and the full configuration.
//!
//!     cargo run --release --example ablation_study

use dasgil::cli::{run_ablation, DataSection, RetrievalSection, RunConfig};
use dasgil::data::{generate_toy_dataset, ToyWorldConfig};
use dasgil::net::{DiscriminatorKind, NetConfig};
use dasgil::pipeline::EvalConfig;
use dasgil::retrieval::Metric;
use dasgil::trainer::TrainConfig;

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/example-out/ablation");
    let mut world = ToyWorldConfig::default_with_seed(5);
    world.image_height = 32;
    world.image_width = 32;
    world.frames_per_sequence = 8;
    generate_toy_dataset(&world, &out.join("data"))?;

    let net = NetConfig::with_dims(32, 32, 3, world.class_count, DiscriminatorKind::Flatten, 0.5);
    let mut train = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 5);
    train.batch_size = 4;
    train.epochs = 2;
    train.learning_rate = 0.001;
    train.weights.lambda_d = 0.05;
    let base = RunConfig {
        net,
        train,
        data: DataSection {
            manifest: out.join("data/manifest.jsonl"),
        },
        retrieval: RetrievalSection {
            metric: Metric::L1,
            l1_dimension_normalized: false,
            cosine_concatenated: false,
        },
        eval: EvalConfig {
            recall_ns: vec![1, 2, 5],
            radius_m: world.frame_step_m() * 2.05,
            top1_thresholds_m: vec![1.0, 2.0, 4.0, 8.0],
            k: 5,
        },
    };
    let variants = ["multi-fd", "no-gan", "seg-only"].map(String::from).to_vec();
    let outcomes = run_ablation(&base, &variants, &out.join("runs"))?;
    println!("variant        recall@1   coarse%   last L_dis");
    for o in &outcomes {
        println!(
            "{:<14} {:<10.3} {:<9.1} {:.3}",
            o.name,
            o.report.recall_at_n[0].recall,
            o.report.buckets.coarse,
            o.logs.last().map(|l| l.l_dis).unwrap_or(0.0)
        );
    }
    println!("\nfull table: {}", out.join("runs/summary.md").display());
    Ok(())
}
