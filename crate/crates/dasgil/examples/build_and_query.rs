//! Build a multi-scale feature database over the virtual records and run
//! a real-domain query image against it under both metrics.
//!
//!     cargo run --release --example build_and_query

use dasgil::data::{generate_toy_dataset, read_rgb8, Domain, ToyWorldConfig};
use dasgil::net::{DiscriminatorKind, NetConfig};
use dasgil::retrieval::{
    extract_descriptor, load_database, query, save_database, Metric, QueryOptions,
};
use dasgil::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/example-out/build-and-query");
    let mut world = ToyWorldConfig::default_with_seed(11);
    world.image_height = 32;
    world.image_width = 32;
    world.frames_per_sequence = 8;
    let manifest = generate_toy_dataset(&world, &out.join("data"))?;

    let net = NetConfig::with_dims(32, 32, 3, world.class_count, DiscriminatorKind::Flatten, 0.5);
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 11);
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.learning_rate = 0.001;
    cfg.weights.lambda_d = 0.05;
    let (state, _) = train(&manifest, &net, &cfg)?;

    // one descriptor per virtual record, persisted and reloaded
    let db = dasgil::pipeline::build_virtual_database(&state.params, &manifest, [0u8; 32])?;
    let db_path = out.join("features.dgfd");
    save_database(&db, &db_path)?;
    let db = load_database(&db_path)?;
    println!(
        "database: {} descriptors x {} dims over layers {:?}",
        db.len(),
        db.total_dim(),
        db.layers
    );

    // query a real image; its virtual twins share the pose
    let query_record = manifest.domain_records(Domain::Real)[3];
    let image = read_rgb8(&manifest.resolve(&query_record.image_path))?;
    let descriptor = extract_descriptor(
        &state.params,
        &query_record.id,
        &image.to_net_input(),
        &state.params.config.retrieval_layers,
    )?;
    for metric in [Metric::L1, Metric::Cosine] {
        let result = query(&db, &descriptor, &QueryOptions::new(metric, 5))?;
        println!("\nquery {} under {:?}:", query_record.id, metric);
        for (rank, (id, score)) in result.entries.iter().enumerate() {
            let pose = &manifest.get(id).unwrap().pose;
            let gt = &query_record.pose;
            let dist = ((pose.x - gt.x).powi(2) + (pose.y - gt.y).powi(2)).sqrt();
            println!("  {}. {:<22} score {:>9.4}  {:>5.1} m from truth", rank + 1, id, score, dist);
        }
    }
    Ok(())
}
