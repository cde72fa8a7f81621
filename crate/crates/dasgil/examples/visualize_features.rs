//! Render input / feature-PCA / predicted-depth / predicted-segmentation
//! strips for a few images with a briefly trained model.
//!
//!     cargo run --release --example visualize_features

use dasgil::data::{generate_toy_dataset, Domain, ToyWorldConfig};
use dasgil::net::{DiscriminatorKind, NetConfig};
use dasgil::trainer::{train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/example-out/visualize");
    let mut world = ToyWorldConfig::default_with_seed(9);
    world.image_height = 32;
    world.image_width = 32;
    world.frames_per_sequence = 8;
    let manifest = generate_toy_dataset(&world, &out.join("data"))?;

    let net = NetConfig::with_dims(32, 32, 3, world.class_count, DiscriminatorKind::Flatten, 0.5);
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 9);
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.learning_rate = 0.001;
    cfg.weights.lambda_d = 0.05;
    let (state, _) = train(&manifest, &net, &cfg)?;

    // one virtual and one real image of the same place
    let virt = manifest.domain_records(Domain::Virtual)[0];
    let real = manifest.domain_records(Domain::Real)[0];
    let images = vec![
        manifest.resolve(&virt.image_path),
        manifest.resolve(&real.image_path),
    ];
    let layer = (state.params.config.encoder_layers + 1) / 2;
    let written = dasgil::cli::render_strips(&state.params, &images, layer, &out.join("strips"))?;
    println!("strips (input | PCA level {layer} | depth | segmentation):");
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}
