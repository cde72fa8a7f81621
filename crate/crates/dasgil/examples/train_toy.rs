//! Train the full model briefly on a small dataset and watch the loss
//! components move.
//!
//!     cargo run --release --example train_toy

use dasgil::data::{generate_toy_dataset, ToyWorldConfig};
use dasgil::net::{DiscriminatorKind, NetConfig};
use dasgil::trainer::{save_train_checkpoint, train, TrainConfig};

fn main() -> anyhow::Result<()> {
    let out = std::path::PathBuf::from("target/example-out/train-toy");
    let mut world = ToyWorldConfig::default_with_seed(7);
    world.image_height = 32;
    world.image_width = 32;
    world.frames_per_sequence = 8;
    let manifest = generate_toy_dataset(&world, &out.join("data"))?;

    let net = NetConfig::with_dims(32, 32, 3, world.class_count, DiscriminatorKind::Flatten, 0.5);
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, 7);
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.learning_rate = 0.001;
    cfg.weights.lambda_d = 0.05;
    cfg.weights.lambda_s = 0.5;

    let (state, logs) = train(&manifest, &net, &cfg)?;
    println!("step  L_dis    L_gen    L_T     L_D     L_S     total");
    for log in logs.iter().step_by(logs.len().max(8) / 8) {
        println!(
            "{:>4}  {:<8.3} {:<8.3} {:<7.3} {:<7.3} {:<7.3} {:<8.3}",
            log.step, log.l_dis, log.l_gen, log.l_t, log.l_d, log.l_s, log.total
        );
    }
    let ckpt = out.join("checkpoint.dgck");
    save_train_checkpoint(&state, &ckpt)?;
    println!("\n{} steps done, checkpoint at {}", state.step, ckpt.display());
    Ok(())
}
