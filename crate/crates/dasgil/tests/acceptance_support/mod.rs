//! Shared fixtures for the acceptance suite.

use dasgil::data::ToyWorldConfig;
use dasgil::net::{DiscriminatorKind, NetConfig, ParamSet};
use dasgil::trainer::TrainConfig;

/// Print the per-criterion pass line.
pub fn pass(criterion: usize, what: &str, elapsed: f64) {
    println!("ACCEPTANCE criterion {criterion}: PASS ({elapsed:.2}s) - {what}");
}

/// Small world for the fast criteria (not the domain-adaptation study).
pub fn tiny_world(seed: u64) -> ToyWorldConfig {
    let mut config = ToyWorldConfig::default_with_seed(seed);
    config.image_height = 32;
    config.image_width = 32;
    config.sequences = 1;
    config.frames_per_sequence = 8;
    config.environments.truncate(2);
    config
}

pub fn tiny_net() -> NetConfig {
    NetConfig::with_dims(32, 32, 3, 5, DiscriminatorKind::Flatten, 0.25)
}

pub fn tiny_train_config(net: &NetConfig, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, seed);
    cfg.batch_size = 2;
    cfg.learning_rate = 0.002;
    cfg.epochs = 1;
    cfg.weights.lambda_d = 0.05;
    cfg.weights.lambda_s = 0.5;
    cfg
}

pub fn collection_bytes(set: &ParamSet<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    for (_, v) in set.iter() {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Study-scale world per the acceptance protocol: at least 2 sequences x
/// 16 frames x 3 environments at 64x64.
pub fn study_world(seed: u64) -> ToyWorldConfig {
    ToyWorldConfig::default_with_seed(seed)
}

/// Study-scale net: 64x64, 5 encoder layers, flatten discriminator.
pub fn study_net(class_count: usize) -> NetConfig {
    NetConfig::toy_default(class_count, DiscriminatorKind::Flatten)
}
