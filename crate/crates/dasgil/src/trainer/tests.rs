use tempfile::TempDir;

use crate::data::{derived_rng, generate_toy_dataset, DatasetManifest, Domain, ToyWorldConfig};
use crate::net::{DiscriminatorKind, NetConfig};

use super::*;

fn tiny_world(seed: u64) -> ToyWorldConfig {
    let mut config = ToyWorldConfig::default_with_seed(seed);
    config.image_height = 32;
    config.image_width = 32;
    config.sequences = 1;
    config.frames_per_sequence = 8;
    config.environments.truncate(2);
    config
}

fn tiny_net() -> NetConfig {
    NetConfig::with_dims(32, 32, 3, 5, DiscriminatorKind::Flatten, 0.25)
}

fn tiny_setup(seed: u64) -> (TempDir, DatasetManifest, NetConfig, TrainConfig) {
    let dir = TempDir::new().unwrap();
    let manifest = generate_toy_dataset(&tiny_world(seed), dir.path()).unwrap();
    let net = tiny_net();
    let mut cfg = TrainConfig::default_for(DiscriminatorKind::Flatten, &net.triplet_layers, seed);
    cfg.batch_size = 2;
    cfg.epochs = 1;
    (dir, manifest, net, cfg)
}

fn params_bytes(params: &crate::net::ModelParams<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    for (_, set) in params.collections() {
        for (_, v) in set.iter() {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

fn collection_bytes(set: &crate::net::ParamSet<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    for (_, v) in set.iter() {
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

#[test]
fn batch_counts_match_batch_size() {
    let (_dir, manifest, net, cfg) = tiny_setup(21);
    let mut rng = derived_rng(1, "step", 0);
    let bundle = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();
    assert_eq!(bundle.batch_size(), 2);
    assert_eq!(bundle.anchors.images.shape(), &[2, 3, 32, 32]);
    assert_eq!(bundle.positives.images.shape(), &[2, 3, 32, 32]);
    assert_eq!(bundle.negatives.images.shape(), &[2, 3, 32, 32]);
    assert_eq!(bundle.real_images.shape(), &[2, 3, 32, 32]);
    assert_eq!(bundle.anchors.seg.len(), 2 * 32 * 32);
}

#[test]
fn batch_without_real_domain_fails() {
    let (_dir, mut manifest, net, cfg) = tiny_setup(22);
    manifest.records.retain(|r| r.domain == Domain::Virtual);
    let mut rng = derived_rng(1, "step", 0);
    assert!(matches!(
        assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng),
        Err(TrainError::EmptyDomain(_))
    ));
}

#[test]
fn batch_assembly_is_deterministic() {
    let (_dir, manifest, net, cfg) = tiny_setup(23);
    let run = || {
        let mut rng = derived_rng(5, "step", 3);
        let b = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();
        (
            b.triplets.clone(),
            b.anchors.images.clone(),
            b.real_images.clone(),
        )
    };
    let (t1, a1, r1) = run();
    let (t2, a2, r2) = run();
    assert_eq!(t1, t2);
    assert_eq!(a1, a2);
    assert_eq!(r1, r2);
}

#[test]
fn zero_learning_rate_leaves_params_unchanged() {
    let (_dir, manifest, net, mut cfg) = tiny_setup(24);
    cfg.learning_rate = 0.0;
    let mut state = TrainState::init(&net, 7).unwrap();
    let before = params_bytes(&state.params);
    let mut rng = derived_rng(7, "step", 0);
    let bundle = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();
    let log = train_step(&mut state, &bundle, &cfg).unwrap();
    assert_eq!(params_bytes(&state.params), before);
    assert!(log.total.is_finite());
    assert!(log.l_dis.is_finite());
    assert!(log.l_d > 0.0);
}

#[test]
fn phases_touch_only_their_parameter_group() {
    let (_dir, manifest, net, cfg) = tiny_setup(25);
    let mut state = TrainState::init(&net, 9).unwrap();
    let mut rng = derived_rng(9, "step", 0);
    let bundle = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();

    let ext_before = collection_bytes(&state.params.extractor);
    let dg_before = collection_bytes(&state.params.depth_gen);
    let sg_before = collection_bytes(&state.params.seg_gen);
    let disc_before = collection_bytes(&state.params.discriminator);
    discriminator_phase(&mut state, &bundle, &cfg).unwrap();
    assert_eq!(collection_bytes(&state.params.extractor), ext_before);
    assert_eq!(collection_bytes(&state.params.depth_gen), dg_before);
    assert_eq!(collection_bytes(&state.params.seg_gen), sg_before);
    assert_ne!(collection_bytes(&state.params.discriminator), disc_before);

    let disc_after_phase1 = collection_bytes(&state.params.discriminator);
    generator_phase(&mut state, &bundle, &cfg).unwrap();
    assert_eq!(collection_bytes(&state.params.discriminator), disc_after_phase1);
    assert_ne!(collection_bytes(&state.params.extractor), ext_before);
}

#[test]
fn constant_discriminator_and_zero_weights_freeze_generators() {
    let (_dir, manifest, net, mut cfg) = tiny_setup(26);
    cfg.weights.lambda_t = 0.0;
    cfg.weights.lambda_d = 0.0;
    cfg.weights.lambda_s = 0.0;
    let mut state = TrainState::init(&net, 11).unwrap();
    // freeze the discriminator at a constant output: zero final weight
    for (name, value) in state.params.discriminator.iter_mut() {
        if name == "lin3.w" {
            value.fill(0.0);
        }
        if name == "lin3.b" {
            value.fill(0.25);
        }
    }
    let before_ext = collection_bytes(&state.params.extractor);
    let before_dg = collection_bytes(&state.params.depth_gen);
    let before_sg = collection_bytes(&state.params.seg_gen);
    let mut rng = derived_rng(11, "step", 0);
    let bundle = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();
    let losses = generator_phase(&mut state, &bundle, &cfg).unwrap();
    assert_eq!(collection_bytes(&state.params.extractor), before_ext);
    assert_eq!(collection_bytes(&state.params.depth_gen), before_dg);
    assert_eq!(collection_bytes(&state.params.seg_gen), before_sg);
    // gen loss is 0.5 * (0.25 - 1)^2 regardless of input
    assert!((losses.l_gen - 0.5 * 0.75 * 0.75).abs() < 1e-6);
}

#[test]
fn train_runs_the_documented_step_count() {
    let (_dir, manifest, net, mut cfg) = tiny_setup(27);
    cfg.epochs = 2;
    cfg.batch_size = 3;
    let candidates = anchor_ids(&manifest).len();
    let (state, logs) = train(&manifest, &net, &cfg).unwrap();
    let expect = 2 * (candidates / 3);
    assert_eq!(logs.len(), expect);
    assert_eq!(state.step, expect as u64);
    assert!(logs.iter().all(|l| l.total.is_finite()));
}

#[test]
fn training_without_real_domain_fails_before_step_one() {
    let (_dir, mut manifest, net, cfg) = tiny_setup(28);
    manifest.records.retain(|r| r.domain == Domain::Virtual);
    assert!(matches!(
        train(&manifest, &net, &cfg),
        Err(TrainError::EmptyDomain(_))
    ));
}

#[test]
fn resume_reproduces_uninterrupted_logs() {
    let (_dir, manifest, net, mut cfg) = tiny_setup(29);
    cfg.epochs = 2;
    let (_, full_logs) = train(&manifest, &net, &cfg).unwrap();

    // run the first half, checkpoint, resume
    let spe = steps_per_epoch(&manifest, cfg.batch_size);
    let mut half_cfg = cfg.clone();
    half_cfg.epochs = 1;
    let (half_state, half_logs) = train(&manifest, &net, &half_cfg).unwrap();
    assert_eq!(half_logs.len(), spe);

    let ckpt_dir = TempDir::new().unwrap();
    let path = ckpt_dir.path().join("state.dgck");
    save_train_checkpoint(&half_state, &path).unwrap();
    let resumed = load_train_checkpoint(&path).unwrap();
    let (_, tail_logs) = train_from(resumed, &manifest, &cfg).unwrap();

    let strip = |l: &StepLog| (l.step, l.l_dis, l.l_gen, l.l_t, l.l_d, l.l_s, l.total);
    let full_tail: Vec<_> = full_logs[spe..].iter().map(strip).collect();
    let resumed_tail: Vec<_> = tail_logs.iter().map(strip).collect();
    assert_eq!(full_tail, resumed_tail);
}

#[test]
fn train_checkpoint_round_trips_every_field() {
    let (_dir, manifest, net, cfg) = tiny_setup(30);
    let mut state = TrainState::init(&net, 13).unwrap();
    let mut rng = derived_rng(13, "step", 0);
    let bundle = assemble_batch(&manifest, &net, &cfg.batch_options(), &mut rng).unwrap();
    train_step(&mut state, &bundle, &cfg).unwrap();

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("state.dgck");
    save_train_checkpoint(&state, &path).unwrap();
    let loaded = load_train_checkpoint(&path).unwrap();
    assert_eq!(loaded.step, state.step);
    assert_eq!(loaded.seed, state.seed);
    assert_eq!(loaded.opt_gen.t, state.opt_gen.t);
    assert_eq!(loaded.opt_disc.t, state.opt_disc.t);
    assert_eq!(params_bytes(&loaded.params), params_bytes(&state.params));
    assert_eq!(loaded.opt_gen.m, state.opt_gen.m);
    assert_eq!(loaded.opt_gen.v, state.opt_gen.v);
    assert_eq!(loaded.opt_disc.m, state.opt_disc.m);
    assert_eq!(loaded.opt_disc.v, state.opt_disc.v);
}

#[test]
fn checkpoint_with_other_config_is_rejected() {
    let (_dir, _manifest, net, _cfg) = tiny_setup(31);
    let state = TrainState::init(&net, 1).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("state.dgck");
    save_train_checkpoint(&state, &path).unwrap();
    let other = NetConfig::with_dims(32, 32, 3, 5, DiscriminatorKind::Flatten, 0.5);
    assert!(matches!(
        load_train_checkpoint_expecting(&path, &other),
        Err(TrainError::VersionMismatch(_))
    ));
    load_train_checkpoint_expecting(&path, &net).unwrap();
}

#[test]
fn truncated_train_checkpoint_is_rejected() {
    let (_dir, _manifest, net, _cfg) = tiny_setup(32);
    let state = TrainState::init(&net, 1).unwrap();
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("state.dgck");
    save_train_checkpoint(&state, &path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 257]).unwrap();
    assert!(load_train_checkpoint(&path).is_err());
}
