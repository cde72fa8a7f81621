// scratch calibration driver: train variants, save checkpoints, print metrics
use dasgil::cli::{apply_variant, load_run_config};
use dasgil::data::load_manifest;
use dasgil::pipeline::cross_domain_recall_at_1;
use dasgil::probe::domain_probe_accuracy_from_layer;
use dasgil::retrieval::Metric;
use dasgil::trainer::{save_train_checkpoint, train};

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let tag = args[1].clone();
    let config_path = std::path::Path::new(&args[2]);
    let sets: Vec<String> = args[3..].to_vec();
    let base = load_run_config(config_path, &sets)?;
    let manifest = load_manifest(&base.data.manifest)?;
    std::fs::create_dir_all("ckpts")?;
    for variant in ["multi-fd", "no-gan"] {
        let cfg = apply_variant(&base, variant)?;
        let t0 = std::time::Instant::now();
        let (state, logs) = train(&manifest, &cfg.net, &cfg.train)?;
        save_train_checkpoint(
            &state,
            std::path::Path::new(&format!("ckpts/{tag}_{variant}_s{}.dgck", cfg.train.seed)),
        )?;
        let recall = cross_domain_recall_at_1(&state.params, &manifest, Metric::L1, cfg.eval.radius_m)?;
        let mut probes = Vec::new();
        for min_layer in 3..=cfg.net.encoder_layers {
            let p = domain_probe_accuracy_from_layer(&state.params, &manifest, min_layer, cfg.train.seed)?;
            probes.push(format!("{min_layer}:{p:.2}"));
        }
        let last = logs.last().unwrap();
        println!(
            "{tag} {variant:<10} seed={} recall@1={recall:.3} probes=[{}] L_dis={:.3} ({:.0}s)",
            cfg.train.seed, probes.join(" "), last.l_dis, t0.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
