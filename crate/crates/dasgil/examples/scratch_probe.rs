// scratch probe-design sweep over saved checkpoints
use dasgil::data::{load_manifest, read_rgb8, Domain};
use dasgil::probe::{domain_probe_accuracy_from_layer, logistic_holdout_accuracy};
use dasgil::retrieval::extract_descriptor;
use dasgil::trainer::load_train_checkpoint;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let manifest = load_manifest(std::path::Path::new(&args[1]))?;
    for ckpt_path in &args[2..] {
        let state = load_train_checkpoint(std::path::Path::new(ckpt_path))?;
        let params = &state.params;
        // descriptor probe: raw flattened retrieval layers
        let mut feats = Vec::new();
        let mut labels = Vec::new();
        for record in &manifest.records {
            let image = read_rgb8(&manifest.resolve(&record.image_path))?;
            let d = extract_descriptor(
                params,
                &record.id,
                &image.to_net_input(),
                &params.config.retrieval_layers,
            )?;
            feats.push(d.concatenated().iter().map(|&v| v as f64).collect::<Vec<f64>>());
            labels.push(if record.domain == Domain::Real { 1.0 } else { -1.0 });
        }
        let mut desc_accs = Vec::new();
        let mut pooled4s = Vec::new();
        for split in [7u64, 8, 9, 10, 11] {
            desc_accs.push(logistic_holdout_accuracy(&feats, &labels, split)?);
            pooled4s.push(domain_probe_accuracy_from_layer(params, &manifest, 4, split)?);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        println!(
            "{ckpt_path}: descriptor mean={:.3} {desc_accs:.2?} pooled@4 mean={:.3} {pooled4s:.2?}",
            mean(&desc_accs), mean(&pooled4s)
        );
    }
    Ok(())
}
