//! Subcommand front end tying the pipeline together. All subcommands are
//! reproducible: outputs are a function of (inputs, seed) except wallclock
//! log fields.

mod ablate;
mod config;
mod viz;

pub use ablate::{apply_variant, run_ablation, run_variant, VariantOutcome, ALL_VARIANTS};
pub use config::{load_run_config, DataSection, RetrievalSection, RunConfig};
pub use viz::render_strips;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use crate::data::{generate_toy_dataset, load_manifest, read_rgb8, Domain, ToyWorldConfig};
use crate::evaluation::{emit_report, ReportMeta};
use crate::net::load_model;
use crate::pipeline::{build_virtual_database, evaluate_cross_domain};
use crate::retrieval::{
    digest_file, extract_descriptor, load_database, query, save_database, Metric, QueryOptions,
};
use crate::trainer::{load_train_checkpoint_expecting, save_train_checkpoint, train, train_from};

#[derive(Parser)]
#[command(
    name = "dasgil",
    version,
    about = "Domain-adaptive multi-task representation learning for image-retrieval localization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate the procedural two-domain toy dataset.
    Toygen {
        /// Toy world config (JSON). Omitted: built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a model per the run config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output directory for checkpoint and train log.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Resume from a training-state checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Dotted-path config overrides, repeatable: --set train.epochs=2
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Extract descriptors for the manifest's virtual records into a
    /// feature database file.
    BuildDb {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated retrieval layers, overriding the config.
        #[arg(long)]
        layers: Option<String>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Rank database entries against one query image.
    Query {
        #[arg(long)]
        db: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Evaluate cross-domain localization and write a report.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Pre-built database; omitted: built in memory.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also render the two recall curves as PNG files.
        #[arg(long)]
        plots: bool,
        #[arg(long, value_parser = parse_metric)]
        metric: Option<Metric>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Train and evaluate named pipeline variants side by side.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Variant name, repeatable; omitted: the full matrix.
        #[arg(long = "variant")]
        variants: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "set")]
        set: Vec<String>,
    },
    /// Render input / feature-PCA / depth / segmentation strips.
    Viz {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input image, repeatable.
        #[arg(long = "image", required = true)]
        images: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Pyramid level to project; defaults to the middle layer.
        #[arg(long)]
        layer: Option<usize>,
    },
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "l1" => Ok(Metric::L1),
        "cosine" => Ok(Metric::Cosine),
        other => Err(format!("unknown metric {other:?} (expected l1 or cosine)")),
    }
}

fn parse_layers(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .with_context(|| format!("bad layer {part:?}"))
        })
        .collect()
}

/// Hex SHA-256 of the manifest file, stamped into report metadata.
pub(crate) fn dataset_digest_hex(path: &Path) -> Result<String> {
    let digest = digest_file(path)?;
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Execute a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Toygen { config, out, seed } => {
            let mut world = match config {
                Some(path) => {
                    let bytes = std::fs::read(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_slice::<ToyWorldConfig>(&bytes)
                        .context("toy world config schema")?
                }
                None => ToyWorldConfig::default_with_seed(seed.unwrap_or(0)),
            };
            if let Some(seed) = seed {
                world.seed = seed;
            }
            world.validate()?;
            let manifest = generate_toy_dataset(&world, &out)?;
            println!(
                "wrote {} records ({} virtual, {} real) under {}",
                manifest.records.len(),
                manifest.domain_records(Domain::Virtual).len(),
                manifest.domain_records(Domain::Real).len(),
                out.display()
            );
            Ok(())
        }
        Command::Train {
            config,
            out,
            seed,
            resume,
            set,
        } => {
            let mut run_config = load_run_config(&config, &set)?;
            if let Some(seed) = seed {
                run_config.train.seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| PathBuf::from("runs/latest"));
            if run_config.train.checkpoint_path.is_none() {
                run_config.train.checkpoint_path = Some(out_dir.join("checkpoint.dgck"));
            }
            if run_config.train.log_path.is_none() {
                run_config.train.log_path = Some(out_dir.join("trainlog.jsonl"));
            }
            run_config.validate()?;
            let manifest = load_manifest(&run_config.data.manifest)?;
            let (state, logs) = match resume {
                Some(ckpt) => {
                    let state = load_train_checkpoint_expecting(&ckpt, &run_config.net)?;
                    train_from(state, &manifest, &run_config.train)?
                }
                None => train(&manifest, &run_config.net, &run_config.train)?,
            };
            if let Some(path) = &run_config.train.checkpoint_path {
                save_train_checkpoint(&state, path)?;
                println!("checkpoint: {}", path.display());
            }
            if let Some(last) = logs.last() {
                println!(
                    "finished at step {} (L_dis {:.4}, total {:.4})",
                    state.step, last.l_dis, last.total
                );
            } else {
                println!("nothing to do: run already complete at step {}", state.step);
            }
            Ok(())
        }
        Command::BuildDb {
            config,
            checkpoint,
            out,
            layers,
            set,
        } => {
            let mut run_config = load_run_config(&config, &set)?;
            if let Some(spec) = layers {
                run_config.net.retrieval_layers = parse_layers(&spec)?;
                run_config.validate()?;
            }
            let mut params = load_model(&checkpoint)?;
            params.config.retrieval_layers = run_config.net.retrieval_layers.clone();
            let manifest = load_manifest(&run_config.data.manifest)?;
            let digest = digest_file(&checkpoint)?;
            let db = build_virtual_database(&params, &manifest, digest)?;
            save_database(&db, &out)?;
            println!(
                "database: {} entries x {} dims -> {}",
                db.len(),
                db.total_dim(),
                out.display()
            );
            Ok(())
        }
        Command::Query {
            db,
            checkpoint,
            image,
            metric,
            k,
        } => {
            let params = load_model(&checkpoint)?;
            let database = load_database(&db)?;
            let digest = digest_file(&checkpoint)?;
            if !database.digest_matches(&digest) {
                eprintln!(
                    "warning: database was built from a different checkpoint (digest mismatch)"
                );
            }
            let img = read_rgb8(&image)?;
            let input = img.to_net_input::<f32>();
            let descriptor = extract_descriptor(&params, "query", &input, &database.layers)?;
            let metric = metric.unwrap_or(Metric::L1);
            let result = query(&database, &descriptor, &QueryOptions::new(metric, k))?;
            for (rank, (id, score)) in result.entries.iter().enumerate() {
                println!("{:>2}. {id}  {score:.6}", rank + 1);
            }
            Ok(())
        }
        Command::Eval {
            config,
            checkpoint,
            db,
            out,
            plots,
            metric,
            set,
        } => {
            let mut run_config = load_run_config(&config, &set)?;
            if let Some(metric) = metric {
                run_config.retrieval.metric = metric;
            }
            let params = load_model(&checkpoint)?;
            let manifest = load_manifest(&run_config.data.manifest)?;
            let digest = digest_file(&checkpoint)?;
            let database = match db {
                Some(path) => {
                    let loaded = load_database(&path)?;
                    if !loaded.digest_matches(&digest) {
                        eprintln!("warning: database was built from a different checkpoint");
                    }
                    loaded
                }
                None => build_virtual_database(&params, &manifest, digest)?,
            };
            if database.layers != params.config.retrieval_layers {
                bail!(
                    "database layers {:?} differ from configured retrieval layers {:?}",
                    database.layers,
                    params.config.retrieval_layers
                );
            }
            let meta = ReportMeta {
                checkpoint_digest: digest.iter().map(|b| format!("{b:02x}")).collect(),
                metric: format!("{:?}", run_config.retrieval.metric).to_lowercase(),
                layers: database.layers.clone(),
                dataset_digest: dataset_digest_hex(&run_config.data.manifest)?,
                extra: Default::default(),
            };
            let (report, _) = evaluate_cross_domain(
                &params,
                &manifest,
                &database,
                run_config.retrieval.metric,
                &run_config.eval,
                meta,
            )?;
            emit_report(&report, &out, plots)?;
            println!(
                "report: {} (high {:.1}%, medium {:.1}%, coarse {:.1}%)",
                out.display(),
                report.buckets.high,
                report.buckets.medium,
                report.buckets.coarse
            );
            Ok(())
        }
        Command::Ablate {
            config,
            out,
            variants,
            seed,
            set,
        } => {
            let mut run_config = load_run_config(&config, &set)?;
            if let Some(seed) = seed {
                run_config.train.seed = seed;
            }
            let names: Vec<String> = if variants.is_empty() {
                ALL_VARIANTS.iter().map(|s| s.to_string()).collect()
            } else {
                variants
            };
            let outcomes = run_ablation(&run_config, &names, &out)?;
            for o in &outcomes {
                let r1 = o.report.recall_at_n.first().map(|r| r.recall).unwrap_or(0.0);
                println!(
                    "{:<24} high {:>5.1}%  coarse {:>5.1}%  recall@1 {:.3}",
                    o.name, o.report.buckets.high, o.report.buckets.coarse, r1
                );
            }
            println!("summary: {}", out.join("summary.md").display());
            Ok(())
        }
        Command::Viz {
            checkpoint,
            images,
            out,
            layer,
        } => {
            let params = load_model(&checkpoint)?;
            let layer = layer.unwrap_or_else(|| (params.config.encoder_layers + 1) / 2);
            if layer == 0 || layer > params.config.encoder_layers {
                bail!(
                    "layer {layer} out of range 1..={}",
                    params.config.encoder_layers
                );
            }
            let written = viz::render_strips(&params, &images, layer, &out)?;
            for path in written {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}
