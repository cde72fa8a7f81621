use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Scalar;

use super::{NetConfig, NetError};

/// An ordered, named collection of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F: Scalar = f32> {
    entries: Vec<(String, ArrayD<F>)>,
}

impl<F: Scalar> ParamSet<F> {
    pub fn new() -> Self {
        ParamSet { entries: Vec::new() }
    }

    pub fn push(&mut self, name: impl Into<String>, value: ArrayD<F>) {
        self.entries.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> &ArrayD<F> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .unwrap_or_else(|| panic!("missing parameter {name}"))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ArrayD<F>)> {
        self.entries.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut ArrayD<F>)> {
        self.entries.iter_mut().map(|(n, v)| (n.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|(_, v)| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }
}

impl<F: Scalar> Default for ParamSet<F> {
    fn default() -> Self {
        Self::new()
    }
}

/// Parameters of the full model: extractor, the two generators, and the
/// configured discriminator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F: Scalar = f32> {
    pub extractor: ParamSet<F>,
    pub depth_gen: ParamSet<F>,
    pub seg_gen: ParamSet<F>,
    pub discriminator: ParamSet<F>,
    pub config: NetConfig,
    pub version: u32,
}

impl<F: Scalar> ModelParams<F> {
    pub fn collections(&self) -> [(&'static str, &ParamSet<F>); 4] {
        [
            ("extractor", &self.extractor),
            ("depth_gen", &self.depth_gen),
            ("seg_gen", &self.seg_gen),
            ("discriminator", &self.discriminator),
        ]
    }

    pub fn all_finite(&self) -> bool {
        self.collections().iter().all(|(_, s)| s.all_finite())
    }
}

pub(crate) enum InitKind {
    /// Uniform on (-b, b) with b = sqrt(6 / fan_in).
    FanInUniform(usize),
    Zeros,
    Ones,
}

pub(crate) struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitKind,
}

fn conv(name: &str, cout: usize, cin: usize, k: usize) -> Vec<ParamSpec> {
    vec![ParamSpec {
        name: format!("{name}.w"),
        shape: vec![cout, cin, k, k],
        init: InitKind::FanInUniform(cin * k * k),
    }]
}

fn conv_bias(name: &str, cout: usize, cin: usize, k: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec {
            name: format!("{name}.w"),
            shape: vec![cout, cin, k, k],
            init: InitKind::FanInUniform(cin * k * k),
        },
        ParamSpec {
            name: format!("{name}.b"),
            shape: vec![cout],
            init: InitKind::Zeros,
        },
    ]
}

fn bn(name: &str, c: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec {
            name: format!("{name}.g"),
            shape: vec![c],
            init: InitKind::Ones,
        },
        ParamSpec {
            name: format!("{name}.b"),
            shape: vec![c],
            init: InitKind::Zeros,
        },
    ]
}

fn linear(name: &str, din: usize, dout: usize) -> Vec<ParamSpec> {
    vec![
        ParamSpec {
            name: format!("{name}.w"),
            shape: vec![din, dout],
            init: InitKind::FanInUniform(din),
        },
        ParamSpec {
            name: format!("{name}.b"),
            shape: vec![dout],
            init: InitKind::Zeros,
        },
    ]
}

pub(crate) fn extractor_specs(cfg: &NetConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    let mut cin = cfg.input_channels;
    for i in 1..=cfg.encoder_layers {
        let cout = cfg.channels(i);
        specs.extend(conv(&format!("enc{i}.conv"), cout, cin, 4));
        specs.extend(bn(&format!("enc{i}.bn"), cout));
        cin = cout;
    }
    specs
}

/// Decoder stage output channels: level channels for stages 1..L-1, the
/// first level's channels for the full-resolution stage 0.
pub(crate) fn stage_channels(cfg: &NetConfig, stage: usize) -> usize {
    if stage == 0 {
        cfg.channels(1)
    } else {
        cfg.channels(stage)
    }
}

fn generator_stage_specs(cfg: &NetConfig, down_to: usize) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    for i in (down_to..cfg.encoder_layers).rev() {
        let above = stage_channels(cfg, i + 1);
        let cin = if i == 0 { above } else { above + cfg.channels(i) };
        let cout = stage_channels(cfg, i);
        specs.extend(conv(&format!("stage{i}.conv"), cout, cin, 3));
        specs.extend(bn(&format!("stage{i}.bn"), cout));
    }
    specs
}

pub(crate) fn depth_gen_specs(cfg: &NetConfig) -> Vec<ParamSpec> {
    let down_to = *cfg.depth_output_layers.iter().min().expect("validated");
    let mut specs = generator_stage_specs(cfg, down_to.min(cfg.encoder_layers - 1).max(1));
    let mut heads: Vec<usize> = cfg.depth_output_layers.clone();
    heads.sort_unstable();
    for l in heads {
        specs.extend(conv_bias(&format!("head{l}"), 1, stage_channels(cfg, l), 3));
    }
    specs
}

pub(crate) fn seg_gen_specs(cfg: &NetConfig) -> Vec<ParamSpec> {
    let mut specs = generator_stage_specs(cfg, 0);
    specs.extend(conv_bias("head", cfg.class_count, stage_channels(cfg, 0), 3));
    specs
}

/// Deterministic initialization: a single seeded stream samples every
/// collection in a fixed order, fan-in-scaled uniform for weights.
pub fn init_params<F: Scalar>(config: &NetConfig, seed: u64) -> Result<ModelParams<F>, NetError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let build = |specs: Vec<ParamSpec>, rng: &mut ChaCha8Rng| {
        let mut set = ParamSet::new();
        for spec in specs {
            let value = match spec.init {
                InitKind::FanInUniform(fan_in) => {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    ArrayD::from_shape_fn(IxDyn(&spec.shape), |_| {
                        F::from_f64(rng.gen_range(-bound..bound))
                    })
                }
                InitKind::Zeros => ArrayD::zeros(IxDyn(&spec.shape)),
                InitKind::Ones => ArrayD::ones(IxDyn(&spec.shape)),
            };
            set.push(spec.name, value);
        }
        set
    };
    Ok(ModelParams {
        extractor: build(extractor_specs(config), &mut rng),
        depth_gen: build(depth_gen_specs(config), &mut rng),
        seg_gen: build(seg_gen_specs(config), &mut rng),
        discriminator: build(discriminator_specs(config), &mut rng),
        config: config.clone(),
        version: 1,
    })
}

pub(crate) fn discriminator_specs(cfg: &NetConfig) -> Vec<ParamSpec> {
    let mut specs = Vec::new();
    match cfg.discriminator_kind {
        super::DiscriminatorKind::Flatten => {
            let din = cfg.fd_input_dim();
            specs.extend(bn("bn", din));
            specs.extend(linear("lin1", din, cfg.fd_hidden.0));
            specs.extend(linear("lin2", cfg.fd_hidden.0, cfg.fd_hidden.1));
            specs.extend(linear("lin3", cfg.fd_hidden.1, 1));
        }
        super::DiscriminatorKind::Cascade => {
            for (i, (cin, cout)) in cfg.cascade_plan().into_iter().enumerate() {
                let b = i + 1;
                specs.extend(conv(&format!("block{b}.main1"), cout, cin, 3));
                specs.extend(bn(&format!("block{b}.bn1"), cout));
                specs.extend(conv(&format!("block{b}.main2"), cout, cout, 3));
                specs.extend(bn(&format!("block{b}.bn2"), cout));
                specs.extend(conv_bias(&format!("block{b}.skip"), cout, cin, 1));
            }
            specs.extend(linear("final", cfg.cd_flatten_dim(), 1));
        }
    }
    specs
}
