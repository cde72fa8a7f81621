use std::collections::BTreeMap;

use ndarray::{Array1, ArrayD, IxDyn};

use crate::tensor::{Scalar, Tape, Var};

use super::{DiscriminatorKind, ModelParams, NetConfig, NetError, ParamSet};

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const LEAKY_SLOPE: f64 = 0.2;

/// Ordered multi-scale feature maps, level 1 (shallow, large) through the
/// deepest level. Levels are batched NCHW arrays.
#[derive(Debug, Clone)]
pub struct FeaturePyramid<F: Scalar = f32> {
    levels: Vec<ArrayD<F>>,
}

impl<F: Scalar> FeaturePyramid<F> {
    pub fn new(levels: Vec<ArrayD<F>>) -> Result<Self, NetError> {
        if levels.is_empty() {
            return Err(NetError::ShapeMismatch("empty pyramid".into()));
        }
        for win in levels.windows(2) {
            let (a, b) = (win[0].shape(), win[1].shape());
            if a.len() != 4 || b.len() != 4 {
                return Err(NetError::ShapeMismatch("pyramid levels must be 4-d".into()));
            }
            if !(b[2] < a[2] && b[3] < a[3]) {
                return Err(NetError::ShapeMismatch(
                    "pyramid spatial dims must strictly decrease".into(),
                ));
            }
            if a[0] != b[0] {
                return Err(NetError::ShapeMismatch("pyramid batch sizes differ".into()));
            }
        }
        Ok(FeaturePyramid { levels })
    }

    /// Feature map of `layer` (1-based).
    pub fn level(&self, layer: usize) -> &ArrayD<F> {
        &self.levels[layer - 1]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn batch_size(&self) -> usize {
        self.levels[0].shape()[0]
    }

    pub fn levels(&self) -> &[ArrayD<F>] {
        &self.levels
    }

    /// Check the pyramid is exactly what `config` would produce.
    pub fn check_config(&self, config: &NetConfig) -> Result<(), NetError> {
        if self.levels.len() != config.encoder_layers {
            return Err(NetError::ShapeMismatch(format!(
                "pyramid has {} levels, config expects {}",
                self.levels.len(),
                config.encoder_layers
            )));
        }
        let n = self.batch_size();
        for (idx, level) in self.levels.iter().enumerate() {
            let layer = idx + 1;
            let (h, w) = config.level_dims(layer);
            let want = [n, config.channels(layer), h, w];
            if level.shape() != want {
                return Err(NetError::ShapeMismatch(format!(
                    "level {layer} is {:?}, config expects {:?}",
                    level.shape(),
                    want
                )));
            }
        }
        Ok(())
    }
}

/// Which parameter collections a tape evaluation may differentiate.
#[derive(Debug, Clone, Copy, Default)]
pub struct Trainable {
    pub extractor: bool,
    pub depth_gen: bool,
    pub seg_gen: bool,
    pub discriminator: bool,
}

impl Trainable {
    pub fn none() -> Self {
        Trainable::default()
    }

    pub fn generators() -> Self {
        Trainable {
            extractor: true,
            depth_gen: true,
            seg_gen: true,
            discriminator: false,
        }
    }

    pub fn discriminator_only() -> Self {
        Trainable {
            discriminator: true,
            ..Trainable::default()
        }
    }

    pub fn all() -> Self {
        Trainable {
            extractor: true,
            depth_gen: true,
            seg_gen: true,
            discriminator: true,
        }
    }
}

/// Model parameters inserted on a tape, addressable by collection and name.
pub struct NetGraph {
    config: NetConfig,
    pub extractor: BTreeMap<String, Var>,
    pub depth_gen: BTreeMap<String, Var>,
    pub seg_gen: BTreeMap<String, Var>,
    pub discriminator: BTreeMap<String, Var>,
}

fn insert_set<F: Scalar>(
    tape: &mut Tape<F>,
    set: &ParamSet<F>,
    trainable: bool,
) -> BTreeMap<String, Var> {
    let mut map = BTreeMap::new();
    for (name, value) in set.iter() {
        let var = if trainable {
            tape.leaf(value.clone())
        } else {
            tape.constant(value.clone())
        };
        map.insert(name.to_string(), var);
    }
    map
}

impl NetGraph {
    pub fn insert<F: Scalar>(
        tape: &mut Tape<F>,
        params: &ModelParams<F>,
        trainable: Trainable,
    ) -> Self {
        NetGraph {
            config: params.config.clone(),
            extractor: insert_set(tape, &params.extractor, trainable.extractor),
            depth_gen: insert_set(tape, &params.depth_gen, trainable.depth_gen),
            seg_gen: insert_set(tape, &params.seg_gen, trainable.seg_gen),
            discriminator: insert_set(tape, &params.discriminator, trainable.discriminator),
        }
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    fn var(map: &BTreeMap<String, Var>, name: &str) -> Var {
        *map.get(name).unwrap_or_else(|| panic!("missing graph parameter {name}"))
    }

    /// Run the extractor over an NCHW image batch, returning all levels.
    pub fn encode<F: Scalar>(&self, tape: &mut Tape<F>, images: Var) -> Vec<Var> {
        let mut x = images;
        let mut pyramid = Vec::with_capacity(self.config.encoder_layers);
        for i in 1..=self.config.encoder_layers {
            let w = Self::var(&self.extractor, &format!("enc{i}.conv.w"));
            let g = Self::var(&self.extractor, &format!("enc{i}.bn.g"));
            let b = Self::var(&self.extractor, &format!("enc{i}.bn.b"));
            x = tape.conv2d(x, w, 2, 1);
            x = tape.batch_norm_channels(x, g, b, BN_EPS);
            x = tape.leaky_relu(x, LEAKY_SLOPE);
            pyramid.push(x);
        }
        pyramid
    }

    /// Decoder trunk shared by both generators: walk from the deepest level
    /// toward `down_to`, upsampling and concatenating the skip connection of
    /// each level on the way. Stage index 0 is full resolution.
    fn decoder_stages<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        set: &BTreeMap<String, Var>,
        pyramid: &[Var],
        down_to: usize,
    ) -> BTreeMap<usize, Var> {
        let l = self.config.encoder_layers;
        let mut stages = BTreeMap::new();
        let mut x = pyramid[l - 1];
        stages.insert(l, x);
        for i in (down_to..l).rev() {
            let up = tape.nearest_up2(x);
            let inp = if i >= 1 {
                tape.concat_channels(&[up, pyramid[i - 1]])
            } else {
                up
            };
            let w = Self::var(set, &format!("stage{i}.conv.w"));
            let g = Self::var(set, &format!("stage{i}.bn.g"));
            let b = Self::var(set, &format!("stage{i}.bn.b"));
            let conv = tape.conv2d(inp, w, 1, 1);
            let normed = tape.batch_norm_channels(conv, g, b, BN_EPS);
            x = tape.relu(normed);
            stages.insert(i, x);
        }
        stages
    }

    /// Depth predictions per configured output layer, nonnegative via a
    /// softplus head, each at its layer's resolution.
    pub fn decode_depth<F: Scalar>(
        &self,
        tape: &mut Tape<F>,
        pyramid: &[Var],
    ) -> BTreeMap<usize, Var> {
        let down_to = *self
            .config
            .depth_output_layers
            .iter()
            .min()
            .expect("validated config");
        let stages = self.decoder_stages(tape, &self.depth_gen, pyramid, down_to);
        let mut out = BTreeMap::new();
        for &lyr in &self.config.depth_output_layers {
            let w = Self::var(&self.depth_gen, &format!("head{lyr}.w"));
            let b = Self::var(&self.depth_gen, &format!("head{lyr}.b"));
            let conv = tape.conv2d(stages[&lyr], w, 1, 1);
            let conv = tape.add_channel_bias(conv, b);
            out.insert(lyr, tape.softplus(conv));
        }
        out
    }

    /// Raw class scores (N, M, H, W) at full input resolution.
    pub fn decode_seg<F: Scalar>(&self, tape: &mut Tape<F>, pyramid: &[Var]) -> Var {
        let stages = self.decoder_stages(tape, &self.seg_gen, pyramid, 0);
        let w = Self::var(&self.seg_gen, "head.w");
        let b = Self::var(&self.seg_gen, "head.b");
        let conv = tape.conv2d(stages[&0], w, 1, 1);
        tape.add_channel_bias(conv, b)
    }

    /// Per-sample real-valued domain score from the configured discriminator.
    pub fn discriminate<F: Scalar>(&self, tape: &mut Tape<F>, pyramid: &[Var]) -> Var {
        match self.config.discriminator_kind {
            DiscriminatorKind::Flatten => self.discriminate_flatten(tape, pyramid),
            DiscriminatorKind::Cascade => self.discriminate_cascade(tape, pyramid),
        }
    }

    fn discriminate_flatten<F: Scalar>(&self, tape: &mut Tape<F>, pyramid: &[Var]) -> Var {
        let n = tape.value(pyramid[0]).shape()[0];
        let mut parts = Vec::new();
        for &l in &self.config.discriminator_layers {
            parts.push(tape.flatten(pyramid[l - 1]));
        }
        let cat = tape.concat_features(&parts);
        let g = Self::var(&self.discriminator, "bn.g");
        let b = Self::var(&self.discriminator, "bn.b");
        let mut x = tape.batch_norm_features(cat, g, b, BN_EPS);
        for stage in ["lin1", "lin2"] {
            let w = Self::var(&self.discriminator, &format!("{stage}.w"));
            let bias = Self::var(&self.discriminator, &format!("{stage}.b"));
            let y = tape.matmul(x, w);
            let y = tape.add_row_bias(y, bias);
            x = tape.leaky_relu(y, LEAKY_SLOPE);
        }
        let w = Self::var(&self.discriminator, "lin3.w");
        let bias = Self::var(&self.discriminator, "lin3.b");
        let y = tape.matmul(x, w);
        let y = tape.add_row_bias(y, bias);
        tape.reshape(y, IxDyn(&[n]))
    }

    fn discriminate_cascade<F: Scalar>(&self, tape: &mut Tape<F>, pyramid: &[Var]) -> Var {
        let n = tape.value(pyramid[0]).shape()[0];
        let l = self.config.encoder_layers;
        let mut x = pyramid[0];
        for blk in 1..l {
            let p = |suffix: &str| Self::var(&self.discriminator, &format!("block{blk}.{suffix}"));
            let main = tape.conv2d(x, p("main1.w"), 2, 1);
            let main = tape.batch_norm_channels(main, p("bn1.g"), p("bn1.b"), BN_EPS);
            let main = tape.leaky_relu(main, LEAKY_SLOPE);
            let main = tape.conv2d(main, p("main2.w"), 1, 1);
            let main = tape.batch_norm_channels(main, p("bn2.g"), p("bn2.b"), BN_EPS);
            let skip = tape.conv2d(x, p("skip.w"), 2, 0);
            let skip = tape.add_channel_bias(skip, p("skip.b"));
            let sum = tape.add(main, skip);
            let block_out = tape.leaky_relu(sum, LEAKY_SLOPE);
            x = tape.concat_channels(&[block_out, pyramid[blk]]);
        }
        let flat = tape.flatten(x);
        let w = Self::var(&self.discriminator, "final.w");
        let bias = Self::var(&self.discriminator, "final.b");
        let y = tape.matmul(flat, w);
        let y = tape.add_row_bias(y, bias);
        tape.reshape(y, IxDyn(&[n]))
    }
}

fn check_images<F: Scalar>(config: &NetConfig, images: &ArrayD<F>) -> Result<(), NetError> {
    let shape = images.shape();
    if shape.len() != 4
        || shape[1] != config.input_channels
        || shape[2] != config.input_height
        || shape[3] != config.input_width
    {
        return Err(NetError::ShapeMismatch(format!(
            "image batch is {:?}, config expects (n, {}, {}, {})",
            shape, config.input_channels, config.input_height, config.input_width
        )));
    }
    Ok(())
}

/// Forward the extractor over an image batch.
pub fn encode<F: Scalar>(
    params: &ModelParams<F>,
    images: &ArrayD<F>,
) -> Result<FeaturePyramid<F>, NetError> {
    check_images(&params.config, images)?;
    let mut tape = Tape::new();
    let graph = NetGraph::insert(&mut tape, params, Trainable::none());
    let input = tape.constant(images.clone());
    let pyramid = graph.encode(&mut tape, input);
    FeaturePyramid::new(pyramid.into_iter().map(|v| tape.value(v).clone()).collect())
}

/// Multi-scale depth predictions keyed by layer index.
pub fn decode_depth<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
) -> Result<BTreeMap<usize, ArrayD<F>>, NetError> {
    pyramid.check_config(&params.config)?;
    let mut tape = Tape::new();
    let graph = NetGraph::insert(&mut tape, params, Trainable::none());
    let levels: Vec<Var> = pyramid
        .levels()
        .iter()
        .map(|l| tape.constant(l.clone()))
        .collect();
    let preds = graph.decode_depth(&mut tape, &levels);
    Ok(preds
        .into_iter()
        .map(|(l, v)| (l, tape.value(v).clone()))
        .collect())
}

/// Full-resolution class scores (pre-softmax).
pub fn decode_seg<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
) -> Result<ArrayD<F>, NetError> {
    pyramid.check_config(&params.config)?;
    let mut tape = Tape::new();
    let graph = NetGraph::insert(&mut tape, params, Trainable::none());
    let levels: Vec<Var> = pyramid
        .levels()
        .iter()
        .map(|l| tape.constant(l.clone()))
        .collect();
    let scores = graph.decode_seg(&mut tape, &levels);
    Ok(tape.value(scores).clone())
}

fn discriminate_with_kind<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
    kind: DiscriminatorKind,
) -> Result<Array1<F>, NetError> {
    if params.config.discriminator_kind != kind {
        return Err(NetError::InvalidConfig(format!(
            "model carries a {:?} discriminator",
            params.config.discriminator_kind
        )));
    }
    pyramid.check_config(&params.config)?;
    let mut tape = Tape::new();
    let graph = NetGraph::insert(&mut tape, params, Trainable::none());
    let levels: Vec<Var> = pyramid
        .levels()
        .iter()
        .map(|l| tape.constant(l.clone()))
        .collect();
    let scores = graph.discriminate(&mut tape, &levels);
    Ok(tape
        .value(scores)
        .view()
        .into_dimensionality::<ndarray::Ix1>()
        .expect("scores are 1-d")
        .to_owned())
}

/// Score a pyramid with the flatten discriminator.
pub fn discriminate_flatten<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
) -> Result<Array1<F>, NetError> {
    discriminate_with_kind(params, pyramid, DiscriminatorKind::Flatten)
}

/// Score a pyramid with the cascade discriminator.
pub fn discriminate_cascade<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
) -> Result<Array1<F>, NetError> {
    discriminate_with_kind(params, pyramid, DiscriminatorKind::Cascade)
}

/// Score a pyramid with whichever discriminator the model carries.
pub fn discriminate<F: Scalar>(
    params: &ModelParams<F>,
    pyramid: &FeaturePyramid<F>,
) -> Result<Array1<F>, NetError> {
    discriminate_with_kind(params, pyramid, params.config.discriminator_kind)
}

/// Softmax over the class axis of an (N, M, H, W) score tensor.
pub fn seg_probabilities<F: Scalar>(scores: &ArrayD<F>) -> ArrayD<F> {
    let mut probs = scores.clone();
    let m = scores.shape()[1];
    let (n, h, w) = (scores.shape()[0], scores.shape()[2], scores.shape()[3]);
    for b in 0..n {
        for i in 0..h {
            for j in 0..w {
                let mut maxv = probs[[b, 0, i, j]];
                for c in 1..m {
                    maxv = maxv.max(probs[[b, c, i, j]]);
                }
                let mut sum = F::zero();
                for c in 0..m {
                    let e = (probs[[b, c, i, j]] - maxv).exp();
                    probs[[b, c, i, j]] = e;
                    sum += e;
                }
                for c in 0..m {
                    probs[[b, c, i, j]] = probs[[b, c, i, j]] / sum;
                }
            }
        }
    }
    probs
}
